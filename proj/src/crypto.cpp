/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/crypto.hpp"

#include <sodium.h>

#include <atomic>
#include <fstream>
#include <mutex>
#include <unordered_set>

namespace ledgerbus::crypto {

namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

class VerifyCache {
 public:
  static constexpr std::size_t kMaxEntries = 1 << 18;

  static VerifyCache &instance() {
    static VerifyCache cache;
    return cache;
  }

  static Hash256 key(const PublicKey &pk, ByteView msg, const Signature &sig) {
    crypto_hash_sha256_state st;
    crypto_hash_sha256_init(&st);
    crypto_hash_sha256_update(&st, pk.data.data(), pk.data.size());
    crypto_hash_sha256_update(&st, sig.data.data(), sig.data.size());
    crypto_hash_sha256_update(&st, msg.data(), msg.size());
    Hash256 out;
    crypto_hash_sha256_final(&st, out.data.data());
    return out;
  }

  bool contains(const Hash256 &k) {
    std::lock_guard lock(mu_);
    return entries_.contains(k);
  }

  void insert(const Hash256 &k) {
    std::lock_guard lock(mu_);
    if (entries_.size() >= kMaxEntries) entries_.clear();
    entries_.insert(k);
  }

  std::atomic<bool> enabled{true};
  std::atomic<std::uint64_t> hits{0};
  std::atomic<std::uint64_t> misses{0};

 private:
  std::mutex mu_;
  std::unordered_set<Hash256> entries_;
};

}  // namespace

KeyPair generate_keypair(const std::optional<Seed> &seed) {
  ensure_sodium();
  KeyPair kp;
  if (seed) {
    crypto_sign_seed_keypair(kp.public_key.data.data(), kp.secret_key.data.data(),
                             seed->data.data());
  } else {
    crypto_sign_keypair(kp.public_key.data.data(), kp.secret_key.data.data());
  }
  return kp;
}

KeyPair keypair_from_label(std::string_view label) {
  auto digest = sha256(label);
  return generate_keypair(Seed::from_span(digest.view()));
}

Signature sign(const SecretKey &sk, ByteView message) {
  ensure_sodium();
  Signature sig;
  crypto_sign_detached(sig.data.data(), nullptr, message.data(), message.size(),
                       sk.data.data());
  return sig;
}

bool verify(const PublicKey &pk, ByteView message, const Signature &sig) {
  ensure_sodium();
  auto &cache = VerifyCache::instance();
  if (!cache.enabled.load(std::memory_order_relaxed)) {
    return crypto_sign_verify_detached(sig.data.data(), message.data(), message.size(),
                                       pk.data.data()) == 0;
  }
  auto k = VerifyCache::key(pk, message, sig);
  if (cache.contains(k)) {
    cache.hits.fetch_add(1, std::memory_order_relaxed);
    return true;
  }
  cache.misses.fetch_add(1, std::memory_order_relaxed);
  bool ok = crypto_sign_verify_detached(sig.data.data(), message.data(), message.size(),
                                        pk.data.data()) == 0;
  if (ok) cache.insert(k);
  return ok;
}

Signature sign(ByteView secret_key, ByteView message) {
  return sign(SecretKey::from_span(secret_key), message);
}

bool verify(ByteView public_key, ByteView message, ByteView signature) {
  return verify(PublicKey::from_span(public_key), message,
                Signature::from_span(signature));
}

VerifyCacheStats verify_cache_stats() {
  auto &cache = VerifyCache::instance();
  return {cache.hits.load(), cache.misses.load()};
}

void set_verify_cache_enabled(bool enabled) {
  VerifyCache::instance().enabled.store(enabled);
}

std::size_t quorum_threshold(std::size_t n) {
  if (n < 1) throw DomainError("quorum_threshold requires at least one validator");
  return (2 * n) / 3 + 1;
}

ValidatorSet::ValidatorSet(std::vector<Validator> validators)
    : validators_(std::move(validators)) {
  for (std::size_t i = 0; i < validators_.size(); ++i) {
    for (std::size_t j = i + 1; j < validators_.size(); ++j) {
      if (validators_[i].id == validators_[j].id) {
        throw DomainError("duplicate validator id " + validators_[i].id.hex());
      }
    }
  }
}

std::optional<std::size_t> ValidatorSet::index_of(const PublicKey &id) const {
  for (std::size_t i = 0; i < validators_.size(); ++i) {
    if (validators_[i].id == id) return i;
  }
  return std::nullopt;
}

KeyPair keypair_from_secret(const SecretKey &sk) {
  ensure_sodium();
  KeyPair kp;
  kp.secret_key = sk;
  crypto_sign_ed25519_sk_to_pk(kp.public_key.data.data(), sk.data.data());
  // The seed half must regenerate the same key pair.
  Seed seed;
  crypto_sign_ed25519_sk_to_seed(seed.data.data(), sk.data.data());
  if (generate_keypair(seed).public_key != kp.public_key) {
    throw FormatError("secret key is inconsistent with its public half");
  }
  return kp;
}

void save_key_file(const std::filesystem::path &path, const KeyPair &kp) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write key file " + path.string());
  out << kp.secret_key.hex() << "\n";
}

KeyPair load_key_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read key file " + path.string());
  std::string line;
  std::getline(in, line);
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
  return keypair_from_secret(SecretKey::from_hex(line));
}

}  // namespace ledgerbus::crypto
