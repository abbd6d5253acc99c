/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ledgerbus/bytes.hpp"

namespace ledgerbus::crypto {

// Ed25519 identities. The secret key carries the public key in its upper half.
struct PublicKeyTag {};
struct SecretKeyTag {};
struct SignatureTag {};
struct SeedTag {};
using PublicKey = FixedBytes<32, PublicKeyTag>;
using SecretKey = FixedBytes<64, SecretKeyTag>;
using Signature = FixedBytes<64, SignatureTag>;
using Seed = FixedBytes<32, SeedTag>;

struct KeyPair {
  PublicKey public_key;
  SecretKey secret_key;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Deterministic when seeded, random otherwise.
KeyPair generate_keypair(const std::optional<Seed> &seed = std::nullopt);

/// Convenience for tests and fixtures: the seed is the SHA-256 of `label`.
KeyPair keypair_from_label(std::string_view label);

Signature sign(const SecretKey &sk, ByteView message);
inline Signature sign(const SecretKey &sk, std::string_view message) {
  return sign(sk, as_bytes(message));
}

bool verify(const PublicKey &pk, ByteView message, const Signature &sig);
inline bool verify(const PublicKey &pk, std::string_view message,
                   const Signature &sig) {
  return verify(pk, as_bytes(message), sig);
}

// Raw-byte variants; malformed key or signature lengths throw FormatError.
Signature sign(ByteView secret_key, ByteView message);
bool verify(ByteView public_key, ByteView message, ByteView signature);

/// Successful verifications are memoized process-wide. Verification is a pure
/// function of its inputs so the cache never changes an answer.
struct VerifyCacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};
VerifyCacheStats verify_cache_stats();
void set_verify_cache_enabled(bool enabled);

/// Smallest vote count strictly greater than two thirds of n.
std::size_t quorum_threshold(std::size_t n);

struct Validator {
  PublicKey id;
  std::string name;

  bool operator==(const Validator &) const = default;
};

/// Ordered, duplicate-free validator list. The order is the proposer rotation.
class ValidatorSet {
 public:
  ValidatorSet() = default;
  explicit ValidatorSet(std::vector<Validator> validators);

  std::size_t size() const { return validators_.size(); }
  bool empty() const { return validators_.empty(); }
  const Validator &operator[](std::size_t i) const { return validators_[i]; }
  const std::vector<Validator> &members() const { return validators_; }

  std::optional<std::size_t> index_of(const PublicKey &id) const;
  bool contains(const PublicKey &id) const { return index_of(id).has_value(); }

  std::size_t quorum() const { return quorum_threshold(size()); }
  /// Crash faults tolerated: floor((n - 1) / 3).
  std::size_t max_faults() const { return validators_.empty() ? 0 : (size() - 1) / 3; }

  bool operator==(const ValidatorSet &) const = default;

 private:
  std::vector<Validator> validators_;
};

// Key file: the 64-byte secret key as one line of hex.
void save_key_file(const std::filesystem::path &path, const KeyPair &kp);
KeyPair load_key_file(const std::filesystem::path &path);

/// Rebuilds a key pair from its secret key, checking the embedded public key.
KeyPair keypair_from_secret(const SecretKey &sk);

}  // namespace ledgerbus::crypto
