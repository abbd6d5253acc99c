/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/ledger_store.hpp"

#include <mutex>
#include <set>
#include <sstream>

namespace ledgerbus::ledger {

std::string_view to_string(LedgerErrc e) {
  switch (e) {
    case LedgerErrc::ChainMismatch:
      return "ChainMismatch";
    case LedgerErrc::QuorumNotMet:
      return "QuorumNotMet";
    case LedgerErrc::MerkleMismatch:
      return "MerkleMismatch";
    case LedgerErrc::TxMismatch:
      return "TxMismatch";
    case LedgerErrc::HeightOutOfRange:
      return "HeightOutOfRange";
    case LedgerErrc::NoGenesis:
      return "NoGenesis";
    case LedgerErrc::Corrupt:
      return "Corrupt";
  }
  return "Unknown";
}

std::optional<BlockFault> check_commit(const Block &b,
                                       const crypto::ValidatorSet &validators) {
  const auto hash = block_hash(b.header);
  std::set<std::size_t> seen;
  for (const auto &cs : b.commit_signatures) {
    auto idx = validators.index_of(cs.validator);
    if (!idx) {
      return BlockFault{LedgerErrc::QuorumNotMet, "signature from non-validator"};
    }
    if (!seen.insert(*idx).second) {
      return BlockFault{LedgerErrc::QuorumNotMet, "duplicate commit signature"};
    }
    auto msg = vote_sign_bytes(VoteKind::Precommit, b.header.height, b.commit_round, hash,
                               cs.validator);
    if (!crypto::verify(cs.validator, msg, cs.signature)) {
      return BlockFault{LedgerErrc::QuorumNotMet,
                        "invalid commit signature from " + validators[*idx].name};
    }
  }
  if (seen.size() < validators.quorum()) {
    return BlockFault{LedgerErrc::QuorumNotMet,
                      std::to_string(seen.size()) + " commit signatures, quorum is " +
                          std::to_string(validators.quorum())};
  }
  return std::nullopt;
}

std::optional<BlockFault> check_block(const Block &b, const Block *prev,
                                      const Block &expected_genesis,
                                      const crypto::ValidatorSet &validators) {
  const std::int64_t expected_height = prev ? prev->header.height + 1 : 0;
  if (b.header.height != expected_height) {
    return BlockFault{LedgerErrc::ChainMismatch,
                      "height " + std::to_string(b.header.height) + ", expected " +
                          std::to_string(expected_height)};
  }
  const Hash256 expected_prev = prev ? block_hash(prev->header) : Hash256{};
  if (b.header.prev_hash != expected_prev) {
    return BlockFault{LedgerErrc::ChainMismatch, "prev_hash does not link"};
  }
  if (b.header.tx_count != static_cast<std::int64_t>(b.txs.size())) {
    return BlockFault{LedgerErrc::MerkleMismatch, "tx_count does not match tx list"};
  }
  if (merkle_root(b.txs) != b.header.merkle_root) {
    return BlockFault{LedgerErrc::MerkleMismatch, "merkle root does not match tx list"};
  }
  std::unordered_set<Hash256> ids;
  for (const auto &tx : b.txs) {
    Hash256 id;
    try {
      id = compute_tx_id(tx);
    } catch (const SerializationError &e) {
      return BlockFault{LedgerErrc::TxMismatch, e.what()};
    }
    if (id != tx.tx_id) return BlockFault{LedgerErrc::TxMismatch, "tx_id does not recompute"};
    if ((tx.verdict == Verdict::Unchecked) != !tx.contract_id.has_value()) {
      return BlockFault{LedgerErrc::TxMismatch, "verdict inconsistent with contract binding"};
    }
    if (!ids.insert(tx.tx_id).second) {
      return BlockFault{LedgerErrc::TxMismatch, "duplicate transaction in block"};
    }
  }
  if (!prev) {
    if (b.header != expected_genesis.header || b.txs != expected_genesis.txs ||
        !b.commit_signatures.empty() || b.commit_round != 0) {
      return BlockFault{LedgerErrc::ChainMismatch, "genesis block differs from genesis file"};
    }
    return std::nullopt;
  }
  for (const auto &tx : b.txs) {
    if (!verify_transaction(tx)) {
      return BlockFault{LedgerErrc::TxMismatch, "publisher signature does not verify"};
    }
  }
  return check_commit(b, validators);
}

std::string encode_record(const Block &b) {
  std::string body = encode_block(b);
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += body;
  return out;
}

std::vector<std::string> split_records(std::string_view image, std::size_t *valid_bytes) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (image.size() - pos >= 4) {
    auto byte = [&](std::size_t i) { return static_cast<std::uint32_t>(
                                         static_cast<unsigned char>(image[pos + i])); };
    const std::uint32_t n = (byte(0) << 24) | (byte(1) << 16) | (byte(2) << 8) | byte(3);
    if (image.size() - pos - 4 < n) break;
    out.emplace_back(image.substr(pos + 4, n));
    pos += 4 + n;
  }
  if (valid_bytes) *valid_bytes = pos;
  return out;
}

LedgerStore::LedgerStore(GenesisConfig genesis, std::optional<std::filesystem::path> log_path)
    : genesis_(std::move(genesis)),
      genesis_block_(make_genesis_block(genesis_)),
      log_path_(std::move(log_path)) {
  if (!log_path_) return;
  if (std::filesystem::exists(*log_path_)) {
    std::string image;
    {
      std::ifstream in(*log_path_, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      image = ss.str();
    }
    std::size_t valid = 0;
    auto records = split_records(image, &valid);
    for (std::size_t i = 0; i < records.size(); ++i) {
      Block b;
      try {
        b = decode_block(records[i]);
      } catch (const std::exception &e) {
        throw LedgerError(LedgerErrc::Corrupt,
                          "log record " + std::to_string(i) + ": " + e.what());
      }
      const Block *prev = blocks_.empty() ? nullptr : &blocks_.back();
      if (auto fault = check_block(b, prev, genesis_block_, validators())) {
        throw LedgerError(fault->code, "log record " + std::to_string(i) + ": " + fault->detail);
      }
      apply(b);
    }
    if (valid < image.size()) {
      // Torn final write from a crash; cut it off so later appends stay aligned.
      std::filesystem::resize_file(*log_path_, valid);
    }
  }
  log_.open(*log_path_, std::ios::binary | std::ios::app);
  if (!log_) throw std::runtime_error("cannot open block log " + log_path_->string());
}

void LedgerStore::ensure_genesis() {
  if (empty()) append_block(genesis_block_);
}

std::int64_t LedgerStore::append_block(const Block &b) {
  {
    std::shared_lock lock(mu_);
    const Block *prev = blocks_.empty() ? nullptr : &blocks_.back();
    if (auto fault = check_block(b, prev, genesis_block_, validators())) {
      throw LedgerError(fault->code, fault->detail);
    }
  }
  if (log_.is_open()) {
    log_ << encode_record(b);
    log_.flush();
    if (!log_) throw std::runtime_error("block log write failed");
  }
  std::unique_lock lock(mu_);
  apply(b);
  return b.header.height;
}

void LedgerStore::apply(const Block &b) {
  for (std::size_t i = 0; i < b.txs.size(); ++i) {
    tx_ids_.insert(b.txs[i].tx_id);
    topics_[b.txs[i].topic].push_back({b.header.height, i});
  }
  hashes_.push_back(block_hash(b.header));
  blocks_.push_back(b);
}

Block LedgerStore::get_block(std::int64_t height) const {
  std::shared_lock lock(mu_);
  if (height < 0 || height >= static_cast<std::int64_t>(blocks_.size())) {
    throw LedgerError(LedgerErrc::HeightOutOfRange, "no block at height " + std::to_string(height));
  }
  return blocks_[static_cast<std::size_t>(height)];
}

std::int64_t LedgerStore::current_height() const {
  std::shared_lock lock(mu_);
  if (blocks_.empty()) throw LedgerError(LedgerErrc::NoGenesis, "store has no genesis block");
  return static_cast<std::int64_t>(blocks_.size()) - 1;
}

bool LedgerStore::empty() const {
  std::shared_lock lock(mu_);
  return blocks_.empty();
}

Hash256 LedgerStore::head_hash() const {
  std::shared_lock lock(mu_);
  if (hashes_.empty()) throw LedgerError(LedgerErrc::NoGenesis, "store has no genesis block");
  return hashes_.back();
}

Hash256 LedgerStore::block_hash_at(std::int64_t height) const {
  std::shared_lock lock(mu_);
  if (height < 0 || height >= static_cast<std::int64_t>(hashes_.size())) {
    throw LedgerError(LedgerErrc::HeightOutOfRange, "no block at height " + std::to_string(height));
  }
  return hashes_[static_cast<std::size_t>(height)];
}

bool LedgerStore::contains_tx(const Hash256 &tx_id) const {
  std::shared_lock lock(mu_);
  return tx_ids_.contains(tx_id);
}

std::vector<TxLocation> LedgerStore::topic_index(std::string_view topic) const {
  std::shared_lock lock(mu_);
  auto it = topics_.find(topic);
  if (it == topics_.end()) return {};
  return it->second;
}

std::vector<Block> LedgerStore::blocks() const {
  std::shared_lock lock(mu_);
  return blocks_;
}

VerifyReport verify_blocks(std::span<const Block> blocks, const GenesisConfig &genesis) {
  const Block expected_genesis = make_genesis_block(genesis);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block *prev = i == 0 ? nullptr : &blocks[i - 1];
    if (auto fault = check_block(blocks[i], prev, expected_genesis, genesis.validators)) {
      return VerifyReport::failure(static_cast<std::int64_t>(i), fault->code, fault->detail);
    }
  }
  return {};
}

VerifyReport verify_chain(const LedgerStore &store) {
  auto blocks = store.blocks();
  return verify_blocks(blocks, store.genesis());
}

VerifyReport verify_records(std::span<const std::string> records,
                            const GenesisConfig &genesis) {
  const Block expected_genesis = make_genesis_block(genesis);
  std::optional<Block> prev;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Block b;
    try {
      b = decode_block(records[i]);
    } catch (const std::exception &e) {
      return VerifyReport::failure(static_cast<std::int64_t>(i), LedgerErrc::Corrupt, e.what());
    }
    if (auto fault = check_block(b, prev ? &*prev : nullptr, expected_genesis,
                                 genesis.validators)) {
      return VerifyReport::failure(static_cast<std::int64_t>(i), fault->code, fault->detail);
    }
    prev = std::move(b);
  }
  return {};
}

}  // namespace ledgerbus::ledger
