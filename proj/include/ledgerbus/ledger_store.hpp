/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "ledgerbus/block.hpp"
#include "ledgerbus/genesis.hpp"

namespace ledgerbus::ledger {

enum class LedgerErrc {
  ChainMismatch,
  QuorumNotMet,
  MerkleMismatch,
  TxMismatch,
  HeightOutOfRange,
  NoGenesis,
  Corrupt,
};

std::string_view to_string(LedgerErrc e);

class LedgerError : public std::runtime_error {
 public:
  LedgerError(LedgerErrc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  LedgerErrc code() const { return code_; }

 private:
  LedgerErrc code_;
};

struct BlockFault {
  LedgerErrc code;
  std::string detail;
};

/// Checks `b` as the successor of `prev` (or as the genesis block when `prev`
/// is null). The genesis block must equal `expected_genesis`.
std::optional<BlockFault> check_block(const Block &b, const Block *prev,
                                      const Block &expected_genesis,
                                      const crypto::ValidatorSet &validators);

/// Valid precommit signatures over the block hash, counted once per validator.
/// Any invalid or unknown signature makes the whole certificate invalid.
std::optional<BlockFault> check_commit(const Block &b,
                                       const crypto::ValidatorSet &validators);

struct VerifyReport {
  bool ok = true;
  std::optional<std::int64_t> failed_height;
  std::optional<LedgerErrc> error;
  std::string detail;

  static VerifyReport failure(std::int64_t height, LedgerErrc code, std::string detail) {
    return {false, height, code, std::move(detail)};
  }
};

struct TxLocation {
  std::int64_t height;
  std::size_t offset;

  bool operator==(const TxLocation &) const = default;
};

/// Block log record: 4-byte big-endian length followed by the canonical block.
std::string encode_record(const Block &b);
/// Splits a log image into record bodies. A torn trailing record is dropped;
/// `valid_bytes` receives the length of the well-formed prefix.
std::vector<std::string> split_records(std::string_view image,
                                       std::size_t *valid_bytes = nullptr);

/// Append-only, height-indexed block store with an optional write-ahead log.
/// One writer appends; any number of readers may query concurrently.
class LedgerStore {
 public:
  explicit LedgerStore(GenesisConfig genesis,
                       std::optional<std::filesystem::path> log_path = std::nullopt);

  LedgerStore(const LedgerStore &) = delete;
  LedgerStore &operator=(const LedgerStore &) = delete;

  /// Appends the genesis block if the store is empty.
  void ensure_genesis();

  /// Validates and appends; returns the new height. Rejected blocks leave the
  /// store untouched.
  std::int64_t append_block(const Block &b);

  Block get_block(std::int64_t height) const;
  std::int64_t current_height() const;
  bool empty() const;
  Hash256 head_hash() const;
  Hash256 block_hash_at(std::int64_t height) const;
  bool contains_tx(const Hash256 &tx_id) const;
  std::vector<TxLocation> topic_index(std::string_view topic) const;
  std::vector<Block> blocks() const;

  const GenesisConfig &genesis() const { return genesis_; }
  const crypto::ValidatorSet &validators() const { return genesis_.validators; }
  const Block &expected_genesis() const { return genesis_block_; }

 private:
  void apply(const Block &b);

  GenesisConfig genesis_;
  Block genesis_block_;
  std::optional<std::filesystem::path> log_path_;
  std::ofstream log_;

  mutable std::shared_mutex mu_;
  std::vector<Block> blocks_;
  std::vector<Hash256> hashes_;
  std::unordered_set<Hash256> tx_ids_;
  std::map<std::string, std::vector<TxLocation>, std::less<>> topics_;
};

VerifyReport verify_chain(const LedgerStore &store);
VerifyReport verify_blocks(std::span<const Block> blocks, const GenesisConfig &genesis);
/// Decodes each record body and verifies the chain; undecodable records fail
/// at their own height with Corrupt.
VerifyReport verify_records(std::span<const std::string> records,
                            const GenesisConfig &genesis);

}  // namespace ledgerbus::ledger
