/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ledgerbus/bytes.hpp"
#include "ledgerbus/crypto.hpp"
#include "ledgerbus/transaction.hpp"

namespace ledgerbus::ledger {

struct BlockHeader {
  std::int64_t height = 0;
  Hash256 prev_hash;
  Hash256 merkle_root;
  crypto::PublicKey proposer;
  std::int64_t block_ts = 0;
  std::int64_t tx_count = 0;

  bool operator==(const BlockHeader &) const = default;
};

struct CommitSignature {
  crypto::PublicKey validator;
  crypto::Signature signature;

  bool operator==(const CommitSignature &) const = default;
};

/// A header, its ordered transactions and the precommit signatures of the
/// round in which the block was committed.
struct Block {
  BlockHeader header;
  std::vector<Transaction> txs;
  std::int64_t commit_round = 0;
  std::vector<CommitSignature> commit_signatures;

  bool operator==(const Block &) const = default;
};

/// Leaves are H(0x00 || tx bytes), inner nodes H(0x01 || left || right).
/// An unpaired node moves up a level unchanged. The empty list hashes to H("").
Hash256 merkle_root(std::span<const Transaction> txs);

Hash256 block_hash(const BlockHeader &header);

enum class VoteKind { Prevote, Precommit };
std::string_view to_string(VoteKind k);

/// Bytes signed by a vote. Commit signatures are precommit votes, so a block
/// certificate is checked against these bytes with the block hash filled in.
std::string vote_sign_bytes(VoteKind kind, std::int64_t height, std::int64_t round,
                            const std::optional<Hash256> &block_hash,
                            const crypto::PublicKey &voter);

Value to_value(const BlockHeader &h);
BlockHeader header_from_value(const Value &v);
Value to_value(const Block &b);
Block block_from_value(const Value &v);

std::string encode_block(const Block &b);
/// Strict decode: the input must be the canonical encoding of a block.
Block decode_block(std::string_view bytes);

}  // namespace ledgerbus::ledger
