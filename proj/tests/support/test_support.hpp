/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <random>
#include <string>
#include <vector>

#include "ledgerbus/block.hpp"
#include "ledgerbus/contract.hpp"
#include "ledgerbus/genesis.hpp"

namespace ledgerbus::testing {

using Rng = std::mt19937_64;

/// Random flat payload with 1..max_fields fields of mixed kinds.
ledger::Payload random_payload(Rng &rng, std::size_t max_fields = 4);

/// Signed transaction; contract-bound ones get a random verdict.
ledger::Transaction random_tx(Rng &rng, const crypto::KeyPair &publisher, bool bound);

struct TestChain {
  ledger::GenesisConfig genesis;
  std::vector<crypto::KeyPair> keys;
  std::vector<ledger::Block> blocks;  // blocks[0] is genesis
};

ledger::GenesisConfig test_genesis(const std::string &chain_id, std::size_t validators,
                                   std::vector<crypto::KeyPair> *keys = nullptr);

/// Seals `txs` on top of `prev` with precommit signatures from the first
/// `signers` keys.
ledger::Block seal_block(std::vector<ledger::Transaction> txs, const ledger::Block &prev,
                         const std::vector<crypto::KeyPair> &keys, std::size_t signers,
                         std::int64_t round = 0);

/// Genesis plus `length` blocks of 0..6 random transactions each.
TestChain build_chain(std::size_t validators, std::size_t length, std::uint64_t seed);

// Oracles below are written from the definitions, independently of the
// library code paths they check.

/// Recursive Merkle root: split at the largest power of two below n, leaves
/// SHA-256(0x00 || tx bytes), inner nodes SHA-256(0x01 || left || right),
/// empty list SHA-256("").
Hash256 oracle_merkle_root(const std::vector<ledger::Transaction> &txs);

/// Direct reading of the comparator table.
bool oracle_condition(const contract::Condition &c, const ledger::Payload &p);
ledger::Verdict oracle_verdict(const std::vector<contract::Condition> &conds,
                               const ledger::Payload &p);

/// Matches by enumerating every expansion of the filter's wildcards over
/// `alphabet` up to `max_levels` levels and looking for `topic`.
bool oracle_match(const std::string &filter, const std::string &topic,
                  const std::vector<std::string> &alphabet, std::size_t max_levels);

/// All literal topics of 1..max_levels levels over `alphabet`.
std::vector<std::string> enumerate_topics(const std::vector<std::string> &alphabet,
                                          std::size_t max_levels);

}  // namespace ledgerbus::testing
