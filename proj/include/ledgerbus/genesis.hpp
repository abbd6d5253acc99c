/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ledgerbus/block.hpp"
#include "ledgerbus/crypto.hpp"

namespace ledgerbus::ledger {

inline constexpr std::string_view kHashFunction = "sha256";
inline constexpr std::string_view kGenesisTopic = "Genesis";

/// Chain identity shared by every node of a network.
struct GenesisConfig {
  std::string chain_id;
  crypto::ValidatorSet validators;
  std::int64_t genesis_time = 0;
  std::string hash_function{kHashFunction};

  bool operator==(const GenesisConfig &) const = default;
};

Value to_value(const GenesisConfig &g);
GenesisConfig genesis_from_value(const Value &v);
std::string encode_genesis(const GenesisConfig &g);
GenesisConfig decode_genesis(std::string_view text);

void save_genesis_file(const std::filesystem::path &path, const GenesisConfig &g);
GenesisConfig load_genesis_file(const std::filesystem::path &path);

/// Height-0 block. Its single Unchecked transaction records the chain id,
/// hash function and validator set, so chains with different genesis files
/// have different genesis hashes.
Block make_genesis_block(const GenesisConfig &g);

}  // namespace ledgerbus::ledger
