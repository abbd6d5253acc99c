/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/genesis.hpp"

#include <fstream>
#include <sstream>

namespace ledgerbus::ledger {

namespace {

Value validators_value(const crypto::ValidatorSet &vs) {
  Value list = Value::array();
  for (const auto &v : vs.members()) {
    list.push_back({{"name", v.name}, {"public_key", v.id.hex()}});
  }
  return list;
}

}  // namespace

Value to_value(const GenesisConfig &g) {
  Value v = Value::object();
  v["chain_id"] = g.chain_id;
  v["genesis_time"] = g.genesis_time;
  v["hash"] = g.hash_function;
  v["validators"] = validators_value(g.validators);
  return v;
}

GenesisConfig genesis_from_value(const Value &v) {
  require_only_keys(v, {"chain_id", "genesis_time", "hash", "validators"});
  GenesisConfig g;
  g.chain_id = require_string(v, "chain_id");
  g.genesis_time = require_int(v, "genesis_time");
  g.hash_function = require_string(v, "hash");
  if (g.hash_function != kHashFunction) {
    throw SchemaError("unsupported hash function '" + g.hash_function + "'");
  }
  std::vector<crypto::Validator> members;
  for (const auto &entry : require_array(v, "validators")) {
    require_only_keys(entry, {"name", "public_key"});
    try {
      members.push_back({crypto::PublicKey::from_hex(require_string(entry, "public_key")),
                         require_string(entry, "name")});
    } catch (const FormatError &e) {
      throw SchemaError(std::string("validator key: ") + e.what());
    }
  }
  if (members.empty()) throw SchemaError("genesis needs at least one validator");
  g.validators = crypto::ValidatorSet(std::move(members));
  return g;
}

std::string encode_genesis(const GenesisConfig &g) { return canonical_serialize(to_value(g)); }

GenesisConfig decode_genesis(std::string_view text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  return genesis_from_value(parse_canonical(text, /*strict=*/true));
}

void save_genesis_file(const std::filesystem::path &path, const GenesisConfig &g) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write genesis file " + path.string());
  out << encode_genesis(g) << "\n";
}

GenesisConfig load_genesis_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read genesis file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_genesis(ss.str());
}

Block make_genesis_block(const GenesisConfig &g) {
  Transaction tx;
  tx.topic = std::string(kGenesisTopic);
  tx.payload = {{"chain_id", g.chain_id},
                {"hash", g.hash_function},
                {"validators", canonical_serialize(validators_value(g.validators))}};
  tx.publish_ts = g.genesis_time;
  tx.verdict = Verdict::Unchecked;
  tx.tx_id = compute_tx_id(tx);

  Block b;
  b.header.height = 0;
  b.header.block_ts = g.genesis_time;
  b.txs.push_back(std::move(tx));
  b.header.tx_count = 1;
  b.header.merkle_root = merkle_root(b.txs);
  return b;
}

}  // namespace ledgerbus::ledger
