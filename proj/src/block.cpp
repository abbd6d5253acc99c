/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/block.hpp"

namespace ledgerbus::ledger {

Hash256 merkle_root(std::span<const Transaction> txs) {
  if (txs.empty()) return sha256(std::string_view{});
  std::vector<Hash256> level;
  level.reserve(txs.size());
  for (const auto &tx : txs) {
    level.push_back(sha256_prefixed(0x00, as_bytes(canonical_bytes(tx))));
  }
  while (level.size() > 1) {
    std::vector<Hash256> next;
    next.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      next.push_back(sha256_prefixed(0x01, level[i].view(), level[i + 1].view()));
    }
    if (level.size() % 2 == 1) next.push_back(level.back());
    level = std::move(next);
  }
  return level.front();
}

Hash256 block_hash(const BlockHeader &header) {
  return sha256(canonical_serialize(to_value(header)));
}

std::string_view to_string(VoteKind k) {
  return k == VoteKind::Prevote ? "prevote" : "precommit";
}

std::string vote_sign_bytes(VoteKind kind, std::int64_t height, std::int64_t round,
                            const std::optional<Hash256> &block_hash,
                            const crypto::PublicKey &voter) {
  Value v = Value::object();
  v["kind"] = std::string(to_string(kind));
  v["height"] = height;
  v["round"] = round;
  v["hash"] = block_hash ? block_hash->hex() : std::string();
  v["voter"] = voter.hex();
  return canonical_serialize(v);
}

Value to_value(const BlockHeader &h) {
  Value v = Value::object();
  v["height"] = h.height;
  v["prev_hash"] = h.prev_hash.hex();
  v["merkle_root"] = h.merkle_root.hex();
  v["proposer"] = h.proposer.hex();
  v["block_ts"] = h.block_ts;
  v["tx_count"] = h.tx_count;
  return v;
}

BlockHeader header_from_value(const Value &v) {
  require_only_keys(v, {"block_ts", "height", "merkle_root", "prev_hash", "proposer",
                        "tx_count"});
  BlockHeader h;
  try {
    h.height = require_int(v, "height");
    h.prev_hash = Hash256::from_hex(require_string(v, "prev_hash"));
    h.merkle_root = Hash256::from_hex(require_string(v, "merkle_root"));
    h.proposer = crypto::PublicKey::from_hex(require_string(v, "proposer"));
    h.block_ts = require_int(v, "block_ts");
    h.tx_count = require_int(v, "tx_count");
  } catch (const FormatError &e) {
    throw SchemaError(std::string("header: ") + e.what());
  }
  return h;
}

Value to_value(const Block &b) {
  Value txs = Value::array();
  for (const auto &tx : b.txs) txs.push_back(to_value(tx));
  Value sigs = Value::array();
  for (const auto &cs : b.commit_signatures) {
    sigs.push_back({{"validator", cs.validator.hex()}, {"signature", cs.signature.hex()}});
  }
  Value v = Value::object();
  v["header"] = to_value(b.header);
  v["txs"] = std::move(txs);
  v["commit"] = {{"round", b.commit_round}, {"signatures", std::move(sigs)}};
  return v;
}

Block block_from_value(const Value &v) {
  require_only_keys(v, {"commit", "header", "txs"});
  Block b;
  b.header = header_from_value(require_object(v, "header"));
  for (const auto &tv : require_array(v, "txs")) {
    b.txs.push_back(transaction_from_value(tv));
  }
  const auto &commit = require_object(v, "commit");
  require_only_keys(commit, {"round", "signatures"});
  b.commit_round = require_int(commit, "round");
  try {
    for (const auto &sv : require_array(commit, "signatures")) {
      require_only_keys(sv, {"signature", "validator"});
      b.commit_signatures.push_back(
          {crypto::PublicKey::from_hex(require_string(sv, "validator")),
           crypto::Signature::from_hex(require_string(sv, "signature"))});
    }
  } catch (const FormatError &e) {
    throw SchemaError(std::string("commit: ") + e.what());
  }
  return b;
}

std::string encode_block(const Block &b) { return canonical_serialize(to_value(b)); }

Block decode_block(std::string_view bytes) {
  return block_from_value(parse_canonical(bytes, /*strict=*/true));
}

}  // namespace ledgerbus::ledger
