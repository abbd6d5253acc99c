/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/messages.hpp"

namespace ledgerbus::net {
namespace {

Frame make(FrameType type, const Value &body) { return {type, canonical_serialize(body)}; }

// Runs `fn` on the parsed body, folding every decoding failure into
// MessageError so callers catch one type.
template <typename Fn>
auto decode(const Frame &f, FrameType expected, Fn fn) {
  if (f.type != expected) {
    throw MessageError(std::string("expected ") + std::string(to_string(expected)) + " frame, got " +
                       std::string(to_string(f.type)));
  }
  try {
    Value v = parse_canonical(f.body, false);
    if (!v.is_object()) throw SchemaError("frame body must be an object");
    return fn(v);
  } catch (const MessageError &) {
    throw;
  } catch (const std::exception &e) {
    throw MessageError(std::string(to_string(expected)) + " body: " + e.what());
  }
}

ledger::VoteKind vote_kind_from_string(std::string_view s) {
  if (s == "prevote") return ledger::VoteKind::Prevote;
  if (s == "precommit") return ledger::VoteKind::Precommit;
  throw SchemaError("unknown vote kind '" + std::string(s) + "'");
}

Frame filter_frame(FrameType type, std::string_view filter) {
  Value v = Value::object();
  v["filter"] = std::string(filter);
  return make(type, v);
}

}  // namespace

Frame encode_proposal(const consensus::Proposal &p) {
  Value v = Value::object();
  v["height"] = p.height;
  v["round"] = p.round;
  v["pol_round"] = p.pol_round;
  v["block"] = ledger::to_value(p.block);
  v["proposer"] = p.proposer.hex();
  v["signature"] = p.signature.hex();
  return make(FrameType::Proposal, v);
}

consensus::Proposal decode_proposal(const Frame &f) {
  return decode(f, FrameType::Proposal, [](const Value &v) {
    require_only_keys(v, {"block", "height", "pol_round", "proposer", "round", "signature"});
    consensus::Proposal p;
    p.height = require_int(v, "height");
    p.round = require_int(v, "round");
    p.pol_round = require_int(v, "pol_round");
    p.block = ledger::block_from_value(require_object(v, "block"));
    p.proposer = crypto::PublicKey::from_hex(require_string(v, "proposer"));
    p.signature = crypto::Signature::from_hex(require_string(v, "signature"));
    return p;
  });
}

Frame encode_vote(const consensus::Vote &v) {
  Value out = Value::object();
  out["kind"] = std::string(ledger::to_string(v.kind));
  out["height"] = v.height;
  out["round"] = v.round;
  out["hash"] = v.block_hash ? v.block_hash->hex() : std::string();
  out["voter"] = v.voter.hex();
  out["signature"] = v.signature.hex();
  return make(FrameType::Vote, out);
}

consensus::Vote decode_vote(const Frame &f) {
  return decode(f, FrameType::Vote, [](const Value &v) {
    require_only_keys(v, {"hash", "height", "kind", "round", "signature", "voter"});
    consensus::Vote out;
    out.kind = vote_kind_from_string(require_string(v, "kind"));
    out.height = require_int(v, "height");
    out.round = require_int(v, "round");
    auto h = require_string(v, "hash");
    if (!h.empty()) out.block_hash = Hash256::from_hex(h);
    out.voter = crypto::PublicKey::from_hex(require_string(v, "voter"));
    out.signature = crypto::Signature::from_hex(require_string(v, "signature"));
    return out;
  });
}

Frame encode_tx_gossip(const ledger::Transaction &tx) {
  return make(FrameType::TxGossip, ledger::to_value(tx));
}

ledger::Transaction decode_tx_gossip(const Frame &f) {
  return decode(f, FrameType::TxGossip,
                [](const Value &v) { return ledger::transaction_from_value(v); });
}

Frame encode_publish(const PublishMsg &m) {
  Value v = Value::object();
  v["topic"] = m.topic;
  v["payload"] = ledger::payload_to_value(m.payload);
  return make(FrameType::Publish, v);
}

PublishMsg decode_publish(const Frame &f) {
  return decode(f, FrameType::Publish, [](const Value &v) {
    require_only_keys(v, {"payload", "topic"});
    return PublishMsg{require_string(v, "topic"),
                      ledger::payload_from_value(require_object(v, "payload"))};
  });
}

Frame encode_subscribe(std::string_view filter) {
  return filter_frame(FrameType::Subscribe, filter);
}

Frame encode_unsubscribe(std::string_view filter) {
  return filter_frame(FrameType::Unsubscribe, filter);
}

std::string decode_filter(const Frame &f) {
  FrameType expected =
      f.type == FrameType::Unsubscribe ? FrameType::Unsubscribe : FrameType::Subscribe;
  return decode(f, expected, [](const Value &v) {
    require_only_keys(v, {"filter"});
    return require_string(v, "filter");
  });
}

Frame encode_ack(const AckMsg &m) {
  Value v = Value::object();
  v["ok"] = true;
  if (m.path) v["path"] = *m.path;
  if (m.tx_id) v["tx_id"] = m.tx_id->hex();
  return make(FrameType::Ack, v);
}

AckMsg decode_ack(const Frame &f) {
  return decode(f, FrameType::Ack, [](const Value &v) {
    require_only_keys(v, {"ok", "path", "tx_id"});
    if (!require_bool(v, "ok")) throw SchemaError("ack must have ok=true");
    AckMsg m;
    if (v.contains("path")) m.path = require_string(v, "path");
    if (v.contains("tx_id")) m.tx_id = Hash256::from_hex(require_string(v, "tx_id"));
    return m;
  });
}

Frame encode_deliver(const broker::Delivery &d) {
  Value v = Value::object();
  v["topic"] = d.topic;
  v["payload"] = ledger::payload_to_value(d.payload);
  if (d.provenance) {
    Value p = Value::object();
    p["height"] = d.provenance->height;
    p["tx_id"] = d.provenance->tx_id.hex();
    p["verdict"] = std::string(ledger::to_string(d.provenance->verdict));
    p["publish_ts"] = d.provenance->publish_ts;
    v["provenance"] = std::move(p);
  }
  return make(FrameType::Deliver, v);
}

broker::Delivery decode_deliver(const Frame &f) {
  return decode(f, FrameType::Deliver, [](const Value &v) {
    require_only_keys(v, {"payload", "provenance", "topic"});
    broker::Delivery d;
    d.topic = require_string(v, "topic");
    d.payload = ledger::payload_from_value(require_object(v, "payload"));
    if (v.contains("provenance")) {
      const Value &p = require_object(v, "provenance");
      require_only_keys(p, {"height", "publish_ts", "tx_id", "verdict"});
      d.provenance = broker::Provenance{require_int(p, "height"),
                                        Hash256::from_hex(require_string(p, "tx_id")),
                                        ledger::verdict_from_string(require_string(p, "verdict")),
                                        require_int(p, "publish_ts")};
    }
    return d;
  });
}

Frame encode_query_height(const QueryHeightMsg &m) {
  Value v = Value::object();
  if (m.chain_id) v["chain_id"] = *m.chain_id;
  if (m.peer) v["peer"] = m.peer->hex();
  return make(FrameType::QueryHeight, v);
}

QueryHeightMsg decode_query_height(const Frame &f) {
  return decode(f, FrameType::QueryHeight, [](const Value &v) {
    require_only_keys(v, {"chain_id", "peer"});
    QueryHeightMsg m;
    if (v.contains("chain_id")) m.chain_id = require_string(v, "chain_id");
    if (v.contains("peer")) m.peer = crypto::PublicKey::from_hex(require_string(v, "peer"));
    return m;
  });
}

Frame encode_query_block(std::int64_t height) {
  Value v = Value::object();
  v["height"] = height;
  return make(FrameType::QueryBlock, v);
}

std::int64_t decode_query_block(const Frame &f) {
  return decode(f, FrameType::QueryBlock, [](const Value &v) {
    require_only_keys(v, {"height"});
    return require_int(v, "height");
  });
}

Frame encode_query_resp(const QueryRespMsg &m) {
  Value v = Value::object();
  if (m.height) v["height"] = *m.height;
  if (m.block) v["block"] = ledger::to_value(*m.block);
  return make(FrameType::QueryResp, v);
}

QueryRespMsg decode_query_resp(const Frame &f) {
  return decode(f, FrameType::QueryResp, [](const Value &v) {
    require_only_keys(v, {"block", "height"});
    QueryRespMsg m;
    if (v.contains("height")) m.height = require_int(v, "height");
    if (v.contains("block")) m.block = ledger::block_from_value(require_object(v, "block"));
    if (!m.height && !m.block) throw SchemaError("empty query response");
    return m;
  });
}

Frame encode_error(const ErrorMsg &m) {
  Value v = Value::object();
  v["code"] = m.code;
  v["message"] = m.message;
  return make(FrameType::Error, v);
}

ErrorMsg decode_error(const Frame &f) {
  return decode(f, FrameType::Error, [](const Value &v) {
    require_only_keys(v, {"code", "message"});
    return ErrorMsg{require_string(v, "code"), require_string(v, "message")};
  });
}

}  // namespace ledgerbus::net
