/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/transaction.hpp"

#include <limits>

namespace ledgerbus::ledger {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Approved:
      return "approved";
    case Verdict::Rejected:
      return "rejected";
    case Verdict::Unchecked:
      return "unchecked";
  }
  return "unchecked";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "approved") return Verdict::Approved;
  if (s == "rejected") return Verdict::Rejected;
  if (s == "unchecked") return Verdict::Unchecked;
  throw SchemaError("unknown verdict '" + std::string(s) + "'");
}

Value scalar_to_value(const Scalar &s) {
  return std::visit([](const auto &x) { return Value(x); }, s);
}

Scalar scalar_from_value(const Value &v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return v.get<double>();
  if (v.is_number_integer()) {
    if (v.is_number_unsigned() &&
        v.get<std::uint64_t>() >
            static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw SchemaError("integer out of int64 range");
    }
    return v.get<std::int64_t>();
  }
  throw SchemaError("payload values must be numbers, strings or booleans");
}

Value payload_to_value(const Payload &p) {
  Value out = Value::object();
  for (const auto &[k, s] : p) out[k] = scalar_to_value(s);
  return out;
}

Payload payload_from_value(const Value &v) {
  if (!v.is_object()) throw SchemaError("payload must be a flat map");
  Payload out;
  for (const auto &[k, s] : v.items()) out.emplace(k, scalar_from_value(s));
  return out;
}

namespace {

Value id_preimage(const Transaction &tx) {
  Value v = Value::object();
  v["topic"] = tx.topic;
  v["payload"] = payload_to_value(tx.payload);
  v["publisher"] = tx.publisher.hex();
  v["publish_ts"] = tx.publish_ts;
  if (tx.contract_id) v["contract_id"] = tx.contract_id->hex();
  return v;
}

}  // namespace

Hash256 compute_tx_id(const Transaction &tx) {
  return sha256(canonical_serialize(id_preimage(tx)));
}

Transaction make_transaction(std::string topic, Payload payload, std::int64_t publish_ts,
                             std::optional<Hash256> contract_id,
                             const crypto::KeyPair &publisher) {
  Transaction tx;
  tx.topic = std::move(topic);
  tx.payload = std::move(payload);
  tx.publisher = publisher.public_key;
  tx.publish_ts = publish_ts;
  tx.contract_id = contract_id;
  tx.verdict = Verdict::Unchecked;
  tx.tx_id = compute_tx_id(tx);
  tx.signature = crypto::sign(publisher.secret_key, tx.tx_id.view());
  return tx;
}

bool verify_transaction(const Transaction &tx) {
  Hash256 expected;
  try {
    expected = compute_tx_id(tx);
  } catch (const SerializationError &) {
    return false;
  }
  if (expected != tx.tx_id) return false;
  return crypto::verify(tx.publisher, tx.tx_id.view(), tx.signature);
}

Value to_value(const Transaction &tx) {
  Value v = id_preimage(tx);
  v["tx_id"] = tx.tx_id.hex();
  v["verdict"] = std::string(to_string(tx.verdict));
  v["signature"] = tx.signature.hex();
  return v;
}

Transaction transaction_from_value(const Value &v) {
  require_only_keys(v, {"contract_id", "payload", "publish_ts", "publisher", "signature",
                        "topic", "tx_id", "verdict"});
  Transaction tx;
  try {
    tx.tx_id = Hash256::from_hex(require_string(v, "tx_id"));
    tx.topic = require_string(v, "topic");
    tx.payload = payload_from_value(require_object(v, "payload"));
    tx.publisher = crypto::PublicKey::from_hex(require_string(v, "publisher"));
    tx.publish_ts = require_int(v, "publish_ts");
    tx.verdict = verdict_from_string(require_string(v, "verdict"));
    if (v.contains("contract_id")) {
      tx.contract_id = Hash256::from_hex(require_string(v, "contract_id"));
    }
    tx.signature = crypto::Signature::from_hex(require_string(v, "signature"));
  } catch (const FormatError &e) {
    throw SchemaError(std::string("transaction: ") + e.what());
  }
  return tx;
}

std::string canonical_bytes(const Transaction &tx) {
  return canonical_serialize(to_value(tx));
}

}  // namespace ledgerbus::ledger
