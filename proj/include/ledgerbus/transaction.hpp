/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "ledgerbus/bytes.hpp"
#include "ledgerbus/canonical.hpp"
#include "ledgerbus/crypto.hpp"

namespace ledgerbus::ledger {

using Scalar = std::variant<std::int64_t, double, bool, std::string>;

/// Flat field-name -> scalar map carried by every published message.
using Payload = std::map<std::string, Scalar, std::less<>>;

enum class Verdict { Approved, Rejected, Unchecked };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

Value scalar_to_value(const Scalar &s);
Scalar scalar_from_value(const Value &v);
Value payload_to_value(const Payload &p);
Payload payload_from_value(const Value &v);

/// A published message plus its consensus verdict.
///
/// `tx_id` is the digest of the canonical form of the publisher-controlled
/// fields (topic, payload, publisher, publish_ts, contract_id). The publisher
/// signs `tx_id`. `verdict` is assigned by the block proposer and checked by
/// every validator; it stays Unchecked for transactions with no contract.
struct Transaction {
  Hash256 tx_id;
  std::string topic;
  Payload payload;
  crypto::PublicKey publisher;
  std::int64_t publish_ts = 0;
  Verdict verdict = Verdict::Unchecked;
  std::optional<Hash256> contract_id;
  crypto::Signature signature;

  bool operator==(const Transaction &) const = default;
};

Hash256 compute_tx_id(const Transaction &tx);

/// Builds a signed, Unchecked transaction.
Transaction make_transaction(std::string topic, Payload payload, std::int64_t publish_ts,
                             std::optional<Hash256> contract_id,
                             const crypto::KeyPair &publisher);

/// tx_id recomputes and the publisher signature verifies.
bool verify_transaction(const Transaction &tx);

Value to_value(const Transaction &tx);
Transaction transaction_from_value(const Value &v);

/// Full canonical bytes, including tx_id, verdict and signature.
std::string canonical_bytes(const Transaction &tx);

}  // namespace ledgerbus::ledger
