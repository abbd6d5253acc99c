/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "ledgerbus/bytes.hpp"
#include "ledgerbus/crypto.hpp"
#include "ledgerbus/topic.hpp"
#include "ledgerbus/transaction.hpp"

namespace ledgerbus::contract {

using ledger::Payload;
using ledger::Scalar;
using ledger::Transaction;
using ledger::Verdict;

/// Reserved topic that carries contract documents.
inline constexpr std::string_view kContractTopic = "Contract";
inline constexpr std::string_view kVerifiedSuffix = "_verified";
inline constexpr std::string_view kRejectedSuffix = "_rejected";
/// Payload field of a contract-registration transaction.
inline constexpr std::string_view kDocumentField = "document";

enum class ContractErrc {
  Schema,
  Filter,
  Condition,
  Signature,
  Overlap,
  AmbiguousBinding,
};

std::string_view to_string(ContractErrc e);

class ContractError : public std::runtime_error {
 public:
  ContractError(ContractErrc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ContractErrc code() const { return code_; }

 private:
  ContractErrc code_;
};

enum class CompareOp { LT, LE, GT, GE, EQ, NE, InRange };

std::string_view to_string(CompareOp op);
std::optional<CompareOp> compare_op_from_string(std::string_view s);

struct Range {
  Scalar lo;
  Scalar hi;

  bool operator==(const Range &) const = default;
};

struct Condition {
  std::string field;
  CompareOp op = CompareOp::EQ;
  std::variant<Scalar, Range> operand;

  bool operator==(const Condition &) const = default;
};

/// True iff the condition holds for `payload`. Missing fields and kind
/// mismatches never hold.
bool condition_holds(const Condition &c, const Payload &payload);

struct Stakeholder {
  std::string name;
  crypto::PublicKey key;

  bool operator==(const Stakeholder &) const = default;
};

struct StakeholderSignature {
  crypto::PublicKey key;
  crypto::Signature signature;

  bool operator==(const StakeholderSignature &) const = default;
};

struct SmartContract {
  Hash256 contract_id;
  std::vector<Stakeholder> stakeholders;
  std::vector<StakeholderSignature> signatures;
  std::vector<TopicFilter> topics;
  std::vector<Condition> conditions;

  bool operator==(const SmartContract &) const = default;
};

/// Contract document without signatures; its digest is the contract id.
Value unsigned_document(const SmartContract &c);
Hash256 compute_contract_id(const SmartContract &c);
/// Full document including signatures, in canonical form.
std::string encode_contract(const SmartContract &c);

/// Parses and validates a contract document; computes contract_id.
SmartContract parse_contract(std::string_view document);

/// Builds a contract and fills in its id. Signatures are added separately.
SmartContract make_contract(std::vector<Stakeholder> stakeholders,
                            std::vector<TopicFilter> topics,
                            std::vector<Condition> conditions);

/// Appends (or replaces) the signature of `signer` over the contract id.
void sign_contract(SmartContract &c, const crypto::KeyPair &signer);

/// True iff every stakeholder has a verifying signature over contract_id.
bool validate_contract_signatures(const SmartContract &c);

/// Conjunction of all conditions over the transaction payload.
Verdict evaluate(const SmartContract &c, const Transaction &tx);
Verdict evaluate(const SmartContract &c, const Payload &payload);

bool contract_binds(const SmartContract &c, std::string_view topic);
bool contracts_overlap(const SmartContract &a, const SmartContract &b);

}  // namespace ledgerbus::contract
