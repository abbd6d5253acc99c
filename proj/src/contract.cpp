/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/contract.hpp"

#include <algorithm>
#include <compare>

namespace ledgerbus::contract {

std::string_view to_string(ContractErrc e) {
  switch (e) {
    case ContractErrc::Schema:
      return "SchemaError";
    case ContractErrc::Filter:
      return "FilterError";
    case ContractErrc::Condition:
      return "ConditionError";
    case ContractErrc::Signature:
      return "SignatureError";
    case ContractErrc::Overlap:
      return "OverlapError";
    case ContractErrc::AmbiguousBinding:
      return "AmbiguousBinding";
  }
  return "ContractError";
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::LT:
      return "LT";
    case CompareOp::LE:
      return "LE";
    case CompareOp::GT:
      return "GT";
    case CompareOp::GE:
      return "GE";
    case CompareOp::EQ:
      return "EQ";
    case CompareOp::NE:
      return "NE";
    case CompareOp::InRange:
      return "IN_RANGE";
  }
  return "EQ";
}

std::optional<CompareOp> compare_op_from_string(std::string_view s) {
  for (auto op : {CompareOp::LT, CompareOp::LE, CompareOp::GT, CompareOp::GE, CompareOp::EQ,
                  CompareOp::NE, CompareOp::InRange}) {
    if (to_string(op) == s) return op;
  }
  return std::nullopt;
}

namespace {

bool is_number(const Scalar &s) {
  return std::holds_alternative<std::int64_t>(s) || std::holds_alternative<double>(s);
}

double as_double(const Scalar &s) {
  if (auto *i = std::get_if<std::int64_t>(&s)) return static_cast<double>(*i);
  return std::get<double>(s);
}

std::optional<std::partial_ordering> compare_numbers(const Scalar &a, const Scalar &b) {
  if (!is_number(a) || !is_number(b)) return std::nullopt;
  auto *ai = std::get_if<std::int64_t>(&a);
  auto *bi = std::get_if<std::int64_t>(&b);
  if (ai && bi) return *ai <=> *bi;
  return as_double(a) <=> as_double(b);
}

/// Same-kind equality; numbers compare by value across int/double.
std::optional<bool> scalar_equal(const Scalar &a, const Scalar &b) {
  if (auto ord = compare_numbers(a, b)) return *ord == 0;
  if (a.index() != b.index()) return std::nullopt;
  return a == b;
}

}  // namespace

bool condition_holds(const Condition &c, const Payload &payload) {
  auto it = payload.find(c.field);
  if (it == payload.end()) return false;
  const Scalar &value = it->second;

  if (c.op == CompareOp::InRange) {
    const auto *range = std::get_if<Range>(&c.operand);
    if (!range) return false;
    auto lo = compare_numbers(value, range->lo);
    auto hi = compare_numbers(value, range->hi);
    return lo && hi && *lo >= 0 && *hi <= 0;
  }

  const auto *operand = std::get_if<Scalar>(&c.operand);
  if (!operand) return false;
  switch (c.op) {
    case CompareOp::EQ:
    case CompareOp::NE: {
      auto eq = scalar_equal(value, *operand);
      if (!eq) return false;
      return c.op == CompareOp::EQ ? *eq : !*eq;
    }
    default:
      break;
  }
  auto ord = compare_numbers(value, *operand);
  if (!ord) return false;
  switch (c.op) {
    case CompareOp::LT:
      return *ord < 0;
    case CompareOp::LE:
      return *ord <= 0;
    case CompareOp::GT:
      return *ord > 0;
    case CompareOp::GE:
      return *ord >= 0;
    default:
      return false;
  }
}

namespace {

Value condition_value(const Condition &c) {
  Value v = Value::object();
  v["field"] = c.field;
  v["op"] = std::string(to_string(c.op));
  if (const auto *r = std::get_if<Range>(&c.operand)) {
    v["operand"] = Value::array({ledger::scalar_to_value(r->lo), ledger::scalar_to_value(r->hi)});
  } else {
    v["operand"] = ledger::scalar_to_value(std::get<Scalar>(c.operand));
  }
  return v;
}

Condition parse_condition(const Value &v) {
  require_only_keys(v, {"field", "op", "operand"});
  Condition c;
  c.field = require_string(v, "field");
  if (c.field.empty()) throw ContractError(ContractErrc::Condition, "empty field name");
  auto op_name = require_string(v, "op");
  auto op = compare_op_from_string(op_name);
  if (!op) throw ContractError(ContractErrc::Condition, "unknown operator '" + op_name + "'");
  c.op = *op;
  const auto &operand = require_field(v, "operand");

  if (c.op == CompareOp::InRange) {
    if (!operand.is_array() || operand.size() != 2) {
      throw ContractError(ContractErrc::Condition, "IN_RANGE needs a [lo, hi] pair");
    }
    Scalar lo, hi;
    try {
      lo = ledger::scalar_from_value(operand[0]);
      hi = ledger::scalar_from_value(operand[1]);
    } catch (const SchemaError &e) {
      throw ContractError(ContractErrc::Condition, e.what());
    }
    if (!is_number(lo) || !is_number(hi)) {
      throw ContractError(ContractErrc::Condition, "IN_RANGE bounds must be numbers");
    }
    if (*compare_numbers(lo, hi) > 0) {
      throw ContractError(ContractErrc::Condition, "IN_RANGE lower bound exceeds upper bound");
    }
    c.operand = Range{lo, hi};
    return c;
  }

  Scalar s;
  try {
    s = ledger::scalar_from_value(operand);
  } catch (const SchemaError &e) {
    throw ContractError(ContractErrc::Condition, e.what());
  }
  if (c.op != CompareOp::EQ && c.op != CompareOp::NE && !is_number(s)) {
    throw ContractError(ContractErrc::Condition,
                        std::string(to_string(c.op)) + " needs a numeric operand");
  }
  c.operand = std::move(s);
  return c;
}

}  // namespace

Value unsigned_document(const SmartContract &c) {
  Value stakeholders = Value::array();
  for (const auto &s : c.stakeholders) {
    stakeholders.push_back({{"name", s.name}, {"public_key", s.key.hex()}});
  }
  Value topics = Value::array();
  for (const auto &t : c.topics) topics.push_back(t.str());
  Value conditions = Value::array();
  for (const auto &cond : c.conditions) conditions.push_back(condition_value(cond));
  Value v = Value::object();
  v["stakeholders"] = std::move(stakeholders);
  v["topics"] = std::move(topics);
  v["conditions"] = std::move(conditions);
  return v;
}

Hash256 compute_contract_id(const SmartContract &c) {
  return sha256(canonical_serialize(unsigned_document(c)));
}

std::string encode_contract(const SmartContract &c) {
  Value v = unsigned_document(c);
  Value sigs = Value::array();
  for (const auto &s : c.signatures) {
    sigs.push_back({{"public_key", s.key.hex()}, {"signature", s.signature.hex()}});
  }
  v["signatures"] = std::move(sigs);
  return canonical_serialize(v);
}

SmartContract parse_contract(std::string_view document) {
  Value doc;
  try {
    doc = parse_canonical(document, /*strict=*/false);
  } catch (const SerializationError &e) {
    throw ContractError(ContractErrc::Schema, e.what());
  }

  SmartContract c;
  try {
    require_only_keys(doc, {"conditions", "signatures", "stakeholders", "topics"});
    for (const auto &s : require_array(doc, "stakeholders")) {
      require_only_keys(s, {"name", "public_key"});
      c.stakeholders.push_back({require_string(s, "name"),
                                crypto::PublicKey::from_hex(require_string(s, "public_key"))});
    }
    for (const auto &s : require_array(doc, "signatures")) {
      require_only_keys(s, {"public_key", "signature"});
      c.signatures.push_back({crypto::PublicKey::from_hex(require_string(s, "public_key")),
                              crypto::Signature::from_hex(require_string(s, "signature"))});
    }
    for (const auto &t : require_array(doc, "topics")) {
      if (!t.is_string()) throw SchemaError("topic filters must be strings");
      c.topics.push_back(TopicFilter::parse(t.get<std::string>()));
    }
    for (const auto &cond : require_array(doc, "conditions")) {
      c.conditions.push_back(parse_condition(cond));
    }
  } catch (const SchemaError &e) {
    throw ContractError(ContractErrc::Schema, e.what());
  } catch (const FormatError &e) {
    throw ContractError(ContractErrc::Schema, e.what());
  } catch (const FilterError &e) {
    throw ContractError(ContractErrc::Filter, e.what());
  }
  if (c.stakeholders.empty()) {
    throw ContractError(ContractErrc::Schema, "contract needs at least one stakeholder");
  }
  if (c.topics.empty()) throw ContractError(ContractErrc::Schema, "contract binds no topics");
  for (const auto &t : c.topics) {
    if (t.levels().front() == kContractTopic && t.levels().size() == 1) {
      throw ContractError(ContractErrc::Filter, "the Contract topic cannot be bound");
    }
  }
  c.contract_id = compute_contract_id(c);
  return c;
}

SmartContract make_contract(std::vector<Stakeholder> stakeholders,
                            std::vector<TopicFilter> topics,
                            std::vector<Condition> conditions) {
  SmartContract c;
  c.stakeholders = std::move(stakeholders);
  c.topics = std::move(topics);
  c.conditions = std::move(conditions);
  c.contract_id = compute_contract_id(c);
  return c;
}

void sign_contract(SmartContract &c, const crypto::KeyPair &signer) {
  auto sig = crypto::sign(signer.secret_key, c.contract_id.view());
  for (auto &s : c.signatures) {
    if (s.key == signer.public_key) {
      s.signature = sig;
      return;
    }
  }
  c.signatures.push_back({signer.public_key, sig});
}

bool validate_contract_signatures(const SmartContract &c) {
  if (compute_contract_id(c) != c.contract_id) return false;
  for (const auto &holder : c.stakeholders) {
    bool ok = std::any_of(c.signatures.begin(), c.signatures.end(), [&](const auto &s) {
      return s.key == holder.key && crypto::verify(s.key, c.contract_id.view(), s.signature);
    });
    if (!ok) return false;
  }
  return true;
}

Verdict evaluate(const SmartContract &c, const Payload &payload) {
  for (const auto &cond : c.conditions) {
    if (!condition_holds(cond, payload)) return Verdict::Rejected;
  }
  return Verdict::Approved;
}

Verdict evaluate(const SmartContract &c, const Transaction &tx) {
  return evaluate(c, tx.payload);
}

bool contract_binds(const SmartContract &c, std::string_view topic) {
  return std::any_of(c.topics.begin(), c.topics.end(),
                     [&](const TopicFilter &f) { return match_topic(f, topic); });
}

bool contracts_overlap(const SmartContract &a, const SmartContract &b) {
  for (const auto &fa : a.topics) {
    for (const auto &fb : b.topics) {
      if (filters_intersect(fa, fb)) return true;
    }
  }
  return false;
}

}  // namespace ledgerbus::contract
