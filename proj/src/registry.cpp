/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/registry.hpp"

namespace ledgerbus::contract {

Hash256 ContractRegistry::register_contract(const SmartContract &c, OverlapPolicy policy) {
  if (contracts_.contains(c.contract_id)) return c.contract_id;
  if (!validate_contract_signatures(c)) {
    throw ContractError(ContractErrc::Signature, "contract is missing stakeholder signatures");
  }
  if (policy == OverlapPolicy::Reject && overlaps_existing(c)) {
    throw ContractError(ContractErrc::Overlap,
                        "topic filters intersect a registered contract");
  }
  contracts_.emplace(c.contract_id, c);
  return c.contract_id;
}

bool ContractRegistry::overlaps_existing(const SmartContract &c) const {
  for (const auto &[id, existing] : contracts_) {
    if (id != c.contract_id && contracts_overlap(existing, c)) return true;
  }
  return false;
}

std::optional<SmartContract> ContractRegistry::lookup_contract(std::string_view topic) const {
  const SmartContract *match = nullptr;
  for (const auto &[id, c] : contracts_) {
    if (!contract_binds(c, topic)) continue;
    if (match) {
      throw ContractError(ContractErrc::AmbiguousBinding,
                          "topic '" + std::string(topic) + "' is bound by several contracts");
    }
    match = &c;
  }
  if (!match) return std::nullopt;
  return *match;
}

const SmartContract *ContractRegistry::find(const Hash256 &id) const {
  auto it = contracts_.find(id);
  return it == contracts_.end() ? nullptr : &it->second;
}

std::vector<Hash256> ContractRegistry::ids() const {
  std::vector<Hash256> out;
  for (const auto &[id, c] : contracts_) out.push_back(id);
  return out;
}

std::optional<SmartContract> contract_of(const Transaction &tx) {
  if (tx.topic != kContractTopic) return std::nullopt;
  auto it = tx.payload.find(kDocumentField);
  if (it == tx.payload.end()) return std::nullopt;
  const auto *doc = std::get_if<std::string>(&it->second);
  if (!doc) return std::nullopt;
  try {
    return parse_contract(*doc);
  } catch (const ContractError &) {
    return std::nullopt;
  }
}

Verdict decide_verdict(const ContractRegistry &registry, const Transaction &tx) {
  if (!tx.contract_id) return Verdict::Unchecked;

  if (tx.topic == kContractTopic) {
    auto c = contract_of(tx);
    if (!c || c->contract_id != *tx.contract_id) return Verdict::Rejected;
    if (!validate_contract_signatures(*c)) return Verdict::Rejected;
    if (registry.overlaps_existing(*c)) return Verdict::Rejected;
    return Verdict::Approved;
  }

  const SmartContract *c = registry.find(*tx.contract_id);
  if (!c || !contract_binds(*c, tx.topic)) return Verdict::Rejected;
  return evaluate(*c, tx);
}

std::vector<Verdict> assign_verdicts(const ContractRegistry &registry,
                                     std::span<const Transaction> txs) {
  std::vector<Verdict> out;
  out.reserve(txs.size());
  std::optional<ContractRegistry> staged;
  for (const auto &tx : txs) {
    const ContractRegistry &view = staged ? *staged : registry;
    Verdict v = decide_verdict(view, tx);
    out.push_back(v);
    if (v == Verdict::Approved && tx.topic == kContractTopic) {
      if (!staged) staged = registry;
      staged->register_contract(*contract_of(tx));
    }
  }
  return out;
}

std::vector<Hash256> apply_block(ContractRegistry &registry, const ledger::Block &block) {
  std::vector<Hash256> out;
  for (const auto &tx : block.txs) {
    if (tx.topic != kContractTopic || tx.verdict != Verdict::Approved) continue;
    auto c = contract_of(tx);
    if (!c) continue;
    out.push_back(registry.register_contract(*c));
  }
  return out;
}

}  // namespace ledgerbus::contract
