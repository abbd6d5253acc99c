/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ledgerbus/block.hpp"
#include "ledgerbus/contract.hpp"

namespace ledgerbus::contract {

/// Contracts committed to the ledger, keyed by id. Mutated only from the
/// commit path; the broker and validators read it.
class ContractRegistry {
 public:
  enum class OverlapPolicy { Reject, Allow };

  /// Idempotent on an identical contract id. Throws ContractError with
  /// Signature or Overlap.
  Hash256 register_contract(const SmartContract &c,
                            OverlapPolicy policy = OverlapPolicy::Reject);

  /// The unique contract binding `topic`, if any. Throws ContractError with
  /// AmbiguousBinding when several contracts match.
  std::optional<SmartContract> lookup_contract(std::string_view topic) const;

  const SmartContract *find(const Hash256 &id) const;
  bool contains(const Hash256 &id) const { return contracts_.contains(id); }
  std::size_t size() const { return contracts_.size(); }
  std::vector<Hash256> ids() const;

  /// Overlap against contracts already registered (identical ids excluded).
  bool overlaps_existing(const SmartContract &c) const;

 private:
  std::map<Hash256, SmartContract> contracts_;
};

/// Verdict of a single transaction against `registry`.
///
/// Contract-registration transactions (topic "Contract") are Approved when
/// the document parses, matches the declared contract id, carries every
/// stakeholder signature and does not overlap a registered contract. Data
/// transactions are evaluated against the contract they name; an unknown
/// contract or a topic the contract does not bind is Rejected. Transactions
/// without a contract id stay Unchecked.
Verdict decide_verdict(const ContractRegistry &registry, const Transaction &tx);

/// Verdicts for an ordered transaction list. Registrations approved earlier in
/// the list are visible to later entries.
std::vector<Verdict> assign_verdicts(const ContractRegistry &registry,
                                     std::span<const Transaction> txs);

/// Registers every approved contract transaction of a committed block, in
/// block order. Returns the ids registered.
std::vector<Hash256> apply_block(ContractRegistry &registry, const ledger::Block &block);

/// Decodes the contract carried by a registration transaction.
std::optional<SmartContract> contract_of(const Transaction &tx);

}  // namespace ledgerbus::contract
