/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ledgerbus/block.hpp"
#include "ledgerbus/consensus.hpp"
#include "ledgerbus/registry.hpp"
#include "ledgerbus/topic.hpp"

namespace ledgerbus::broker {

using contract::TopicFilter;
using ledger::Block;
using ledger::Payload;
using ledger::Transaction;
using ledger::Verdict;

using SessionId = std::uint64_t;

/// Where a committed message sits in the ledger.
struct Provenance {
  std::int64_t height = 0;
  Hash256 tx_id;
  Verdict verdict = Verdict::Unchecked;
  std::int64_t publish_ts = 0;

  bool operator==(const Provenance &) const = default;
};

struct Delivery {
  std::string topic;
  Payload payload;
  std::optional<Provenance> provenance;

  bool operator==(const Delivery &) const = default;
};

using DeliverySink = std::function<void(const Delivery &)>;

enum class PublishPath { Loopback, Submitted, ContractSubmitted };
std::string_view to_string(PublishPath p);

struct PublishReceipt {
  PublishPath path = PublishPath::Loopback;
  std::optional<Hash256> tx_id;
  std::size_t local_deliveries = 0;
};

enum class BrokerErrc {
  UnknownSession,
  BadTopic,
  ReservedTopic,
  BadPayload,
  MissingIdentity,
  SubmitRejected,
};
std::string_view to_string(BrokerErrc e);

class BrokerError : public std::runtime_error {
 public:
  BrokerError(BrokerErrc code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  BrokerErrc code() const { return code_; }

 private:
  BrokerErrc code_;
};

/// Topic-filter trie. Each node is one level; "+" is an ordinary child key and
/// a trailing "#" is stored on the node of the level before it.
class SubscriptionTable {
 public:
  /// Returns false if the pair was already present.
  bool add(const TopicFilter &filter, SessionId session);
  /// Returns false if the pair was not present.
  bool remove(const TopicFilter &filter, SessionId session);
  /// Sessions whose filters match `topic`, ascending and without duplicates.
  std::vector<SessionId> lookup(std::string_view topic) const;
  std::size_t size() const { return size_; }

 private:
  struct Node {
    std::map<std::string, std::unique_ptr<Node>, std::less<>> children;
    std::set<SessionId> exact;
    std::set<SessionId> multi;
  };

  static void collect(const Node &node, const std::vector<std::string_view> &levels,
                      std::size_t depth, std::set<SessionId> &out);

  Node root_;
  std::size_t size_ = 0;
};

struct ClientSession {
  SessionId id = 0;
  DeliverySink sink;
  std::set<TopicFilter> filters;
  std::optional<crypto::KeyPair> identity;
};

struct BrokerStats {
  std::uint64_t loopback_published = 0;
  std::uint64_t submitted = 0;
  std::uint64_t contracts_submitted = 0;
  std::uint64_t deliveries = 0;
  std::uint64_t verified_deliveries = 0;
  std::uint64_t rejected_deliveries = 0;
  std::uint64_t dropped_deliveries = 0;
};

/// Per-node routing. Messages on topics with no contract go straight to local
/// subscribers. Messages on contract-bound topics become signed transactions
/// and reach subscribers only after commit, on "<topic>_verified" or
/// "<topic>_rejected". Documents published on "Contract" are checked and
/// submitted for registration.
class Broker {
 public:
  using Submitter = std::function<consensus::SubmitResult(const Transaction &)>;
  using Clock = std::function<std::int64_t()>;

  Broker(contract::ContractRegistry &registry, crypto::KeyPair node_identity,
         Submitter submit, Clock now_ms);

  SessionId open_session(DeliverySink sink,
                         std::optional<crypto::KeyPair> identity = std::nullopt);
  void close_session(SessionId id);
  bool has_session(SessionId id) const { return sessions_.contains(id); }

  void subscribe(SessionId id, std::string_view filter);
  void unsubscribe(SessionId id, std::string_view filter);

  PublishReceipt publish(SessionId id, std::string_view topic, Payload payload);
  PublishReceipt handle_contract_publish(SessionId id, std::string_view document);

  /// Applies a committed block: registers approved contracts and republishes
  /// every contract-bound transaction on its suffixed topic. Returns the
  /// number of deliveries made.
  std::size_t on_commit(const Block &block);

  const BrokerStats &stats() const { return stats_; }
  const SubscriptionTable &subscriptions() const { return table_; }

 private:
  ClientSession &session(SessionId id);
  std::size_t deliver(const Delivery &d);

  contract::ContractRegistry &registry_;
  crypto::KeyPair node_identity_;
  Submitter submit_;
  Clock now_ms_;
  SubscriptionTable table_;
  std::map<SessionId, ClientSession> sessions_;
  SessionId next_session_ = 1;
  BrokerStats stats_;
};

/// True for "Contract" and for topics ending in "_verified" / "_rejected".
bool is_reserved_topic(std::string_view topic);

}  // namespace ledgerbus::broker
