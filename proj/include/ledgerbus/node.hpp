/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <variant>
#include <vector>

#include "ledgerbus/broker.hpp"
#include "ledgerbus/consensus.hpp"
#include "ledgerbus/genesis.hpp"
#include "ledgerbus/ledger_store.hpp"
#include "ledgerbus/messages.hpp"
#include "ledgerbus/registry.hpp"

namespace ledgerbus::net {

/// What a node needs from the network. Peers are addressed by their index in
/// the genesis validator list. Every callback runs on the node's event loop.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::int64_t now_us() const = 0;
  virtual void send(std::size_t peer, const Frame &f) = 0;
  virtual void broadcast(const Frame &f) = 0;
  virtual void schedule(std::int64_t delay_us, std::function<void()> fn) = 0;
};

struct NodeConfig {
  ledger::GenesisConfig genesis;
  crypto::KeyPair key;
  consensus::ConsensusConfig consensus;
  std::optional<std::filesystem::path> ledger_path;
};

struct NodeStats {
  std::uint64_t peer_frames = 0;
  std::uint64_t client_frames = 0;
  std::uint64_t malformed_frames = 0;
  std::uint64_t refused_frames = 0;
};

/// One validator: ledger, contract registry, consensus engine and broker
/// wired to a transport.
class Node : private consensus::ConsensusHost {
 public:
  using CommitListener = std::function<void(const ledger::Block &)>;

  Node(NodeConfig cfg, Transport &transport);

  Node(const Node &) = delete;
  Node &operator=(const Node &) = delete;

  /// Replays contracts from the ledger, starts consensus and greets peers.
  void start();

  void handle_peer_frame(std::size_t from, const Frame &f);

  /// Client requests; returns the replies to send back on the same session.
  std::vector<Frame> handle_client_frame(broker::SessionId session, const Frame &f);

  /// Decides whether a connection that sent `hello` may peer with us. Returns
  /// the peer's validator index, or the Error frame to send back.
  std::variant<std::size_t, ErrorMsg> accept_hello(const QueryHeightMsg &hello) const;
  QueryHeightMsg hello() const;

  void add_commit_listener(CommitListener fn) { listeners_.push_back(std::move(fn)); }

  std::size_t index() const { return index_; }
  const std::string &chain_id() const { return cfg_.genesis.chain_id; }
  const crypto::KeyPair &key() const { return cfg_.key; }
  ledger::LedgerStore &ledger() { return ledger_; }
  const ledger::LedgerStore &ledger() const { return ledger_; }
  contract::ContractRegistry &registry() { return registry_; }
  consensus::ConsensusEngine &consensus() { return engine_; }
  const consensus::ConsensusEngine &consensus() const { return engine_; }
  broker::Broker &broker() { return broker_; }
  const NodeStats &stats() const { return stats_; }
  bool refused(std::size_t peer) const { return refused_.contains(peer); }

 private:
  std::int64_t now_ms() override;
  void broadcast_proposal(const consensus::Proposal &p) override;
  void broadcast_vote(const consensus::Vote &v) override;
  void gossip_transaction(const ledger::Transaction &tx) override;
  void schedule_timeout(std::int64_t delay_ms, const consensus::Timeout &t) override;
  void block_committed(const ledger::Block &b) override;
  void request_block(std::size_t peer, std::int64_t height) override;
  void send_status(std::size_t peer, std::int64_t committed_height) override;

  std::optional<Frame> answer_query_block(std::int64_t height) const;

  NodeConfig cfg_;
  Transport &transport_;
  std::size_t index_ = 0;
  ledger::LedgerStore ledger_;
  contract::ContractRegistry registry_;
  consensus::ConsensusEngine engine_;
  broker::Broker broker_;
  std::set<std::size_t> refused_;
  std::vector<CommitListener> listeners_;
  NodeStats stats_;
};

}  // namespace ledgerbus::net
