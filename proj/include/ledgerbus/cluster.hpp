/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ledgerbus/contract.hpp"
#include "ledgerbus/node.hpp"
#include "ledgerbus/sim_network.hpp"

namespace ledgerbus::harness {

/// Deterministic validator key for `chain_id`.
crypto::KeyPair validator_key(std::string_view chain_id, std::size_t index);

ledger::GenesisConfig make_genesis(std::string_view chain_id, std::size_t validators,
                                   std::int64_t genesis_time = 0);

/// The cold-chain contract used by experiments and tests: binds
/// "supply/+/temperature" with temperature in [0, 8] and humidity <= 60,
/// signed by two stakeholders with keys derived from fixed labels.
contract::SmartContract cold_chain_contract();

struct ClusterConfig {
  std::size_t nodes = 4;
  std::string chain_id = "ledgerbus-sim";
  net::SimNetConfig net;
  consensus::ConsensusConfig consensus;
  /// Per-node replacements for `consensus`, e.g. to inject a faulty proposer.
  std::map<std::size_t, consensus::ConsensusConfig> node_consensus;
  /// With a data directory each node keeps a ledger log there and replays it
  /// on restart; without one a restarted node starts empty and syncs.
  std::optional<std::filesystem::path> data_dir;
};

/// N validators on a simulated network, all in one thread.
class SimCluster {
 public:
  explicit SimCluster(ClusterConfig cfg);
  ~SimCluster();

  void start();
  std::size_t size() const { return nodes_.size(); }
  net::SimNetwork &net() { return net_; }
  const ledger::GenesisConfig &genesis() const { return genesis_; }
  const crypto::KeyPair &key(std::size_t i) const { return keys_.at(i); }

  bool is_up(std::size_t i) const { return nodes_.at(i) != nullptr; }
  net::Node &node(std::size_t i);
  std::vector<std::size_t> live_nodes() const;

  void crash(std::size_t i);
  void restart(std::size_t i);

  /// Called for every block a node commits, including after restarts.
  using CommitObserver = std::function<void(std::size_t node, const ledger::Block &)>;
  void on_commit(CommitObserver fn) { observers_.push_back(std::move(fn)); }

  /// Minimum committed height over live nodes.
  std::int64_t min_height() const;
  std::int64_t max_height() const;
  /// True when all live nodes hold the same block hashes up to the lowest
  /// common height.
  bool consistent() const;

 private:
  std::unique_ptr<net::Node> make_node(std::size_t i);

  ClusterConfig cfg_;
  ledger::GenesisConfig genesis_;
  std::vector<crypto::KeyPair> keys_;
  net::SimNetwork net_;
  std::vector<std::unique_ptr<net::Node>> nodes_;
  std::vector<CommitObserver> observers_;
};

}  // namespace ledgerbus::harness
