/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/cluster.hpp"

#include <algorithm>
#include <limits>

namespace ledgerbus::harness {

crypto::KeyPair validator_key(std::string_view chain_id, std::size_t index) {
  return crypto::keypair_from_label(std::string(chain_id) + "/validator/" + std::to_string(index));
}

ledger::GenesisConfig make_genesis(std::string_view chain_id, std::size_t validators,
                                   std::int64_t genesis_time) {
  std::vector<crypto::Validator> vs;
  for (std::size_t i = 0; i < validators; ++i) {
    vs.push_back({validator_key(chain_id, i).public_key, "validator-" + std::to_string(i)});
  }
  ledger::GenesisConfig g;
  g.chain_id = std::string(chain_id);
  g.validators = crypto::ValidatorSet(std::move(vs));
  g.genesis_time = genesis_time;
  return g;
}

contract::SmartContract cold_chain_contract() {
  auto shipper = crypto::keypair_from_label("cold-chain/shipper");
  auto carrier = crypto::keypair_from_label("cold-chain/carrier");
  auto c = contract::make_contract(
      {{"shipper", shipper.public_key}, {"carrier", carrier.public_key}},
      {contract::TopicFilter::parse("supply/+/temperature")},
      {{"temperature", contract::CompareOp::InRange,
        contract::Range{ledger::Scalar{std::int64_t{0}}, ledger::Scalar{std::int64_t{8}}}},
       {"humidity", contract::CompareOp::LE, ledger::Scalar{std::int64_t{60}}}});
  contract::sign_contract(c, shipper);
  contract::sign_contract(c, carrier);
  return c;
}

SimCluster::SimCluster(ClusterConfig cfg)
    : cfg_(std::move(cfg)),
      genesis_(make_genesis(cfg_.chain_id, cfg_.nodes)),
      net_(cfg_.net, cfg_.nodes) {
  for (std::size_t i = 0; i < cfg_.nodes; ++i) keys_.push_back(validator_key(cfg_.chain_id, i));
  nodes_.resize(cfg_.nodes);
  if (cfg_.data_dir) std::filesystem::create_directories(*cfg_.data_dir);
}

SimCluster::~SimCluster() = default;

std::unique_ptr<net::Node> SimCluster::make_node(std::size_t i) {
  net::NodeConfig nc;
  nc.genesis = genesis_;
  nc.key = keys_[i];
  auto it = cfg_.node_consensus.find(i);
  nc.consensus = it == cfg_.node_consensus.end() ? cfg_.consensus : it->second;
  if (cfg_.data_dir) nc.ledger_path = *cfg_.data_dir / ("node" + std::to_string(i) + ".log");
  auto node = std::make_unique<net::Node>(std::move(nc), net_.endpoint(i));
  node->add_commit_listener([this, i](const ledger::Block &b) {
    net_.meter().record_block(i);
    for (const auto &fn : observers_) fn(i, b);
  });
  net::Node *raw = node.get();
  net_.set_handler(i, [raw](std::size_t from, const net::Frame &f) {
    raw->handle_peer_frame(from, f);
  });
  return node;
}

void SimCluster::start() {
  for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i] = make_node(i);
  for (auto &n : nodes_) n->start();
}

net::Node &SimCluster::node(std::size_t i) {
  if (!nodes_.at(i)) throw std::logic_error("node " + std::to_string(i) + " is down");
  return *nodes_[i];
}

std::vector<std::size_t> SimCluster::live_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i]) out.push_back(i);
  }
  return out;
}

void SimCluster::crash(std::size_t i) {
  net_.crash(i);
  nodes_.at(i).reset();
}

void SimCluster::restart(std::size_t i) {
  if (nodes_.at(i)) return;
  net_.restart(i);
  nodes_[i] = make_node(i);
  nodes_[i]->start();
}

std::int64_t SimCluster::min_height() const {
  std::int64_t h = std::numeric_limits<std::int64_t>::max();
  for (const auto &n : nodes_) {
    if (n) h = std::min(h, n->ledger().current_height());
  }
  return h == std::numeric_limits<std::int64_t>::max() ? -1 : h;
}

std::int64_t SimCluster::max_height() const {
  std::int64_t h = -1;
  for (const auto &n : nodes_) {
    if (n) h = std::max(h, n->ledger().current_height());
  }
  return h;
}

bool SimCluster::consistent() const {
  const auto common = min_height();
  const net::Node *ref = nullptr;
  for (const auto &n : nodes_) {
    if (!n) continue;
    if (!ref) {
      ref = n.get();
      continue;
    }
    for (std::int64_t h = 0; h <= common; ++h) {
      if (n->ledger().block_hash_at(h) != ref->ledger().block_hash_at(h)) return false;
    }
  }
  return true;
}

}  // namespace ledgerbus::harness
