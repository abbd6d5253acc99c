/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <gtest/gtest.h>

#include "ledgerbus/cluster.hpp"
#include "ledgerbus/tcp.hpp"

namespace ledgerbus::net {
namespace {

using namespace std::chrono_literals;

constexpr std::uint16_t kBasePort = 28640;

template <typename Pred>
bool wait_for(Pred pred, std::chrono::milliseconds limit = 20s) {
  const auto deadline = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(20ms);
  }
  return pred();
}

struct TcpCluster {
  std::vector<std::unique_ptr<TcpNode>> nodes;

  TcpCluster(std::size_t n, std::uint16_t base, const std::string &chain_id = "tcp-unit") {
    auto genesis = harness::make_genesis(chain_id, n);
    for (std::size_t i = 0; i < n; ++i) {
      NodeConfig nc;
      nc.genesis = genesis;
      nc.key = harness::validator_key(chain_id, i);
      std::vector<Endpoint> peers;
      for (std::size_t j = i + 1; j < n; ++j) {
        peers.push_back({"127.0.0.1", static_cast<std::uint16_t>(base + j)});
      }
      nodes.push_back(std::make_unique<TcpNode>(
          std::move(nc), Endpoint{"127.0.0.1", static_cast<std::uint16_t>(base + i)}, peers));
    }
    for (auto &node : nodes) node->start();
  }
  ~TcpCluster() {
    for (auto &node : nodes) node->stop();
  }
};

TEST(Endpoint, Parse) {
  auto e = parse_endpoint("10.0.0.2:9000");
  EXPECT_EQ(e.host, "10.0.0.2");
  EXPECT_EQ(e.port, 9000);
  EXPECT_EQ(parse_endpoint(":81").host, "127.0.0.1");
  EXPECT_ANY_THROW(parse_endpoint("nohost"));
  EXPECT_ANY_THROW(parse_endpoint("h:notaport"));
}

TEST(Tcp, PublishSubscribeAndQuery) {
  TcpCluster c(4, kBasePort);
  ASSERT_TRUE(wait_for([&] {
    for (auto &n : c.nodes) {
      if (n->connected_peers() < 3) return false;
    }
    return true;
  }));

  const Endpoint e0{"127.0.0.1", kBasePort}, e2{"127.0.0.1", kBasePort + 2};
  std::mutex mu;
  std::vector<broker::Delivery> got;
  TcpClient sub(e2, [&](const broker::Delivery &d) {
    std::lock_guard lock(mu);
    got.push_back(d);
  });
  sub.subscribe("supply/+/temperature_verified");
  sub.subscribe("supply/+/temperature_rejected");

  TcpClient pub(e0);
  auto contract = harness::cold_chain_contract();
  auto ack = pub.publish("Contract", {{"document", contract::encode_contract(contract)}});
  EXPECT_EQ(ack.path, "contract_submitted");
  ASSERT_TRUE(wait_for([&] {
    return c.nodes[2]->call([&](Node &n) { return n.registry().contains(contract.contract_id); });
  }));

  auto data = pub.publish("supply/truck1/temperature",
                          {{"temperature", std::int64_t{3}}, {"humidity", std::int64_t{20}}});
  EXPECT_EQ(data.path, "submitted");
  ASSERT_TRUE(data.tx_id);
  ASSERT_TRUE(wait_for([&] {
    std::lock_guard lock(mu);
    return !got.empty();
  }));
  {
    std::lock_guard lock(mu);
    EXPECT_EQ(got[0].topic, "supply/truck1/temperature_verified");
    ASSERT_TRUE(got[0].provenance);
    EXPECT_EQ(got[0].provenance->tx_id, *data.tx_id);
  }

  // Loopback on an unbound topic reaches subscribers on the same node only.
  std::atomic<int> loop{0};
  TcpClient local(e0, [&](const broker::Delivery &) { ++loop; });
  local.subscribe("lab/#");
  EXPECT_EQ(pub.publish("lab/bench/t", {{"v", std::int64_t{1}}}).path, "loopback");
  EXPECT_TRUE(wait_for([&] { return loop.load() == 1; }));

  const auto height = pub.query_height();
  EXPECT_GE(height, 2);
  auto block = pub.query_block(height);
  EXPECT_EQ(block.header.height, height);
  try {
    pub.query_block(height + 100);
    FAIL();
  } catch (const ClientError &e) {
    EXPECT_EQ(e.error().code, kErrHeightOutOfRange);
  }
  try {
    pub.publish("bad/+", {});
    FAIL();
  } catch (const ClientError &e) {
    EXPECT_EQ(e.error().code, "BadTopic");
  }

  // All nodes hold the same chain.
  ASSERT_TRUE(wait_for([&] {
    for (auto &n : c.nodes) {
      if (n->call([](Node &x) { return x.ledger().current_height(); }) < height) return false;
    }
    return true;
  }));
  auto h0 = c.nodes[0]->call([&](Node &n) { return n.ledger().block_hash_at(height); });
  for (auto &n : c.nodes) {
    EXPECT_EQ(n->call([&](Node &x) { return x.ledger().block_hash_at(height); }), h0);
  }
  EXPECT_GT(c.nodes[0]->meter().total_bytes_sent(), 0u);
}

TEST(Tcp, ChainIdMismatchIsRefused) {
  const std::uint16_t base = kBasePort + 10;
  auto genesis = harness::make_genesis("chain-one", 2);
  NodeConfig a;
  a.genesis = genesis;
  a.key = harness::validator_key("chain-one", 0);
  // Same validator keys, different chain id.
  NodeConfig b;
  b.genesis = genesis;
  b.genesis.chain_id = "chain-two";
  b.key = harness::validator_key("chain-one", 1);
  TcpNode na(std::move(a), {"127.0.0.1", base}, {{"127.0.0.1", static_cast<std::uint16_t>(base + 1)}});
  TcpNode nb(std::move(b), {"127.0.0.1", static_cast<std::uint16_t>(base + 1)}, {});
  na.start();
  nb.start();
  ASSERT_TRUE(wait_for([&] { return na.refused_dials() == 1; }, 10s));
  std::this_thread::sleep_for(500ms);
  EXPECT_EQ(na.connected_peers(), 0u);
  EXPECT_EQ(nb.connected_peers(), 0u);
  na.stop();
  nb.stop();
}

}  // namespace
}  // namespace ledgerbus::net
