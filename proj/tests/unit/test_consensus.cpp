/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <filesystem>

#include <gtest/gtest.h>

#include "ledgerbus/cluster.hpp"
#include "ledgerbus/consensus.hpp"
#include "test_support.hpp"

namespace ledgerbus {
namespace {

using harness::ClusterConfig;
using harness::SimCluster;

constexpr std::int64_t kSecond = 1'000'000;

// Submits an unbound transaction signed by a test key straight to a node.
Hash256 submit(SimCluster &c, std::size_t node, std::int64_t seq) {
  auto kp = crypto::keypair_from_label("unit/consensus");
  auto tx = ledger::make_transaction("lab/seq", {{"seq", seq}}, seq, std::nullopt, kp);
  EXPECT_EQ(c.node(node).consensus().submit_transaction(tx), consensus::SubmitResult::Accepted);
  return tx.tx_id;
}

bool everywhere(SimCluster &c, const std::vector<Hash256> &ids) {
  for (auto i : c.live_nodes()) {
    for (const auto &id : ids) {
      if (!c.node(i).ledger().contains_tx(id)) return false;
    }
  }
  return true;
}

TEST(Consensus, TimeoutsGrowPerRound) {
  consensus::ConsensusConfig cfg;
  using consensus::TimeoutKind;
  EXPECT_EQ(consensus::timeout_ms(cfg, TimeoutKind::Propose, 0), 300);
  EXPECT_EQ(consensus::timeout_ms(cfg, TimeoutKind::Propose, 2), 500);
  EXPECT_EQ(consensus::timeout_ms(cfg, TimeoutKind::Prevote, 1), 250);
  EXPECT_EQ(consensus::timeout_ms(cfg, TimeoutKind::Precommit, 0), 150);
}

TEST(Consensus, ProposerRotates) {
  auto g = harness::make_genesis("rot", 4);
  EXPECT_EQ(consensus::proposer_index(g.validators, 1, 0), 1u);
  EXPECT_EQ(consensus::proposer_index(g.validators, 1, 3), 0u);
  EXPECT_EQ(consensus::proposer_index(g.validators, 6, 1), 3u);
}

TEST(Consensus, SignaturesCoverTheirFields) {
  auto kp = crypto::keypair_from_label("unit/voter");
  auto v = consensus::make_vote(ledger::VoteKind::Prevote, 3, 1, std::nullopt, kp);
  EXPECT_TRUE(consensus::verify_vote(v));
  v.round = 2;
  EXPECT_FALSE(consensus::verify_vote(v));

  auto chain = testing::build_chain(4, 1, 1);
  auto p = consensus::make_proposal(1, 0, -1, chain.blocks[1], kp);
  EXPECT_TRUE(consensus::verify_proposal_signature(p));
  p.pol_round = 0;
  EXPECT_FALSE(consensus::verify_proposal_signature(p));
}

TEST(Consensus, CommitsAndStaysIdle) {
  SimCluster c(ClusterConfig{});
  c.start();
  c.net().run_until(2 * kSecond);
  EXPECT_EQ(c.max_height(), 0);  // nothing to do, no empty blocks

  std::vector<Hash256> ids;
  for (int i = 0; i < 5; ++i) ids.push_back(submit(c, i % 4, i));
  ASSERT_TRUE(c.net().run_until([&] { return everywhere(c, ids); }, c.net().now_us() + 30 * kSecond));
  EXPECT_TRUE(c.consistent());
  for (auto i : c.live_nodes()) EXPECT_TRUE(ledger::verify_chain(c.node(i).ledger()).ok);

  const auto h = c.max_height();
  c.net().run_until(c.net().now_us() + 5 * kSecond);
  EXPECT_EQ(c.max_height(), h);
  EXPECT_EQ(c.min_height(), h);
}

TEST(Consensus, DuplicateAndForgedSubmissionsAreRefused) {
  SimCluster c(ClusterConfig{});
  c.start();
  auto kp = crypto::keypair_from_label("unit/dup");
  auto tx = ledger::make_transaction("lab/x", {}, 1, std::nullopt, kp);
  auto &engine = c.node(0).consensus();
  EXPECT_EQ(engine.submit_transaction(tx), consensus::SubmitResult::Accepted);
  EXPECT_EQ(engine.submit_transaction(tx), consensus::SubmitResult::DuplicateTx);
  auto forged = ledger::make_transaction("lab/y", {}, 1, std::nullopt, kp);
  forged.signature.data[3] ^= 4;
  EXPECT_EQ(engine.submit_transaction(forged), consensus::SubmitResult::BadSignature);
  ASSERT_TRUE(c.net().run_until([&] { return everywhere(c, {tx.tx_id}); }, 30 * kSecond));
  // Once committed it stays a duplicate.
  EXPECT_EQ(c.node(1).consensus().submit_transaction(tx), consensus::SubmitResult::DuplicateTx);
}

TEST(Consensus, SurvivesCrashOfOneInFour) {
  ClusterConfig cfg;
  cfg.net.seed = 21;
  SimCluster c(cfg);
  c.start();
  std::vector<Hash256> ids = {submit(c, 0, 1)};
  c.net().run_until(c.net().now_us() + kSecond);
  c.crash(2);
  for (int i = 2; i < 10; ++i) ids.push_back(submit(c, i % 2, i));
  ASSERT_TRUE(c.net().run_until([&] { return everywhere(c, ids); }, c.net().now_us() + 60 * kSecond));
  EXPECT_TRUE(c.consistent());
}

TEST(Consensus, StallsWithoutQuorumAndResumes) {
  ClusterConfig cfg;
  cfg.net.seed = 22;
  SimCluster c(cfg);
  c.start();
  c.crash(1);
  c.crash(2);
  std::vector<Hash256> ids = {submit(c, 0, 1)};
  c.net().run_until(c.net().now_us() + 10 * kSecond);
  EXPECT_EQ(c.max_height(), 0);  // two of four cannot commit
  c.restart(1);
  ASSERT_TRUE(c.net().run_until([&] { return everywhere(c, ids); }, c.net().now_us() + 60 * kSecond));
  EXPECT_TRUE(c.consistent());
}

TEST(Consensus, PartitionHealsAndMinorityCatchesUp) {
  ClusterConfig cfg;
  cfg.net.seed = 23;
  cfg.net.partitions.push_back({500, 8000, {3}});
  SimCluster c(cfg);
  c.start();
  std::vector<Hash256> ids;
  for (int i = 0; i < 6; ++i) {
    c.net().at(1'000'000 + i * 500'000, [&, i] { ids.push_back(submit(c, i % 3, i)); });
  }
  c.net().run_until(7 * kSecond);
  EXPECT_LT(c.node(3).ledger().current_height(), c.node(0).ledger().current_height());
  // Catch-up is driven by consensus traffic, so give the healed cluster some.
  c.net().at(9 * kSecond, [&] { ids.push_back(submit(c, 0, 100)); });
  ASSERT_TRUE(c.net().run_until(
      [&] { return ids.size() == 7 && everywhere(c, ids) && c.min_height() == c.max_height(); },
      60 * kSecond));
  EXPECT_TRUE(c.consistent());
  EXPECT_GT(c.node(3).consensus().stats().blocks_synced, 0u);
}

TEST(Consensus, RestartReplaysLedgerFromDisk) {
  auto dir = std::filesystem::temp_directory_path() / "ledgerbus-unit-restart";
  std::filesystem::remove_all(dir);
  ClusterConfig cfg;
  cfg.net.seed = 24;
  cfg.data_dir = dir;
  SimCluster c(cfg);
  c.start();
  std::vector<Hash256> ids;
  for (int i = 0; i < 4; ++i) ids.push_back(submit(c, 0, i));
  ASSERT_TRUE(c.net().run_until([&] { return everywhere(c, ids); }, 30 * kSecond));
  const auto h = c.node(3).ledger().current_height();
  c.crash(3);
  c.restart(3);
  // Replayed before any network traffic arrives.
  EXPECT_EQ(c.node(3).ledger().current_height(), h);
  ids.push_back(submit(c, 1, 10));
  ASSERT_TRUE(c.net().run_until([&] { return everywhere(c, ids); }, c.net().now_us() + 30 * kSecond));
  EXPECT_TRUE(c.consistent());
  std::filesystem::remove_all(dir);
}

TEST(Consensus, ForgedVerdictsAreNotCommitted) {
  // Node 1 proposes height 1 and lies about verdicts.
  ClusterConfig cfg;
  cfg.net.seed = 25;
  cfg.node_consensus[1] = cfg.consensus;
  cfg.node_consensus[1].fault = consensus::Fault::ForgeVerdicts;
  SimCluster c(cfg);
  c.start();
  auto kp = crypto::keypair_from_label("unit/forge");
  // A tx naming an unregistered contract must be Rejected.
  Hash256 fake_contract = sha256(std::string_view("no such contract"));
  auto tx = ledger::make_transaction("a/b", {{"v", std::int64_t{1}}}, 1, fake_contract, kp);
  ASSERT_EQ(c.node(0).consensus().submit_transaction(tx), consensus::SubmitResult::Accepted);
  ASSERT_TRUE(c.net().run_until([&] { return everywhere(c, {tx.tx_id}); }, 30 * kSecond));
  auto b = c.node(0).ledger().get_block(1);
  EXPECT_GE(b.commit_round, 1);
  EXPECT_EQ(b.txs.at(0).verdict, ledger::Verdict::Rejected);
  EXPECT_GT(c.node(0).consensus().stats().nil_prevotes, 0u);
}

TEST(SimNetwork, SameSeedSameTrace) {
  auto run = [](std::uint64_t seed) {
    ClusterConfig cfg;
    cfg.net.seed = seed;
    cfg.net.latency_max_ms = 50;
    cfg.net.drop_probability = 0.05;
    SimCluster c(cfg);
    c.net().set_trace(true);
    c.start();
    for (int i = 0; i < 5; ++i) submit(c, i % 4, i);
    c.net().run_until(20 * kSecond);
    return std::make_pair(c.net().trace(), c.node(0).ledger().head_hash());
  };
  auto a = run(5), b = run(5), other = run(6);
  EXPECT_FALSE(a.first.empty());
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first, other.first);
}

TEST(SimNetwork, LatencyBoundsAndDrops) {
  net::SimNetConfig cfg;
  cfg.seed = 3;
  cfg.latency_min_ms = 5;
  cfg.latency_max_ms = 9;
  cfg.drop_probability = 0.25;
  net::SimNetwork sim(cfg, 2);
  std::vector<std::int64_t> arrivals;
  sim.set_handler(1, [&](std::size_t, const net::Frame &) { arrivals.push_back(sim.now_us()); });
  for (int i = 0; i < 400; ++i) sim.send(0, 1, {net::FrameType::Ack, "x"});
  sim.run_until(kSecond);
  EXPECT_GT(arrivals.size(), 250u);
  EXPECT_LT(arrivals.size(), 350u);
  for (auto t : arrivals) {
    EXPECT_GE(t, 5000);
    EXPECT_LE(t, 9000);
  }
  EXPECT_EQ(sim.meter().snapshot(0).bytes_sent, 400u * 6);
  EXPECT_EQ(sim.meter().snapshot(1).bytes_received, arrivals.size() * 6);
}

TEST(SimNetwork, CrashedNodeLosesTimersAndFrames) {
  net::SimNetwork sim({}, 2);
  int frames = 0, timers = 0;
  sim.set_handler(1, [&](std::size_t, const net::Frame &) { ++frames; });
  sim.send(0, 1, {net::FrameType::Ack, ""});
  sim.schedule_timer(1, 1000, [&] { ++timers; });
  sim.crash(1);
  sim.run_until(kSecond);
  EXPECT_EQ(frames, 0);
  EXPECT_EQ(timers, 0);
  // A restarted node gets a fresh handler, as a new process would.
  sim.restart(1);
  sim.set_handler(1, [&](std::size_t, const net::Frame &) { ++frames; });
  sim.send(0, 1, {net::FrameType::Ack, ""});
  sim.run_until(2 * kSecond);
  EXPECT_EQ(frames, 1);
}

}  // namespace
}  // namespace ledgerbus
