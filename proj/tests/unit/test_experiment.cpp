/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "ledgerbus/experiment.hpp"
#include "ledgerbus/traffic.hpp"

namespace ledgerbus::harness {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string &name) {
  auto p = fs::temp_directory_path() / ("ledgerbus-unit-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

DelayRecord rec(std::int64_t delay, DeliveryPath path, std::size_t nodes = 4) {
  return {nodes, 5, "t", 100, 100 + delay, path, 0};
}

TEST(Percentile, NearestRank) {
  std::vector<double> v = {15, 20, 35, 40, 50};
  EXPECT_EQ(percentile(v, 5), 15);
  EXPECT_EQ(percentile(v, 30), 20);
  EXPECT_EQ(percentile(v, 40), 20);
  EXPECT_EQ(percentile(v, 50), 35);
  EXPECT_EQ(percentile(v, 100), 50);
  EXPECT_ANY_THROW(percentile({}, 50));
  EXPECT_ANY_THROW(percentile(v, 0));
}

TEST(Summarize, HandComputedRows) {
  std::vector<DelayRecord> rs;
  // Committed delays 1..20 ms: mean 10.5, p50 rank 10 -> 10, p95 rank 19 -> 19.
  for (int d = 20; d >= 1; --d) rs.push_back(rec(d, DeliveryPath::Committed));
  rs.push_back(rec(0, DeliveryPath::Loopback));
  rs.push_back(rec(2, DeliveryPath::Loopback));
  rs.push_back(rec(7, DeliveryPath::Committed, 7));
  auto rows = summarize(rs);
  ASSERT_EQ(rows.size(), 3u);
  const auto &committed = *std::find_if(rows.begin(), rows.end(), [](const auto &r) {
    return r.nodes == 4 && r.path == DeliveryPath::Committed;
  });
  EXPECT_EQ(committed.count, 20u);
  EXPECT_DOUBLE_EQ(committed.mean_ms, 10.5);
  EXPECT_DOUBLE_EQ(committed.p50_ms, 10);
  EXPECT_DOUBLE_EQ(committed.p95_ms, 19);
  const auto &loop = *std::find_if(rows.begin(), rows.end(),
                                   [](const auto &r) { return r.path == DeliveryPath::Loopback; });
  EXPECT_DOUBLE_EQ(loop.mean_ms, 1);
  EXPECT_DOUBLE_EQ(loop.p50_ms, 0);
  EXPECT_THROW(summarize({}), std::runtime_error);
  EXPECT_NE(format_summary(rows, 1234, 9).find("1234"), std::string::npos);
}

TEST(DelaysCsv, RoundTripAndErrors) {
  auto dir = temp_dir("csv");
  std::vector<DelayRecord> rs = {rec(5, DeliveryPath::Committed), rec(0, DeliveryPath::Loopback)};
  rs[0].tx_id = "ab12";
  rs[1].broker = 1;
  write_delays_csv(dir / "delays.csv", rs);
  EXPECT_EQ(read_delays_csv(dir / "delays.csv"), rs);

  {
    std::ofstream(dir / "empty.csv") << "";
  }
  EXPECT_ANY_THROW(read_delays_csv(dir / "empty.csv"));
  {
    std::ofstream(dir / "header.csv") << "nodes,tps,tx_id,publish_ts,deliver_ts,path,broker\n";
  }
  EXPECT_THROW(summarize(read_delays_csv(dir / "header.csv")), std::runtime_error);
  {
    std::ofstream(dir / "bad.csv") << "nodes,tps,tx_id,publish_ts,deliver_ts,path,broker\n"
                                   << "4,5,x,1,2,sideways,0\n";
  }
  EXPECT_ANY_THROW(read_delays_csv(dir / "bad.csv"));
  EXPECT_ANY_THROW(read_delays_csv(dir / "missing.csv"));
  fs::remove_all(dir);
}

TEST(TrafficCsv, RoundTrip) {
  auto dir = temp_dir("traffic");
  net::TrafficMeter meter(2);
  const net::Frame hundred{net::FrameType::Ack, std::string(95, 'x')};
  const net::Frame fifty{net::FrameType::Ack, std::string(45, 'x')};
  meter.record_sent(0, hundred);
  meter.record_received(1, hundred);
  meter.record_block(1);
  meter.sample(1.0);
  meter.record_sent(1, fifty);
  meter.sample(2.0);
  ASSERT_EQ(meter.samples().size(), 4u);
  EXPECT_EQ(meter.total_bytes_sent(), 150u);
  meter.write_csv(dir / "traffic.csv");
  auto back = net::read_traffic_csv(dir / "traffic.csv");
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back[3].node_id, 1u);
  EXPECT_EQ(back[3].bytes_sent, 50u);
  EXPECT_EQ(back[3].blocks_committed, 1u);
  fs::remove_all(dir);
}

TEST(Experiment, SmallSimRunWritesOutputs) {
  auto dir = temp_dir("experiment");
  ExperimentConfig cfg;
  cfg.total_messages = 20;
  cfg.tps = 10;
  cfg.out_dir = dir;
  auto r = run_experiment(cfg);
  // Committed messages are recorded at two brokers, loopback ones once.
  EXPECT_EQ(r.committed, 20u);
  EXPECT_EQ(r.loopback, 20u);
  EXPECT_EQ(r.records.size(), 60u);
  EXPECT_GT(r.blocks, 0u);
  EXPECT_GT(r.total_bytes, 0u);
  for (const auto &d : r.records) EXPECT_GE(d.delay_ms(), 0);
  EXPECT_EQ(read_delays_csv(dir / "delays.csv"), r.records);
  EXPECT_FALSE(net::read_traffic_csv(dir / "traffic.csv").empty());

  // Same seed, same records.
  cfg.out_dir.reset();
  EXPECT_EQ(run_experiment(cfg).records, r.records);
  fs::remove_all(dir);
}

TEST(Experiment, ContractFixtureIsUsed) {
  ExperimentConfig cfg;
  cfg.total_messages = 5;
  cfg.contract_fixture = LEDGERBUS_FIXTURE_DIR "/cold_chain_contract.json";
  EXPECT_EQ(run_experiment(cfg).committed, 5u);
  cfg.contract_fixture = "/nonexistent/contract.json";
  EXPECT_ANY_THROW(run_experiment(cfg));
}

TEST(Experiment, TcpRunDeliversEverything) {
  ExperimentConfig cfg;
  cfg.transport = TransportKind::Tcp;
  cfg.total_messages = 10;
  cfg.tps = 20;
  cfg.base_port = 28700;
  auto r = run_experiment(cfg);
  EXPECT_EQ(r.committed, 10u);
  EXPECT_EQ(r.loopback, 10u);
  EXPECT_EQ(r.records.size(), 30u);
}

}  // namespace
}  // namespace ledgerbus::harness
