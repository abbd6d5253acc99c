/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ledgerbus/cluster.hpp"
#include "ledgerbus/traffic.hpp"

namespace ledgerbus::harness {

enum class TransportKind { Sim, Tcp };
std::string_view to_string(TransportKind t);

struct ExperimentConfig {
  std::size_t node_count = 4;
  double tps = 5;
  std::size_t total_messages = 200;
  TransportKind transport = TransportKind::Sim;
  std::uint64_t seed = 1;
  double latency_min_ms = 10;
  double latency_max_ms = 10;
  std::int64_t processing_us = 250;
  /// Contract document file; the built-in cold-chain contract when unset.
  std::optional<std::filesystem::path> contract_fixture;
  /// Directory for delays.csv and traffic.csv; nothing written when unset.
  std::optional<std::filesystem::path> out_dir;
  /// How long to wait for stragglers after the last publish.
  std::int64_t drain_timeout_ms = 60000;
  /// First TCP port for Tcp runs; node i listens on base_port + i.
  std::uint16_t base_port = 27400;
};

enum class DeliveryPath { Loopback, Committed };
std::string_view to_string(DeliveryPath p);

struct DelayRecord {
  std::size_t nodes = 0;
  double tps = 0;
  std::string tx_id;
  std::int64_t publish_ts = 0;
  std::int64_t deliver_ts = 0;
  DeliveryPath path = DeliveryPath::Loopback;
  std::size_t broker = 0;

  std::int64_t delay_ms() const { return deliver_ts - publish_ts; }
  bool operator==(const DelayRecord &) const = default;
};

struct ExperimentResult {
  std::vector<DelayRecord> records;
  std::vector<net::TrafficSample> traffic;
  std::uint64_t blocks = 0;
  std::uint64_t total_bytes = 0;
  std::size_t committed = 0;
  std::size_t loopback = 0;
};

/// Raised when a published message never reaches its subscribers.
class ExperimentAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Registers the contract, publishes `total_messages` contract-bound messages
/// (plus one unbound message each) to node 0 at `tps`, and records delivery
/// delays for `_verified` / `_rejected` subscribers on node 0 and node 1.
ExperimentResult run_experiment(const ExperimentConfig &cfg);

void write_delays_csv(const std::filesystem::path &path, const std::vector<DelayRecord> &records);
std::vector<DelayRecord> read_delays_csv(const std::filesystem::path &path);

struct SummaryRow {
  std::size_t nodes = 0;
  double tps = 0;
  DeliveryPath path = DeliveryPath::Loopback;
  std::size_t count = 0;
  double mean_ms = 0;
  double p50_ms = 0;
  double p95_ms = 0;
};

/// Per (nodes, tps, path) statistics. Percentiles use the nearest-rank rule.
/// Throws std::runtime_error on an empty record set.
std::vector<SummaryRow> summarize(const std::vector<DelayRecord> &records);
std::string format_summary(const std::vector<SummaryRow> &rows, std::uint64_t total_bytes,
                           std::uint64_t blocks);

/// Nearest-rank percentile of an unsorted sample, 0 < p <= 100.
double percentile(std::vector<double> values, double p);

}  // namespace ledgerbus::harness
