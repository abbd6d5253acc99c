/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <vector>

#include "ledgerbus/frame.hpp"

namespace ledgerbus::net {

struct NodeTraffic {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t blocks_committed = 0;
  std::array<std::uint64_t, 256> sent_by_type{};
};

struct TrafficSample {
  double t_seconds = 0;
  std::size_t node_id = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t blocks_committed = 0;
};

/// Per-node byte and frame counters. Safe to update from transport threads.
class TrafficMeter {
 public:
  explicit TrafficMeter(std::size_t nodes);

  std::size_t nodes() const { return counters_.size(); }
  void record_sent(std::size_t node, const Frame &f);
  void record_received(std::size_t node, const Frame &f);
  void record_block(std::size_t node);

  NodeTraffic snapshot(std::size_t node) const;
  std::uint64_t total_bytes_sent() const;

  /// Appends one row per node with the current counter values.
  void sample(double t_seconds);
  std::vector<TrafficSample> samples() const;
  /// Columns: t_seconds,node_id,bytes_sent,bytes_received,blocks_committed.
  void write_csv(const std::filesystem::path &path) const;

 private:
  struct Counters {
    std::atomic<std::uint64_t> bytes_sent{0};
    std::atomic<std::uint64_t> bytes_received{0};
    std::atomic<std::uint64_t> frames_sent{0};
    std::atomic<std::uint64_t> frames_received{0};
    std::atomic<std::uint64_t> blocks{0};
    std::array<std::atomic<std::uint64_t>, 256> by_type{};
  };

  Counters &at(std::size_t node);
  const Counters &at(std::size_t node) const;

  std::vector<std::unique_ptr<Counters>> counters_;
  mutable std::mutex samples_mu_;
  std::vector<TrafficSample> samples_;
};

void write_traffic_csv(const std::filesystem::path &path,
                       const std::vector<TrafficSample> &samples);
std::vector<TrafficSample> read_traffic_csv(const std::filesystem::path &path);

}  // namespace ledgerbus::net
