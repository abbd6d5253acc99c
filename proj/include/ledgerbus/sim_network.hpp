/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "ledgerbus/node.hpp"
#include "ledgerbus/traffic.hpp"

namespace ledgerbus::net {

/// Links between `side` and the rest are cut during [start_ms, end_ms).
struct Partition {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::set<std::size_t> side;
};

struct SimNetConfig {
  std::uint64_t seed = 1;
  double latency_min_ms = 1;
  double latency_max_ms = 10;
  double drop_probability = 0;
  std::vector<Partition> partitions;
  /// Virtual CPU time a node spends on each received frame. Frames queue
  /// behind each other, so load grows with cluster size.
  std::int64_t processing_us = 0;
};

struct TraceEntry {
  enum class Kind { Send, Drop, Receive, Timer, Action } kind = Kind::Send;
  std::int64_t t_us = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  FrameType type = FrameType::Error;
  std::size_t bytes = 0;

  bool operator==(const TraceEntry &) const = default;
};

using FrameHandler = std::function<void(std::size_t from, const Frame &f)>;

/// Discrete-event network. Single-threaded; the delivery schedule is a pure
/// function of the seed and the calls made into it.
class SimNetwork {
 public:
  SimNetwork(SimNetConfig cfg, std::size_t nodes);
  ~SimNetwork();

  SimNetwork(const SimNetwork &) = delete;
  SimNetwork &operator=(const SimNetwork &) = delete;

  std::size_t size() const { return endpoints_.size(); }
  Transport &endpoint(std::size_t node);
  void set_handler(std::size_t node, FrameHandler h);

  /// A crashed node loses its queued frames and pending timers and receives
  /// nothing until restarted.
  void crash(std::size_t node);
  void restart(std::size_t node);
  bool is_up(std::size_t node) const;

  std::int64_t now_us() const { return now_us_; }
  /// Runs `fn` at absolute virtual time `t_us`.
  void at(std::int64_t t_us, std::function<void()> fn);

  /// Executes the next event. Returns false when nothing is pending.
  bool step();
  void run_until(std::int64_t t_us);
  /// Runs until `done` holds or the clock passes `deadline_us`. Returns done().
  bool run_until(const std::function<bool()> &done, std::int64_t deadline_us);
  std::size_t pending() const { return queue_.size(); }

  TrafficMeter &meter() { return meter_; }
  const TrafficMeter &meter() const { return meter_; }
  void set_trace(bool on) { trace_on_ = on; }
  const std::vector<TraceEntry> &trace() const { return trace_; }

  void send(std::size_t from, std::size_t to, const Frame &f);
  void schedule_timer(std::size_t node, std::int64_t delay_us, std::function<void()> fn);

 private:
  struct Event {
    std::int64_t t_us;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event &a, const Event &b) const {
      return a.t_us != b.t_us ? a.t_us > b.t_us : a.seq > b.seq;
    }
  };
  struct NodeState {
    bool up = true;
    std::uint64_t epoch = 0;
    std::int64_t busy_until_us = 0;
    FrameHandler handler;
  };
  class Endpoint;

  void push(std::int64_t t_us, std::function<void()> fn);
  bool partitioned(std::size_t a, std::size_t b) const;
  void record(TraceEntry::Kind kind, std::size_t from, std::size_t to, const Frame *f);

  SimNetConfig cfg_;
  std::mt19937_64 rng_;
  std::int64_t now_us_ = 0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<NodeState> nodes_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
  TrafficMeter meter_;
  bool trace_on_ = false;
  std::vector<TraceEntry> trace_;
};

}  // namespace ledgerbus::net
