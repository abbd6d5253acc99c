/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/sim_network.hpp"

#include <cmath>
#include <stdexcept>

namespace ledgerbus::net {

class SimNetwork::Endpoint : public Transport {
 public:
  Endpoint(SimNetwork &net, std::size_t id) : net_(net), id_(id) {}

  std::int64_t now_us() const override { return net_.now_us(); }
  void send(std::size_t peer, const Frame &f) override { net_.send(id_, peer, f); }
  void broadcast(const Frame &f) override {
    for (std::size_t p = 0; p < net_.size(); ++p) {
      if (p != id_) net_.send(id_, p, f);
    }
  }
  void schedule(std::int64_t delay_us, std::function<void()> fn) override {
    net_.schedule_timer(id_, delay_us, std::move(fn));
  }

 private:
  SimNetwork &net_;
  std::size_t id_;
};

SimNetwork::SimNetwork(SimNetConfig cfg, std::size_t nodes)
    : cfg_(std::move(cfg)), rng_(cfg_.seed), nodes_(nodes), meter_(nodes) {
  if (cfg_.latency_min_ms < 0 || cfg_.latency_max_ms < cfg_.latency_min_ms) {
    throw std::invalid_argument("latency range must satisfy 0 <= min <= max");
  }
  for (std::size_t i = 0; i < nodes; ++i) endpoints_.push_back(std::make_unique<Endpoint>(*this, i));
}

SimNetwork::~SimNetwork() = default;

Transport &SimNetwork::endpoint(std::size_t node) { return *endpoints_.at(node); }

void SimNetwork::set_handler(std::size_t node, FrameHandler h) {
  nodes_.at(node).handler = std::move(h);
}

void SimNetwork::crash(std::size_t node) {
  auto &s = nodes_.at(node);
  s.up = false;
  ++s.epoch;
  s.handler = nullptr;
}

void SimNetwork::restart(std::size_t node) {
  auto &s = nodes_.at(node);
  s.up = true;
  ++s.epoch;
  s.busy_until_us = now_us_;
}

bool SimNetwork::is_up(std::size_t node) const { return nodes_.at(node).up; }

void SimNetwork::push(std::int64_t t_us, std::function<void()> fn) {
  queue_.push({t_us, seq_++, std::move(fn)});
}

void SimNetwork::at(std::int64_t t_us, std::function<void()> fn) {
  push(std::max(t_us, now_us_), [this, fn = std::move(fn)] {
    record(TraceEntry::Kind::Action, 0, 0, nullptr);
    fn();
  });
}

bool SimNetwork::partitioned(std::size_t a, std::size_t b) const {
  const std::int64_t now_ms = now_us_ / 1000;
  for (const auto &p : cfg_.partitions) {
    if (now_ms < p.start_ms || now_ms >= p.end_ms) continue;
    if (p.side.contains(a) != p.side.contains(b)) return true;
  }
  return false;
}

void SimNetwork::record(TraceEntry::Kind kind, std::size_t from, std::size_t to, const Frame *f) {
  if (!trace_on_) return;
  TraceEntry e;
  e.kind = kind;
  e.t_us = now_us_;
  e.from = from;
  e.to = to;
  if (f) {
    e.type = f->type;
    e.bytes = f->wire_size();
  }
  trace_.push_back(e);
}

void SimNetwork::send(std::size_t from, std::size_t to, const Frame &f) {
  if (to >= nodes_.size() || from >= nodes_.size() || to == from) return;
  if (!nodes_[from].up) return;
  meter_.record_sent(from, f);

  // Draw both numbers on every send so the stream does not depend on which
  // messages happen to be dropped.
  std::uniform_real_distribution<double> latency(cfg_.latency_min_ms, cfg_.latency_max_ms);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double lat_ms = latency(rng_);
  const bool lost = coin(rng_) < cfg_.drop_probability;

  if (lost || partitioned(from, to)) {
    record(TraceEntry::Kind::Drop, from, to, &f);
    return;
  }
  record(TraceEntry::Kind::Send, from, to, &f);
  const auto arrive = now_us_ + static_cast<std::int64_t>(std::llround(lat_ms * 1000.0));
  push(arrive, [this, from, to, f] {
    auto &dst = nodes_[to];
    if (!dst.up) return;
    const std::uint64_t epoch = dst.epoch;
    dst.busy_until_us = std::max(dst.busy_until_us, now_us_) + cfg_.processing_us;
    push(dst.busy_until_us, [this, from, to, f, epoch] {
      auto &node = nodes_[to];
      if (!node.up || node.epoch != epoch || !node.handler) return;
      meter_.record_received(to, f);
      record(TraceEntry::Kind::Receive, from, to, &f);
      node.handler(from, f);
    });
  });
}

void SimNetwork::schedule_timer(std::size_t node, std::int64_t delay_us,
                                std::function<void()> fn) {
  const std::uint64_t epoch = nodes_.at(node).epoch;
  push(now_us_ + std::max<std::int64_t>(delay_us, 0), [this, node, epoch, fn = std::move(fn)] {
    const auto &s = nodes_[node];
    if (!s.up || s.epoch != epoch) return;
    record(TraceEntry::Kind::Timer, node, node, nullptr);
    fn();
  });
}

bool SimNetwork::step() {
  if (queue_.empty()) return false;
  // Move out before popping: the handler may push new events.
  Event e = std::move(const_cast<Event &>(queue_.top()));
  queue_.pop();
  now_us_ = std::max(now_us_, e.t_us);
  e.fn();
  return true;
}

void SimNetwork::run_until(std::int64_t t_us) {
  while (!queue_.empty() && queue_.top().t_us <= t_us) step();
  now_us_ = std::max(now_us_, t_us);
}

bool SimNetwork::run_until(const std::function<bool()> &done, std::int64_t deadline_us) {
  while (!done()) {
    if (queue_.empty() || queue_.top().t_us > deadline_us) {
      now_us_ = std::max(now_us_, deadline_us);
      return done();
    }
    step();
  }
  return true;
}

}  // namespace ledgerbus::net
