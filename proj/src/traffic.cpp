/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/traffic.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ledgerbus::net {

TrafficMeter::TrafficMeter(std::size_t nodes) {
  counters_.reserve(nodes);
  for (std::size_t i = 0; i < nodes; ++i) counters_.push_back(std::make_unique<Counters>());
}

TrafficMeter::Counters &TrafficMeter::at(std::size_t node) {
  if (node >= counters_.size()) throw std::out_of_range("traffic meter node index");
  return *counters_[node];
}

const TrafficMeter::Counters &TrafficMeter::at(std::size_t node) const {
  if (node >= counters_.size()) throw std::out_of_range("traffic meter node index");
  return *counters_[node];
}

void TrafficMeter::record_sent(std::size_t node, const Frame &f) {
  auto &c = at(node);
  c.bytes_sent += f.wire_size();
  c.frames_sent += 1;
  c.by_type[static_cast<std::uint8_t>(f.type)] += 1;
}

void TrafficMeter::record_received(std::size_t node, const Frame &f) {
  auto &c = at(node);
  c.bytes_received += f.wire_size();
  c.frames_received += 1;
}

void TrafficMeter::record_block(std::size_t node) { at(node).blocks += 1; }

NodeTraffic TrafficMeter::snapshot(std::size_t node) const {
  const auto &c = at(node);
  NodeTraffic t;
  t.bytes_sent = c.bytes_sent;
  t.bytes_received = c.bytes_received;
  t.frames_sent = c.frames_sent;
  t.frames_received = c.frames_received;
  t.blocks_committed = c.blocks;
  for (std::size_t i = 0; i < t.sent_by_type.size(); ++i) t.sent_by_type[i] = c.by_type[i];
  return t;
}

std::uint64_t TrafficMeter::total_bytes_sent() const {
  std::uint64_t total = 0;
  for (const auto &c : counters_) total += c->bytes_sent;
  return total;
}

void TrafficMeter::sample(double t_seconds) {
  std::lock_guard lock(samples_mu_);
  for (std::size_t i = 0; i < counters_.size(); ++i) {
    const auto &c = *counters_[i];
    samples_.push_back({t_seconds, i, c.bytes_sent, c.bytes_received, c.blocks});
  }
}

std::vector<TrafficSample> TrafficMeter::samples() const {
  std::lock_guard lock(samples_mu_);
  return samples_;
}

void TrafficMeter::write_csv(const std::filesystem::path &path) const {
  write_traffic_csv(path, samples());
}

namespace {
constexpr std::string_view kTrafficHeader =
    "t_seconds,node_id,bytes_sent,bytes_received,blocks_committed";
}

void write_traffic_csv(const std::filesystem::path &path,
                       const std::vector<TrafficSample> &samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kTrafficHeader << '\n';
  for (const auto &s : samples) {
    out << s.t_seconds << ',' << s.node_id << ',' << s.bytes_sent << ',' << s.bytes_received
        << ',' << s.blocks_committed << '\n';
  }
}

std::vector<TrafficSample> read_traffic_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTrafficHeader) {
    throw std::runtime_error(path.string() + ": missing traffic CSV header");
  }
  std::vector<TrafficSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    TrafficSample s;
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(ss >> s.t_seconds >> c1 >> s.node_id >> c2 >> s.bytes_sent >> c3 >> s.bytes_received >>
          c4 >> s.blocks_committed) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || !(ss >> std::ws).eof()) {
      throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace ledgerbus::net
