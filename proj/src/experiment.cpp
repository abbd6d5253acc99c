/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "ledgerbus/tcp.hpp"

namespace ledgerbus::harness {
namespace {

constexpr std::string_view kBoundTopic = "supply/truck7/temperature";
constexpr std::string_view kLoopbackTopic = "lab/bench/temperature";
constexpr std::string_view kSeqField = "seq";
constexpr std::string_view kSentField = "sent_ms";

contract::SmartContract load_contract(const ExperimentConfig &cfg) {
  if (!cfg.contract_fixture) return cold_chain_contract();
  std::ifstream in(*cfg.contract_fixture);
  if (!in) throw std::runtime_error("cannot read " + cfg.contract_fixture->string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  auto c = contract::parse_contract(text);
  if (!contract::contract_binds(c, kBoundTopic)) {
    throw std::runtime_error("contract fixture does not bind " + std::string(kBoundTopic));
  }
  return c;
}

void validate(const ExperimentConfig &cfg) {
  if (!(cfg.tps > 0)) throw std::invalid_argument("tps must be positive");
  if (cfg.total_messages == 0) throw std::invalid_argument("total_messages must be positive");
  if (cfg.node_count < 1) throw std::invalid_argument("node_count must be positive");
}

// Mostly in-range readings with some excursions so both verdicts occur.
class Workload {
 public:
  explicit Workload(std::uint64_t seed) : rng_(seed ^ 0x5eedc01dULL) {}

  ledger::Payload bound(std::size_t seq) {
    std::uniform_int_distribution<std::int64_t> temp(-2, 10);
    std::uniform_int_distribution<std::int64_t> hum(30, 70);
    return {{std::string(kSeqField), static_cast<std::int64_t>(seq)},
            {"temperature", temp(rng_)},
            {"humidity", hum(rng_)}};
  }

  static ledger::Payload loopback(std::size_t seq, std::int64_t sent_ms) {
    return {{std::string(kSeqField), static_cast<std::int64_t>(seq)},
            {std::string(kSentField), sent_ms}};
  }

 private:
  std::mt19937_64 rng_;
};

std::int64_t payload_int(const ledger::Payload &p, std::string_view field) {
  auto it = p.find(field);
  if (it == p.end()) return -1;
  const auto *v = std::get_if<std::int64_t>(&it->second);
  return v ? *v : -1;
}

std::vector<std::size_t> subscriber_brokers(std::size_t nodes) {
  return nodes > 1 ? std::vector<std::size_t>{0, 1} : std::vector<std::size_t>{0};
}

// Builds a delay record from a delivery observed at `broker` at `now_ms`.
std::optional<DelayRecord> record_for(const ExperimentConfig &cfg, std::size_t broker,
                                      const broker::Delivery &d, std::int64_t now_ms) {
  DelayRecord r;
  r.nodes = cfg.node_count;
  r.tps = cfg.tps;
  r.broker = broker;
  r.deliver_ts = now_ms;
  if (d.provenance) {
    r.path = DeliveryPath::Committed;
    r.tx_id = d.provenance->tx_id.hex();
    r.publish_ts = d.provenance->publish_ts;
  } else {
    r.path = DeliveryPath::Loopback;
    r.tx_id = "loopback-" + std::to_string(payload_int(d.payload, kSeqField));
    r.publish_ts = payload_int(d.payload, kSentField);
  }
  return r;
}

ExperimentResult run_sim(const ExperimentConfig &cfg, const contract::SmartContract &c) {
  ClusterConfig cc;
  cc.nodes = cfg.node_count;
  cc.net.seed = cfg.seed;
  cc.net.latency_min_ms = cfg.latency_min_ms;
  cc.net.latency_max_ms = cfg.latency_max_ms;
  cc.net.processing_us = cfg.processing_us;
  SimCluster cluster(cc);
  cluster.start();
  auto &net = cluster.net();
  auto now_ms = [&net] { return net.now_us() / 1000; };

  ExperimentResult result;
  std::size_t committed_seen = 0;
  const auto brokers = subscriber_brokers(cfg.node_count);
  for (std::size_t b : brokers) {
    auto &br = cluster.node(b).broker();
    auto sid = br.open_session([&, b](const broker::Delivery &d) {
      if (auto r = record_for(cfg, b, d, now_ms())) {
        committed_seen += r->path == DeliveryPath::Committed;
        result.records.push_back(*r);
      }
    });
    br.subscribe(sid, std::string(kBoundTopic) + std::string(contract::kVerifiedSuffix));
    br.subscribe(sid, std::string(kBoundTopic) + std::string(contract::kRejectedSuffix));
  }
  auto &entry = cluster.node(0).broker();
  auto loop_sid = entry.open_session([&](const broker::Delivery &d) {
    if (auto r = record_for(cfg, 0, d, now_ms())) result.records.push_back(*r);
  });
  entry.subscribe(loop_sid, kLoopbackTopic);
  const auto publisher = entry.open_session(nullptr, crypto::keypair_from_label("experiment/publisher"));

  entry.handle_contract_publish(publisher, contract::encode_contract(c));
  auto registered = [&] {
    for (std::size_t i = 0; i < cluster.size(); ++i) {
      if (!cluster.node(i).registry().contains(c.contract_id)) return false;
    }
    return true;
  };
  if (!net.run_until(registered, net.now_us() + 30'000'000)) {
    throw ExperimentAborted("contract registration did not commit on every node");
  }

  const std::int64_t t0 = net.now_us();
  const std::int64_t height0 = cluster.node(0).ledger().current_height();
  const auto interval_us = static_cast<std::int64_t>(std::llround(1e6 / cfg.tps));
  Workload workload(cfg.seed);
  std::size_t failed_publishes = 0;
  for (std::size_t k = 0; k < cfg.total_messages; ++k) {
    auto payload = workload.bound(k);
    net.at(t0 + static_cast<std::int64_t>(k) * interval_us, [&, k, payload] {
      try {
        entry.publish(publisher, kBoundTopic, payload);
      } catch (const std::exception &) {
        ++failed_publishes;
      }
      entry.publish(publisher, kLoopbackTopic, Workload::loopback(k, now_ms()));
      ++result.loopback;
    });
  }

  bool finished = false;
  std::function<void()> sample = [&] {
    net.meter().sample(static_cast<double>(net.now_us() - t0) / 1e6);
    if (!finished) net.at(net.now_us() + 1'000'000, sample);
  };
  net.at(t0, sample);

  const std::size_t expected = cfg.total_messages * brokers.size();
  auto committed_count = [&] { return committed_seen; };
  const std::int64_t deadline = t0 + static_cast<std::int64_t>(cfg.total_messages) * interval_us +
                                cfg.drain_timeout_ms * 1000;
  const bool done = net.run_until(
      [&] { return result.loopback == cfg.total_messages && committed_count() >= expected; },
      deadline);
  finished = true;
  if (!done || failed_publishes > 0) {
    throw ExperimentAborted(std::to_string(committed_count()) + " of " + std::to_string(expected) +
                            " committed deliveries observed (" + std::to_string(failed_publishes) +
                            " publishes refused)");
  }
  net.meter().sample(static_cast<double>(net.now_us() - t0) / 1e6);

  result.committed = cfg.total_messages;
  result.blocks = static_cast<std::uint64_t>(cluster.node(0).ledger().current_height() - height0);
  result.total_bytes = net.meter().total_bytes_sent();
  result.traffic = net.meter().samples();
  return result;
}

ExperimentResult run_tcp(const ExperimentConfig &cfg, const contract::SmartContract &c) {
  using namespace std::chrono;
  const auto genesis = make_genesis("ledgerbus-tcp", cfg.node_count, 0);
  auto meter = std::make_shared<net::TrafficMeter>(cfg.node_count);
  std::vector<std::unique_ptr<net::TcpNode>> nodes;
  for (std::size_t i = 0; i < cfg.node_count; ++i) {
    net::NodeConfig nc;
    nc.genesis = genesis;
    nc.key = validator_key(genesis.chain_id, i);
    std::vector<net::Endpoint> peers;
    // Lower index dials higher, so each pair has one connection attempt per side
    // at most and no ordering assumptions.
    for (std::size_t j = i + 1; j < cfg.node_count; ++j) {
      peers.push_back({"127.0.0.1", static_cast<std::uint16_t>(cfg.base_port + j)});
    }
    nodes.push_back(std::make_unique<net::TcpNode>(
        std::move(nc), net::Endpoint{"127.0.0.1", static_cast<std::uint16_t>(cfg.base_port + i)},
        std::move(peers), meter));
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i]->start();
    // call() runs on the node thread, which only exists after start().
    nodes[i]->call([&, i](net::Node &n) {
      n.add_commit_listener([meter, i](const ledger::Block &) { meter->record_block(i); });
      return 0;
    });
  }

  auto wait_for = [](const std::function<bool()> &pred, milliseconds limit) {
    const auto end = steady_clock::now() + limit;
    while (!pred()) {
      if (steady_clock::now() > end) return false;
      std::this_thread::sleep_for(milliseconds(10));
    }
    return true;
  };
  if (!wait_for(
          [&] {
            for (auto &n : nodes) {
              if (n->connected_peers() + 1 < cfg.node_count) return false;
            }
            return true;
          },
          seconds(10))) {
    throw ExperimentAborted("peers did not connect");
  }

  ExperimentResult result;
  std::mutex mu;
  auto now_ms = [] { return net::monotonic_us() / 1000; };
  auto endpoint = [&](std::size_t i) {
    return net::Endpoint{"127.0.0.1", static_cast<std::uint16_t>(cfg.base_port + i)};
  };
  std::vector<std::unique_ptr<net::TcpClient>> subscribers;
  for (std::size_t b : subscriber_brokers(cfg.node_count)) {
    subscribers.push_back(
        std::make_unique<net::TcpClient>(endpoint(b), [&, b](const broker::Delivery &d) {
          auto r = record_for(cfg, b, d, now_ms());
          std::lock_guard lock(mu);
          if (r) result.records.push_back(*r);
        }));
    subscribers.back()->subscribe(std::string(kBoundTopic) +
                                  std::string(contract::kVerifiedSuffix));
    subscribers.back()->subscribe(std::string(kBoundTopic) +
                                  std::string(contract::kRejectedSuffix));
  }
  net::TcpClient loop_sub(endpoint(0), [&](const broker::Delivery &d) {
    auto r = record_for(cfg, 0, d, now_ms());
    std::lock_guard lock(mu);
    if (r) result.records.push_back(*r);
  });
  loop_sub.subscribe(kLoopbackTopic);
  net::TcpClient publisher(endpoint(0));

  publisher.publish(std::string(contract::kContractTopic),
                    {{std::string(contract::kDocumentField), contract::encode_contract(c)}});
  if (!wait_for(
          [&] {
            for (auto &n : nodes) {
              if (!n->call([&](net::Node &node) { return node.registry().contains(c.contract_id); }))
                return false;
            }
            return true;
          },
          seconds(30))) {
    throw ExperimentAborted("contract registration did not commit on every node");
  }

  const std::int64_t height0 =
      nodes[0]->call([](net::Node &n) { return n.ledger().current_height(); });
  const auto start = steady_clock::now();
  const auto interval = duration_cast<steady_clock::duration>(duration<double>(1.0 / cfg.tps));
  auto next_sample = start;
  Workload workload(cfg.seed);
  for (std::size_t k = 0; k < cfg.total_messages; ++k) {
    std::this_thread::sleep_until(start + k * interval);
    if (steady_clock::now() >= next_sample) {
      meter->sample(duration<double>(steady_clock::now() - start).count());
      next_sample += seconds(1);
    }
    publisher.publish(std::string(kBoundTopic), workload.bound(k));
    publisher.publish(std::string(kLoopbackTopic), Workload::loopback(k, now_ms()));
    ++result.loopback;
  }

  const std::size_t expected = cfg.total_messages * subscribers.size();
  auto committed_count = [&] {
    std::lock_guard lock(mu);
    return static_cast<std::size_t>(
        std::count_if(result.records.begin(), result.records.end(),
                      [](const DelayRecord &r) { return r.path == DeliveryPath::Committed; }));
  };
  auto loopbacks = [&] {
    std::lock_guard lock(mu);
    return static_cast<std::size_t>(
        std::count_if(result.records.begin(), result.records.end(),
                      [](const DelayRecord &r) { return r.path == DeliveryPath::Loopback; }));
  };
  const bool done = wait_for(
      [&] {
        if (steady_clock::now() >= next_sample) {
          meter->sample(duration<double>(steady_clock::now() - start).count());
          next_sample += seconds(1);
        }
        return committed_count() >= expected && loopbacks() >= cfg.total_messages;
      },
      milliseconds(cfg.drain_timeout_ms));
  meter->sample(duration<double>(steady_clock::now() - start).count());
  const std::int64_t height1 =
      nodes[0]->call([](net::Node &n) { return n.ledger().current_height(); });
  subscribers.clear();
  for (auto &n : nodes) n->stop();
  if (!done) {
    throw ExperimentAborted(std::to_string(committed_count()) + " of " + std::to_string(expected) +
                            " committed deliveries observed");
  }

  std::lock_guard lock(mu);
  result.committed = cfg.total_messages;
  result.blocks = static_cast<std::uint64_t>(height1 - height0);
  result.total_bytes = meter->total_bytes_sent();
  result.traffic = meter->samples();
  return result;
}

}  // namespace

std::string_view to_string(TransportKind t) { return t == TransportKind::Sim ? "sim" : "tcp"; }

std::string_view to_string(DeliveryPath p) {
  return p == DeliveryPath::Loopback ? "loopback" : "committed";
}

ExperimentResult run_experiment(const ExperimentConfig &cfg) {
  validate(cfg);
  const auto c = load_contract(cfg);
  ExperimentResult result =
      cfg.transport == TransportKind::Sim ? run_sim(cfg, c) : run_tcp(cfg, c);
  for (const auto &r : result.records) {
    if (r.deliver_ts < r.publish_ts) {
      throw ExperimentAborted("delivery before publish for " + r.tx_id);
    }
  }
  if (cfg.out_dir) {
    std::filesystem::create_directories(*cfg.out_dir);
    write_delays_csv(*cfg.out_dir / "delays.csv", result.records);
    net::write_traffic_csv(*cfg.out_dir / "traffic.csv", result.traffic);
  }
  return result;
}

namespace {
constexpr std::string_view kDelayHeader = "nodes,tps,tx_id,publish_ts,deliver_ts,path,broker";
}

void write_delays_csv(const std::filesystem::path &path, const std::vector<DelayRecord> &records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kDelayHeader << '\n';
  for (const auto &r : records) {
    out << r.nodes << ',' << r.tps << ',' << r.tx_id << ',' << r.publish_ts << ','
        << r.deliver_ts << ',' << to_string(r.path) << ',' << r.broker << '\n';
  }
}

std::vector<DelayRecord> read_delays_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kDelayHeader) {
    throw std::runtime_error(path.string() + ": missing delay CSV header");
  }
  std::vector<DelayRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    auto fail = [&](const std::string &why) {
      return std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + why);
    };
    if (cols.size() != 7) throw fail("expected 7 columns");
    DelayRecord r;
    try {
      std::size_t used = 0;
      r.nodes = std::stoul(cols[0], &used);
      if (used != cols[0].size()) throw fail("bad nodes");
      r.tps = std::stod(cols[1], &used);
      if (used != cols[1].size()) throw fail("bad tps");
      r.tx_id = cols[2];
      r.publish_ts = std::stoll(cols[3], &used);
      if (used != cols[3].size()) throw fail("bad publish_ts");
      r.deliver_ts = std::stoll(cols[4], &used);
      if (used != cols[4].size()) throw fail("bad deliver_ts");
      r.broker = std::stoul(cols[6], &used);
      if (used != cols[6].size()) throw fail("bad broker");
    } catch (const std::logic_error &) {
      throw fail("non-numeric field");
    }
    if (cols[5] == "loopback") {
      r.path = DeliveryPath::Loopback;
    } else if (cols[5] == "committed") {
      r.path = DeliveryPath::Committed;
    } else {
      throw fail("unknown path '" + cols[5] + "'");
    }
    if (r.deliver_ts < r.publish_ts) throw fail("deliver_ts before publish_ts");
    out.push_back(std::move(r));
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(p > 0 && p <= 100)) throw std::invalid_argument("percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<SummaryRow> summarize(const std::vector<DelayRecord> &records) {
  if (records.empty()) throw std::runtime_error("no delay records to summarize");
  std::map<std::tuple<std::size_t, double, DeliveryPath>, std::vector<double>> groups;
  for (const auto &r : records) {
    groups[{r.nodes, r.tps, r.path}].push_back(static_cast<double>(r.delay_ms()));
  }
  std::vector<SummaryRow> rows;
  for (const auto &[key, delays] : groups) {
    SummaryRow row;
    std::tie(row.nodes, row.tps, row.path) = key;
    row.count = delays.size();
    double sum = 0;
    for (double d : delays) sum += d;
    row.mean_ms = sum / static_cast<double>(delays.size());
    row.p50_ms = percentile(delays, 50);
    row.p95_ms = percentile(delays, 95);
    rows.push_back(row);
  }
  return rows;
}

std::string format_summary(const std::vector<SummaryRow> &rows, std::uint64_t total_bytes,
                           std::uint64_t blocks) {
  std::ostringstream out;
  out << std::left << std::setw(7) << "nodes" << std::setw(8) << "tps" << std::setw(11) << "path"
      << std::right << std::setw(7) << "count" << std::setw(11) << "mean_ms" << std::setw(9)
      << "p50_ms" << std::setw(9) << "p95_ms" << '\n';
  out << std::fixed;
  for (const auto &r : rows) {
    out << std::left << std::setw(7) << r.nodes << std::setw(8) << std::setprecision(2) << r.tps
        << std::setw(11) << to_string(r.path) << std::right << std::setw(7) << r.count
        << std::setw(11) << std::setprecision(2) << r.mean_ms << std::setw(9)
        << std::setprecision(0) << r.p50_ms << std::setw(9) << r.p95_ms << '\n';
  }
  out << "total_bytes " << total_bytes << "\nblocks " << blocks << '\n';
  return out.str();
}

}  // namespace ledgerbus::harness
