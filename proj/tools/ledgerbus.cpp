/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ledgerbus/experiment.hpp"
#include "ledgerbus/tcp.hpp"

using namespace ledgerbus;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_delivery(const broker::Delivery &d) {
  Value v = Value::object();
  v["topic"] = d.topic;
  v["payload"] = ledger::payload_to_value(d.payload);
  if (d.provenance) {
    v["height"] = d.provenance->height;
    v["tx_id"] = d.provenance->tx_id.hex();
    v["verdict"] = std::string(ledger::to_string(d.provenance->verdict));
    v["publish_ts"] = d.provenance->publish_ts;
  }
  std::cout << canonical_serialize(v) << std::endl;
}

int cmd_node(const std::string &genesis_path, const std::string &keys_path,
             const std::string &listen, const std::string &peers, const std::string &transport,
             const std::string &data_dir) {
  if (transport != "tcp") {
    std::cerr << "node: only --transport tcp runs a standalone node; simulated clusters run "
                 "in-process through the experiment subcommand\n";
    return 2;
  }
  net::NodeConfig cfg;
  cfg.genesis = ledger::load_genesis_file(genesis_path);
  cfg.key = crypto::load_key_file(keys_path);
  if (!data_dir.empty()) {
    std::filesystem::create_directories(data_dir);
    cfg.ledger_path = std::filesystem::path(data_dir) / "ledger.log";
  }
  std::vector<net::Endpoint> dial;
  for (const auto &p : split_list(peers)) dial.push_back(net::parse_endpoint(p));

  net::TcpNode node(std::move(cfg), net::parse_endpoint(listen), std::move(dial));
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  node.start();
  std::cerr << "node " << node.index() << " listening on port " << node.port() << '\n';
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  node.stop();
  return 0;
}

int cmd_experiment(const std::string &nodes, const std::string &tps, std::size_t messages,
                   std::uint64_t seed, const std::string &out, const std::string &transport,
                   double latency_ms, const std::string &contract_path) {
  std::vector<harness::SummaryRow> rows;
  std::uint64_t bytes = 0;
  std::uint64_t blocks = 0;
  for (const auto &n : split_list(nodes)) {
    for (const auto &r : split_list(tps)) {
      harness::ExperimentConfig cfg;
      cfg.node_count = std::stoul(n);
      cfg.tps = std::stod(r);
      cfg.total_messages = messages;
      cfg.seed = seed;
      cfg.latency_min_ms = cfg.latency_max_ms = latency_ms;
      if (transport == "tcp") {
        cfg.transport = harness::TransportKind::Tcp;
      } else if (transport != "sim") {
        throw std::invalid_argument("transport must be sim or tcp");
      }
      if (!contract_path.empty()) cfg.contract_fixture = contract_path;
      if (!out.empty()) cfg.out_dir = std::filesystem::path(out) / ("n" + n + "_tps" + r);
      std::cerr << "running n=" << n << " tps=" << r << " (" << transport << ")\n";
      auto result = harness::run_experiment(cfg);
      auto cell = harness::summarize(result.records);
      rows.insert(rows.end(), cell.begin(), cell.end());
      bytes += result.total_bytes;
      blocks += result.blocks;
    }
  }
  std::cout << harness::format_summary(rows, bytes, blocks);
  return 0;
}

int cmd_summarize(const std::vector<std::string> &inputs) {
  std::vector<harness::DelayRecord> records;
  std::uint64_t bytes = 0;
  std::uint64_t blocks = 0;
  for (const auto &in : inputs) {
    std::filesystem::path p(in);
    auto delays = std::filesystem::is_directory(p) ? p / "delays.csv" : p;
    auto part = harness::read_delays_csv(delays);
    records.insert(records.end(), part.begin(), part.end());
    auto traffic = delays.parent_path() / "traffic.csv";
    if (std::filesystem::exists(traffic)) {
      std::map<std::size_t, net::TrafficSample> last;
      for (const auto &s : net::read_traffic_csv(traffic)) last[s.node_id] = s;
      std::uint64_t cell_blocks = 0;
      for (const auto &[id, s] : last) {
        bytes += s.bytes_sent;
        cell_blocks = std::max(cell_blocks, s.blocks_committed);
      }
      blocks += cell_blocks;
    }
  }
  std::cout << harness::format_summary(harness::summarize(records), bytes, blocks);
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"ledgerbus: pub/sub broker with a replicated, contract-checked ledger"};
  app.require_subcommand(1);

  auto *keygen = app.add_subcommand("keygen", "Write a new Ed25519 key file");
  std::string key_out, key_label;
  keygen->add_option("--out", key_out, "Key file to write")->required();
  keygen->add_option("--label", key_label, "Derive the key from a label instead of randomly");

  auto *genesis = app.add_subcommand("genesis", "Write a genesis file from validator key files");
  std::string chain_id, genesis_out;
  std::vector<std::string> genesis_keys;
  std::int64_t genesis_time = 0;
  genesis->add_option("--chain-id", chain_id)->required();
  genesis->add_option("--keys", genesis_keys, "Validator key files, in rotation order")
      ->required();
  genesis->add_option("--time", genesis_time, "Genesis timestamp (ms)");
  genesis->add_option("--out", genesis_out)->required();

  auto *node = app.add_subcommand("node", "Run a validator node");
  std::string node_genesis, node_keys, node_listen = "127.0.0.1:26656", node_peers,
                                      node_transport = "tcp", node_data;
  node->add_option("--genesis", node_genesis)->required();
  node->add_option("--keys", node_keys)->required();
  node->add_option("--listen", node_listen);
  node->add_option("--peers", node_peers, "Comma-separated host:port list");
  node->add_option("--transport", node_transport)->check(CLI::IsMember({"sim", "tcp"}));
  node->add_option("--data", node_data, "Directory for the ledger log");

  auto *experiment = app.add_subcommand("experiment", "Run publish workloads and record delays");
  std::string exp_nodes = "4", exp_tps = "5", exp_out, exp_transport = "sim", exp_contract;
  std::size_t exp_messages = 200;
  std::uint64_t exp_seed = 1;
  double exp_latency = 10;
  experiment->add_option("--nodes", exp_nodes, "Node count, or a comma-separated sweep");
  experiment->add_option("--tps", exp_tps, "Publish rate, or a comma-separated sweep");
  experiment->add_option("--messages", exp_messages);
  experiment->add_option("--seed", exp_seed);
  experiment->add_option("--out", exp_out, "Output directory for CSV files");
  experiment->add_option("--transport", exp_transport)->check(CLI::IsMember({"sim", "tcp"}));
  experiment->add_option("--latency-ms", exp_latency, "Simulated link latency");
  experiment->add_option("--contract", exp_contract, "Contract document file");

  auto *summarize = app.add_subcommand("summarize", "Summarize experiment CSV output");
  std::vector<std::string> sum_inputs;
  summarize->add_option("inputs", sum_inputs, "delays.csv files or experiment cell directories")
      ->required();

  std::string server = "127.0.0.1:26656";
  auto *publish = app.add_subcommand("publish", "Publish one message");
  std::string pub_topic, pub_payload;
  publish->add_option("--server", server);
  publish->add_option("--topic", pub_topic)->required();
  publish->add_option("--payload", pub_payload, "Flat JSON object")->required();

  auto *subscribe = app.add_subcommand("subscribe", "Print deliveries for a topic filter");
  std::string sub_filter;
  std::size_t sub_count = 0;
  subscribe->add_option("--server", server);
  subscribe->add_option("--filter", sub_filter)->required();
  subscribe->add_option("--count", sub_count, "Exit after this many deliveries");

  auto *query = app.add_subcommand("query", "Query chain height or a block");
  std::int64_t query_height = -1;
  query->add_option("--server", server);
  query->add_option("--height", query_height, "Block height to fetch");

  auto *make_contract = app.add_subcommand("make-contract", "Write the cold-chain contract");
  std::string contract_out;
  make_contract->add_option("--out", contract_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*keygen) {
      auto kp = key_label.empty() ? crypto::generate_keypair()
                                  : crypto::keypair_from_label(key_label);
      crypto::save_key_file(key_out, kp);
      std::cout << kp.public_key.hex() << '\n';
      return 0;
    }
    if (*genesis) {
      std::vector<crypto::Validator> vs;
      for (std::size_t i = 0; i < genesis_keys.size(); ++i) {
        vs.push_back({crypto::load_key_file(genesis_keys[i]).public_key,
                      "validator-" + std::to_string(i)});
      }
      ledger::GenesisConfig g;
      g.chain_id = chain_id;
      g.validators = crypto::ValidatorSet(std::move(vs));
      g.genesis_time = genesis_time;
      ledger::save_genesis_file(genesis_out, g);
      return 0;
    }
    if (*node) {
      return cmd_node(node_genesis, node_keys, node_listen, node_peers, node_transport, node_data);
    }
    if (*experiment) {
      return cmd_experiment(exp_nodes, exp_tps, exp_messages, exp_seed, exp_out, exp_transport,
                            exp_latency, exp_contract);
    }
    if (*summarize) return cmd_summarize(sum_inputs);
    if (*publish) {
      net::TcpClient client(net::parse_endpoint(server));
      auto payload = ledger::payload_from_value(parse_canonical(pub_payload, false));
      auto ack = client.publish(pub_topic, payload);
      std::cout << ack.path.value_or("ok");
      if (ack.tx_id) std::cout << ' ' << ack.tx_id->hex();
      std::cout << '\n';
      return 0;
    }
    if (*subscribe) {
      std::atomic<std::size_t> seen{0};
      net::TcpClient client(net::parse_endpoint(server), [&](const broker::Delivery &d) {
        print_delivery(d);
        ++seen;
      });
      client.subscribe(sub_filter);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_stop && (sub_count == 0 || seen < sub_count)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      }
      return 0;
    }
    if (*query) {
      net::TcpClient client(net::parse_endpoint(server));
      if (query_height < 0) {
        std::cout << client.query_height() << '\n';
      } else {
        std::cout << ledger::encode_block(client.query_block(query_height)) << '\n';
      }
      return 0;
    }
    if (*make_contract) {
      std::ofstream out(contract_out);
      if (!out) throw std::runtime_error("cannot write " + contract_out);
      out << contract::encode_contract(harness::cold_chain_contract()) << '\n';
      return 0;
    }
  } catch (const harness::ExperimentAborted &e) {
    std::cerr << "experiment aborted: " << e.what() << '\n';
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
