/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ledgerbus/messages.hpp"
#include "ledgerbus/node.hpp"
#include "ledgerbus/traffic.hpp"

namespace ledgerbus::net {

/// Microseconds on the steady clock since first use in this process. Nodes and
/// clients in one process share it, which keeps in-process delay measurements
/// free of clock skew.
std::int64_t monotonic_us();

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "host:port"; an empty host means 127.0.0.1.
Endpoint parse_endpoint(std::string_view text);

/// A node serving peers and clients over TCP. All node work runs on one
/// internal thread; other threads reach the node through call().
class TcpNode {
 public:
  TcpNode(NodeConfig cfg, Endpoint listen, std::vector<Endpoint> peers,
          std::shared_ptr<TrafficMeter> meter = nullptr);
  ~TcpNode();

  TcpNode(const TcpNode &) = delete;
  TcpNode &operator=(const TcpNode &) = delete;

  /// Binds the listener, starts dialing peers and starts consensus.
  void start();
  void stop();

  std::uint16_t port() const;
  std::size_t index() const;
  TrafficMeter &meter() { return *meter_; }

  /// Runs `fn` on the node thread and returns its result.
  template <typename Fn>
  auto call(Fn fn) -> decltype(fn(std::declval<Node &>())) {
    using R = decltype(fn(std::declval<Node &>()));
    std::packaged_task<R()> task([&] { return fn(node()); });
    auto fut = task.get_future();
    post([&task] { task(); });
    return fut.get();
  }

  /// Number of peers with an identified connection.
  std::size_t connected_peers();
  /// Outbound peers that answered our greeting with a chain id mismatch.
  std::size_t refused_dials();

 private:
  class Impl;
  Node &node();
  void post(std::function<void()> fn);

  std::unique_ptr<Impl> impl_;
  std::shared_ptr<TrafficMeter> meter_;
};

class ClientError : public std::runtime_error {
 public:
  ClientError(ErrorMsg err)
      : std::runtime_error(err.code + ": " + err.message), error_(std::move(err)) {}
  const ErrorMsg &error() const { return error_; }

 private:
  ErrorMsg error_;
};

/// Blocking client for the broker protocol. Deliveries arrive on a reader
/// thread and are passed to the delivery handler.
class TcpClient {
 public:
  using DeliveryHandler = std::function<void(const broker::Delivery &)>;

  TcpClient(const Endpoint &server, DeliveryHandler on_deliver = nullptr,
            std::chrono::milliseconds timeout = std::chrono::seconds(10));
  ~TcpClient();

  TcpClient(const TcpClient &) = delete;
  TcpClient &operator=(const TcpClient &) = delete;

  AckMsg publish(const std::string &topic, const ledger::Payload &payload);
  void subscribe(std::string_view filter);
  void unsubscribe(std::string_view filter);
  std::int64_t query_height();
  ledger::Block query_block(std::int64_t height);

  /// Sends one frame and waits for the next reply that is not a delivery.
  /// Error replies are thrown as ClientError.
  Frame request(const Frame &f);

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ledgerbus::net
