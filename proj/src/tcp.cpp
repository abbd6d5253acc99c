/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/tcp.hpp"

#include <array>
#include <charconv>
#include <iostream>
#include <map>
#include <set>

#include <boost/asio.hpp>

namespace ledgerbus::net {

namespace asio = boost::asio;
using asio::ip::tcp;

std::int64_t monotonic_us() {
  static const auto start = std::chrono::steady_clock::now();
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() -
                                                               start)
      .count();
}

Endpoint parse_endpoint(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("address '" + std::string(text) + "' needs host:port");
  }
  Endpoint e;
  e.host = std::string(text.substr(0, colon));
  if (e.host.empty()) e.host = "127.0.0.1";
  auto port = text.substr(colon + 1);
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535) {
    throw std::invalid_argument("bad port in '" + std::string(text) + "'");
  }
  e.port = static_cast<std::uint16_t>(value);
  return e;
}

namespace {

tcp::endpoint resolve(asio::io_context &ioc, const Endpoint &e) {
  boost::system::error_code ec;
  auto addr = asio::ip::make_address(e.host, ec);
  if (!ec) return {addr, e.port};
  tcp::resolver resolver(ioc);
  auto results = resolver.resolve(e.host, std::to_string(e.port));
  if (results.empty()) throw std::runtime_error("cannot resolve " + e.host);
  return *results.begin();
}

constexpr auto kRedialDelay = std::chrono::milliseconds(250);

}  // namespace

class TcpNode::Impl : public Transport {
 public:
  Impl(NodeConfig cfg, Endpoint listen, std::vector<Endpoint> peers, TrafficMeter &meter)
      : listen_(std::move(listen)),
        dial_(std::move(peers)),
        meter_(meter),
        acceptor_(ioc_),
        node_(std::move(cfg), *this) {}

  ~Impl() { stop(); }

  Node &node() { return node_; }

  void start() {
    auto ep = resolve(ioc_, listen_);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(tcp::acceptor::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    accept();
    for (std::size_t i = 0; i < dial_.size(); ++i) dial(i);
    asio::post(ioc_, [this] { node_.start(); });
    thread_ = std::thread([this] {
      auto guard = asio::make_work_guard(ioc_);
      ioc_.run();
    });
  }

  void stop() {
    if (!thread_.joinable()) return;
    asio::post(ioc_, [this] {
      stopping_ = true;
      boost::system::error_code ec;
      acceptor_.close(ec);
      auto open = conns_;
      for (auto &c : open) c->close();
      ioc_.stop();
    });
    thread_.join();
    peer_conns_.clear();
    conns_.clear();
  }

  void post(std::function<void()> fn) { asio::post(ioc_, std::move(fn)); }
  std::uint16_t port() const { return port_; }
  std::size_t connected_peers() const { return peer_conns_.size(); }
  std::size_t refused_dials() const { return refused_slots_.size(); }

  // Transport
  std::int64_t now_us() const override { return monotonic_us(); }

  void send(std::size_t peer, const Frame &f) override {
    auto it = peer_conns_.find(peer);
    if (it == peer_conns_.end()) return;
    meter_.record_sent(node_.index(), f);
    it->second->write(encode_frame(f));
  }

  void broadcast(const Frame &f) override {
    const std::string bytes = encode_frame(f);
    for (auto &[idx, conn] : peer_conns_) {
      if (idx == node_.index()) continue;
      meter_.record_sent(node_.index(), f);
      conn->write(bytes);
    }
  }

  void schedule(std::int64_t delay_us, std::function<void()> fn) override {
    auto timer = std::make_shared<asio::steady_timer>(ioc_, std::chrono::microseconds(delay_us));
    timer->async_wait([this, timer, fn = std::move(fn)](const boost::system::error_code &ec) {
      if (!ec && !stopping_) fn();
    });
  }

 private:
  struct Conn : std::enable_shared_from_this<Conn> {
    enum class Role { Unknown, Peer, Client };

    Conn(Impl &owner, tcp::socket sock, std::optional<std::size_t> dial_slot)
        : owner(owner), sock(std::move(sock)), dial_slot(dial_slot) {}

    void start_read() {
      auto self = shared_from_this();
      sock.async_read_some(asio::buffer(rbuf),
                           [self](const boost::system::error_code &ec, std::size_t n) {
                             if (ec) {
                               self->close();
                               return;
                             }
                             self->inbuf.append(self->rbuf.data(), n);
                             try {
                               while (!self->closed) {
                                 auto f = try_pop_frame(self->inbuf);
                                 if (!f) break;
                                 self->owner.on_frame(self, *f);
                               }
                             } catch (const FrameError &) {
                               self->close();
                               return;
                             }
                             if (!self->closed) self->start_read();
                           });
    }

    void write(std::string bytes) {
      if (closed) return;
      outq.push_back(std::move(bytes));
      if (outq.size() == 1) do_write();
    }

    void do_write() {
      auto self = shared_from_this();
      asio::async_write(sock, asio::buffer(outq.front()),
                        [self](const boost::system::error_code &ec, std::size_t) {
                          if (ec) {
                            self->close();
                            return;
                          }
                          self->outq.pop_front();
                          if (!self->outq.empty()) {
                            self->do_write();
                          } else if (self->close_when_flushed) {
                            self->close();
                          }
                        });
    }

    void close() {
      if (closed) return;
      closed = true;
      boost::system::error_code ec;
      sock.shutdown(tcp::socket::shutdown_both, ec);
      sock.close(ec);
      owner.on_closed(shared_from_this());
    }

    Impl &owner;
    tcp::socket sock;
    std::optional<std::size_t> dial_slot;
    Role role = Role::Unknown;
    std::size_t peer = 0;
    broker::SessionId session = 0;
    std::array<char, 65536> rbuf{};
    std::string inbuf;
    std::deque<std::string> outq;
    bool closed = false;
    bool close_when_flushed = false;
  };
  using ConnPtr = std::shared_ptr<Conn>;

  void accept() {
    acceptor_.async_accept([this](const boost::system::error_code &ec, tcp::socket sock) {
      if (ec) {
        if (!stopping_ && acceptor_.is_open()) accept();
        return;
      }
      sock.set_option(tcp::no_delay(true));
      auto conn = std::make_shared<Conn>(*this, std::move(sock), std::nullopt);
      conns_.insert(conn);
      conn->start_read();
      accept();
    });
  }

  void dial(std::size_t slot) {
    if (stopping_ || refused_slots_.contains(slot)) return;
    tcp::endpoint ep;
    try {
      ep = resolve(ioc_, dial_[slot]);
    } catch (const std::exception &) {
      redial(slot);
      return;
    }
    auto sock = std::make_shared<tcp::socket>(ioc_);
    sock->async_connect(ep, [this, slot, sock](const boost::system::error_code &ec) {
      if (stopping_) return;
      if (ec) {
        redial(slot);
        return;
      }
      sock->set_option(tcp::no_delay(true));
      auto conn = std::make_shared<Conn>(*this, std::move(*sock), slot);
      conns_.insert(conn);
      conn->write(encode_frame(encode_query_height(node_.hello())));
      conn->start_read();
    });
  }

  void redial(std::size_t slot) {
    if (stopping_) return;
    auto timer = std::make_shared<asio::steady_timer>(ioc_, kRedialDelay);
    timer->async_wait([this, slot, timer](const boost::system::error_code &ec) {
      if (!ec) dial(slot);
    });
  }

  void on_frame(const ConnPtr &conn, const Frame &f) {
    switch (conn->role) {
      case Conn::Role::Peer:
        meter_.record_received(node_.index(), f);
        node_.handle_peer_frame(conn->peer, f);
        return;
      case Conn::Role::Client:
        for (const auto &reply : node_.handle_client_frame(conn->session, f)) {
          conn->write(encode_frame(reply));
        }
        return;
      case Conn::Role::Unknown:
        break;
    }

    if (f.type == FrameType::QueryHeight) {
      QueryHeightMsg hello;
      try {
        hello = decode_query_height(f);
      } catch (const MessageError &) {
        conn->close();
        return;
      }
      if (hello.peer) {
        admit_peer(conn, hello, f);
        return;
      }
    }
    if (conn->dial_slot) {
      // Our outbound connection; the remote must greet us as a peer.
      if (f.type == FrameType::Error) {
        try {
          auto err = decode_error(f);
          if (err.code == kErrChainIdMismatch) {
            std::cerr << "peer " << dial_[*conn->dial_slot].host << ':'
                      << dial_[*conn->dial_slot].port << " refused peering: " << err.message
                      << '\n';
            refused_slots_.insert(*conn->dial_slot);
          }
        } catch (const MessageError &) {
        }
      }
      conn->close();
      return;
    }

    conn->role = Conn::Role::Client;
    std::weak_ptr<Conn> weak = conn;
    conn->session = node_.broker().open_session(
        [weak](const broker::Delivery &d) {
          auto c = weak.lock();
          if (!c || c->closed) throw std::runtime_error("client session closed");
          c->write(encode_frame(encode_deliver(d)));
        },
        node_.key());
    on_frame(conn, f);
  }

  void admit_peer(const ConnPtr &conn, const QueryHeightMsg &hello, const Frame &f) {
    auto verdict = node_.accept_hello(hello);
    if (auto *err = std::get_if<ErrorMsg>(&verdict)) {
      std::cerr << "refusing peer: " << err->code << ": " << err->message << '\n';
      conn->close_when_flushed = true;
      conn->write(encode_frame(encode_error(*err)));
      return;
    }
    const std::size_t idx = std::get<std::size_t>(verdict);
    if (idx == node_.index()) {
      conn->close();
      return;
    }
    conn->role = Conn::Role::Peer;
    conn->peer = idx;
    peer_conns_[idx] = conn;
    if (!conn->dial_slot) conn->write(encode_frame(encode_query_height(node_.hello())));
    meter_.record_received(node_.index(), f);
    node_.handle_peer_frame(idx, f);
  }

  void on_closed(const ConnPtr &conn) {
    conns_.erase(conn);
    if (conn->role == Conn::Role::Peer) {
      auto it = peer_conns_.find(conn->peer);
      if (it != peer_conns_.end() && it->second == conn) peer_conns_.erase(it);
    }
    if (conn->role == Conn::Role::Client) node_.broker().close_session(conn->session);
    if (conn->dial_slot) redial(*conn->dial_slot);
  }

  asio::io_context ioc_;
  Endpoint listen_;
  std::vector<Endpoint> dial_;
  TrafficMeter &meter_;
  tcp::acceptor acceptor_;
  std::set<ConnPtr> conns_;
  std::map<std::size_t, ConnPtr> peer_conns_;
  std::set<std::size_t> refused_slots_;
  Node node_;
  std::thread thread_;
  std::uint16_t port_ = 0;
  bool stopping_ = false;
};

TcpNode::TcpNode(NodeConfig cfg, Endpoint listen, std::vector<Endpoint> peers,
                 std::shared_ptr<TrafficMeter> meter)
    : meter_(meter ? std::move(meter)
                   : std::make_shared<TrafficMeter>(cfg.genesis.validators.size())) {
  impl_ = std::make_unique<Impl>(std::move(cfg), std::move(listen), std::move(peers), *meter_);
}

TcpNode::~TcpNode() { stop(); }

void TcpNode::start() { impl_->start(); }
void TcpNode::stop() { impl_->stop(); }
std::uint16_t TcpNode::port() const { return impl_->port(); }
std::size_t TcpNode::index() const { return impl_->node().index(); }
Node &TcpNode::node() { return impl_->node(); }
void TcpNode::post(std::function<void()> fn) { impl_->post(std::move(fn)); }

std::size_t TcpNode::connected_peers() {
  std::promise<std::size_t> p;
  auto fut = p.get_future();
  impl_->post([&] { p.set_value(impl_->connected_peers()); });
  return fut.get();
}

std::size_t TcpNode::refused_dials() {
  std::promise<std::size_t> p;
  auto fut = p.get_future();
  impl_->post([&] { p.set_value(impl_->refused_dials()); });
  return fut.get();
}

class TcpClient::Impl {
 public:
  Impl(const Endpoint &server, DeliveryHandler on_deliver, std::chrono::milliseconds timeout)
      : sock_(ioc_), on_deliver_(std::move(on_deliver)), timeout_(timeout) {
    sock_.connect(resolve(ioc_, server));
    sock_.set_option(tcp::no_delay(true));
    reader_ = std::thread([this] { read_loop(); });
  }

  ~Impl() {
    boost::system::error_code ec;
    sock_.shutdown(tcp::socket::shutdown_both, ec);
    sock_.close(ec);
    if (reader_.joinable()) reader_.join();
  }

  Frame request(const Frame &f) {
    std::lock_guard req_lock(request_mu_);
    const std::string bytes = encode_frame(f);
    asio::write(sock_, asio::buffer(bytes));
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout_, [&] { return !replies_.empty() || closed_; })) {
      throw std::runtime_error("no reply within timeout");
    }
    if (replies_.empty()) throw std::runtime_error("connection closed");
    Frame reply = std::move(replies_.front());
    replies_.pop_front();
    lock.unlock();
    if (reply.type == FrameType::Error) throw ClientError(decode_error(reply));
    return reply;
  }

 private:
  void read_loop() {
    std::array<char, 65536> buf{};
    std::string in;
    for (;;) {
      boost::system::error_code ec;
      std::size_t n = sock_.read_some(asio::buffer(buf), ec);
      if (ec) break;
      in.append(buf.data(), n);
      try {
        while (auto f = try_pop_frame(in)) {
          if (f->type == FrameType::Deliver) {
            if (on_deliver_) {
              try {
                on_deliver_(decode_deliver(*f));
              } catch (const std::exception &) {
              }
            }
            continue;
          }
          std::lock_guard lock(mu_);
          replies_.push_back(std::move(*f));
          cv_.notify_all();
        }
      } catch (const FrameError &) {
        break;
      }
    }
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  asio::io_context ioc_;
  tcp::socket sock_;
  DeliveryHandler on_deliver_;
  std::chrono::milliseconds timeout_;
  std::thread reader_;
  std::mutex request_mu_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Frame> replies_;
  bool closed_ = false;
};

TcpClient::TcpClient(const Endpoint &server, DeliveryHandler on_deliver,
                     std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>(server, std::move(on_deliver), timeout)) {}

TcpClient::~TcpClient() = default;

Frame TcpClient::request(const Frame &f) { return impl_->request(f); }

AckMsg TcpClient::publish(const std::string &topic, const ledger::Payload &payload) {
  return decode_ack(request(encode_publish({topic, payload})));
}

void TcpClient::subscribe(std::string_view filter) { decode_ack(request(encode_subscribe(filter))); }

void TcpClient::unsubscribe(std::string_view filter) {
  decode_ack(request(encode_unsubscribe(filter)));
}

std::int64_t TcpClient::query_height() {
  auto resp = decode_query_resp(request(encode_query_height({})));
  if (!resp.height) throw std::runtime_error("height missing from reply");
  return *resp.height;
}

ledger::Block TcpClient::query_block(std::int64_t height) {
  auto resp = decode_query_resp(request(encode_query_block(height)));
  if (!resp.block) throw std::runtime_error("block missing from reply");
  return *resp.block;
}

}  // namespace ledgerbus::net
