/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/node.hpp"

namespace ledgerbus::net {
namespace {

std::size_t validator_index_or_throw(const ledger::GenesisConfig &g, const crypto::KeyPair &key) {
  auto idx = g.validators.index_of(key.public_key);
  if (!idx) throw std::invalid_argument("node key is not in the genesis validator set");
  return *idx;
}

Frame error_frame(std::string_view code, const std::string &message) {
  return encode_error({std::string(code), message});
}

}  // namespace

Node::Node(NodeConfig cfg, Transport &transport)
    : cfg_(std::move(cfg)),
      transport_(transport),
      index_(validator_index_or_throw(cfg_.genesis, cfg_.key)),
      ledger_(cfg_.genesis, cfg_.ledger_path),
      engine_(cfg_.consensus, cfg_.key, ledger_, registry_, *this),
      broker_(
          registry_, cfg_.key,
          [this](const ledger::Transaction &tx) { return engine_.submit_transaction(tx); },
          [this] { return now_ms(); }) {}

void Node::start() {
  if (!ledger_.empty()) {
    for (std::int64_t h = 0; h <= ledger_.current_height(); ++h) {
      contract::apply_block(registry_, ledger_.get_block(h));
    }
  }
  engine_.start();
  transport_.broadcast(encode_query_height(hello()));
}

QueryHeightMsg Node::hello() const { return {cfg_.genesis.chain_id, cfg_.key.public_key}; }

std::variant<std::size_t, ErrorMsg> Node::accept_hello(const QueryHeightMsg &hello) const {
  if (!hello.chain_id || *hello.chain_id != cfg_.genesis.chain_id) {
    return ErrorMsg{std::string(kErrChainIdMismatch),
                    "this node serves chain '" + cfg_.genesis.chain_id + "'"};
  }
  if (!hello.peer) return ErrorMsg{std::string(kErrBadRequest), "peer greeting without a key"};
  auto idx = cfg_.genesis.validators.index_of(*hello.peer);
  if (!idx) return ErrorMsg{std::string(kErrBadRequest), "peer key is not a validator"};
  return *idx;
}

void Node::handle_peer_frame(std::size_t from, const Frame &f) {
  ++stats_.peer_frames;
  if (refused_.contains(from)) {
    ++stats_.refused_frames;
    return;
  }
  try {
    switch (f.type) {
      case FrameType::Proposal:
        engine_.on_proposal(decode_proposal(f), from);
        return;
      case FrameType::Vote:
        engine_.on_vote(decode_vote(f), from);
        return;
      case FrameType::TxGossip:
        engine_.submit_transaction(decode_tx_gossip(f), false);
        return;
      case FrameType::QueryHeight: {
        auto hello = decode_query_height(f);
        if (hello.chain_id || hello.peer) {
          auto verdict = accept_hello(hello);
          if (auto *err = std::get_if<ErrorMsg>(&verdict)) {
            refused_.insert(from);
            transport_.send(from, encode_error(*err));
            return;
          }
        }
        transport_.send(from, encode_query_resp({ledger_.current_height(), std::nullopt}));
        return;
      }
      case FrameType::QueryBlock:
        if (auto reply = answer_query_block(decode_query_block(f))) transport_.send(from, *reply);
        return;
      case FrameType::QueryResp: {
        auto resp = decode_query_resp(f);
        if (resp.block) engine_.on_synced_block(*resp.block);
        if (resp.height) engine_.on_peer_height(from, *resp.height);
        return;
      }
      case FrameType::Error: {
        auto err = decode_error(f);
        if (err.code == kErrChainIdMismatch) refused_.insert(from);
        return;
      }
      default:
        ++stats_.malformed_frames;
        return;
    }
  } catch (const MessageError &) {
    ++stats_.malformed_frames;
  }
}

std::optional<Frame> Node::answer_query_block(std::int64_t height) const {
  if (ledger_.empty() || height < 0 || height > ledger_.current_height()) {
    return error_frame(kErrHeightOutOfRange, "no block at height " + std::to_string(height));
  }
  return encode_query_resp({std::nullopt, ledger_.get_block(height)});
}

std::vector<Frame> Node::handle_client_frame(broker::SessionId session, const Frame &f) {
  ++stats_.client_frames;
  try {
    switch (f.type) {
      case FrameType::Publish: {
        auto m = decode_publish(f);
        auto receipt = broker_.publish(session, m.topic, std::move(m.payload));
        return {encode_ack({std::string(broker::to_string(receipt.path)), receipt.tx_id})};
      }
      case FrameType::Subscribe:
        broker_.subscribe(session, decode_filter(f));
        return {encode_ack({})};
      case FrameType::Unsubscribe:
        broker_.unsubscribe(session, decode_filter(f));
        return {encode_ack({})};
      case FrameType::QueryHeight: {
        auto q = decode_query_height(f);
        if (q.chain_id && *q.chain_id != cfg_.genesis.chain_id) {
          return {error_frame(kErrChainIdMismatch,
                              "this node serves chain '" + cfg_.genesis.chain_id + "'")};
        }
        return {encode_query_resp({ledger_.current_height(), std::nullopt})};
      }
      case FrameType::QueryBlock:
        return {*answer_query_block(decode_query_block(f))};
      default:
        return {error_frame(kErrBadRequest, std::string(to_string(f.type)) +
                                                " is not a client request")};
    }
  } catch (const MessageError &e) {
    ++stats_.malformed_frames;
    return {error_frame(kErrBadRequest, e.what())};
  } catch (const broker::BrokerError &e) {
    return {error_frame(broker::to_string(e.code()), e.what())};
  } catch (const contract::ContractError &e) {
    return {error_frame(contract::to_string(e.code()), e.what())};
  } catch (const contract::FilterError &e) {
    return {error_frame("FilterError", e.what())};
  }
}

std::int64_t Node::now_ms() { return transport_.now_us() / 1000; }

void Node::broadcast_proposal(const consensus::Proposal &p) {
  transport_.broadcast(encode_proposal(p));
}

void Node::broadcast_vote(const consensus::Vote &v) { transport_.broadcast(encode_vote(v)); }

void Node::gossip_transaction(const ledger::Transaction &tx) {
  transport_.broadcast(encode_tx_gossip(tx));
}

void Node::schedule_timeout(std::int64_t delay_ms, const consensus::Timeout &t) {
  transport_.schedule(delay_ms * 1000, [this, t] { engine_.on_timeout(t); });
}

void Node::block_committed(const ledger::Block &b) {
  broker_.on_commit(b);
  for (const auto &fn : listeners_) fn(b);
}

void Node::request_block(std::size_t peer, std::int64_t height) {
  transport_.send(peer, encode_query_block(height));
}

void Node::send_status(std::size_t peer, std::int64_t committed_height) {
  transport_.send(peer, encode_query_resp({committed_height, std::nullopt}));
}

}  // namespace ledgerbus::net
