/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "ledgerbus/broker.hpp"
#include "ledgerbus/consensus.hpp"
#include "ledgerbus/frame.hpp"

namespace ledgerbus::net {

/// A frame whose body does not decode as the message its type announces.
class MessageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Error codes carried in Error frames.
inline constexpr std::string_view kErrChainIdMismatch = "ChainIdMismatch";
inline constexpr std::string_view kErrHeightOutOfRange = "HeightOutOfRange";
inline constexpr std::string_view kErrBadRequest = "BadRequest";

struct PublishMsg {
  std::string topic;
  ledger::Payload payload;
  bool operator==(const PublishMsg &) const = default;
};

struct AckMsg {
  std::optional<std::string> path;
  std::optional<Hash256> tx_id;
  bool operator==(const AckMsg &) const = default;
};

/// Peers send their chain id and key when a connection opens; clients send
/// an empty query.
struct QueryHeightMsg {
  std::optional<std::string> chain_id;
  std::optional<crypto::PublicKey> peer;
  bool operator==(const QueryHeightMsg &) const = default;
};

struct QueryRespMsg {
  std::optional<std::int64_t> height;
  std::optional<ledger::Block> block;
  bool operator==(const QueryRespMsg &) const = default;
};

struct ErrorMsg {
  std::string code;
  std::string message;
  bool operator==(const ErrorMsg &) const = default;
};

Frame encode_proposal(const consensus::Proposal &p);
consensus::Proposal decode_proposal(const Frame &f);

Frame encode_vote(const consensus::Vote &v);
consensus::Vote decode_vote(const Frame &f);

Frame encode_tx_gossip(const ledger::Transaction &tx);
ledger::Transaction decode_tx_gossip(const Frame &f);

Frame encode_publish(const PublishMsg &m);
PublishMsg decode_publish(const Frame &f);

Frame encode_subscribe(std::string_view filter);
Frame encode_unsubscribe(std::string_view filter);
/// Filter text of a Subscribe or Unsubscribe frame.
std::string decode_filter(const Frame &f);

Frame encode_ack(const AckMsg &m);
AckMsg decode_ack(const Frame &f);

Frame encode_deliver(const broker::Delivery &d);
broker::Delivery decode_deliver(const Frame &f);

Frame encode_query_height(const QueryHeightMsg &m);
QueryHeightMsg decode_query_height(const Frame &f);

Frame encode_query_block(std::int64_t height);
std::int64_t decode_query_block(const Frame &f);

Frame encode_query_resp(const QueryRespMsg &m);
QueryRespMsg decode_query_resp(const Frame &f);

Frame encode_error(const ErrorMsg &m);
ErrorMsg decode_error(const Frame &f);

}  // namespace ledgerbus::net
