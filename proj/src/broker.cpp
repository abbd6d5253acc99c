/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/broker.hpp"

namespace ledgerbus::broker {

std::string_view to_string(PublishPath p) {
  switch (p) {
    case PublishPath::Loopback:
      return "loopback";
    case PublishPath::Submitted:
      return "submitted";
    case PublishPath::ContractSubmitted:
      return "contract_submitted";
  }
  return "loopback";
}

std::string_view to_string(BrokerErrc e) {
  switch (e) {
    case BrokerErrc::UnknownSession:
      return "UnknownSession";
    case BrokerErrc::BadTopic:
      return "BadTopic";
    case BrokerErrc::ReservedTopic:
      return "ReservedTopic";
    case BrokerErrc::BadPayload:
      return "BadPayload";
    case BrokerErrc::MissingIdentity:
      return "MissingIdentity";
    case BrokerErrc::SubmitRejected:
      return "SubmitRejected";
  }
  return "BrokerError";
}

bool is_reserved_topic(std::string_view topic) {
  return topic == contract::kContractTopic || topic.ends_with(contract::kVerifiedSuffix) ||
         topic.ends_with(contract::kRejectedSuffix);
}

bool SubscriptionTable::add(const TopicFilter &filter, SessionId session) {
  Node *node = &root_;
  const auto &levels = filter.levels();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == contract::kMultiLevel) {
      bool added = node->multi.insert(session).second;
      size_ += added;
      return added;
    }
    auto &child = node->children[levels[i]];
    if (!child) child = std::make_unique<Node>();
    node = child.get();
  }
  bool added = node->exact.insert(session).second;
  size_ += added;
  return added;
}

bool SubscriptionTable::remove(const TopicFilter &filter, SessionId session) {
  Node *node = &root_;
  const auto &levels = filter.levels();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == contract::kMultiLevel) {
      bool removed = node->multi.erase(session) > 0;
      size_ -= removed;
      return removed;
    }
    auto it = node->children.find(levels[i]);
    if (it == node->children.end()) return false;
    node = it->second.get();
  }
  bool removed = node->exact.erase(session) > 0;
  size_ -= removed;
  return removed;
}

void SubscriptionTable::collect(const Node &node, const std::vector<std::string_view> &levels,
                                std::size_t depth, std::set<SessionId> &out) {
  if (depth < levels.size()) {
    // "#" on this node needs at least one remaining level, which we have.
    out.insert(node.multi.begin(), node.multi.end());
    if (auto it = node.children.find(levels[depth]); it != node.children.end()) {
      collect(*it->second, levels, depth + 1, out);
    }
    if (levels[depth] != contract::kSingleLevel) {
      if (auto it = node.children.find(contract::kSingleLevel); it != node.children.end()) {
        collect(*it->second, levels, depth + 1, out);
      }
    }
    return;
  }
  out.insert(node.exact.begin(), node.exact.end());
}

std::vector<SessionId> SubscriptionTable::lookup(std::string_view topic) const {
  auto levels = contract::split_levels(topic);
  std::set<SessionId> out;
  collect(root_, levels, 0, out);
  return {out.begin(), out.end()};
}

Broker::Broker(contract::ContractRegistry &registry, crypto::KeyPair node_identity,
               Submitter submit, Clock now_ms)
    : registry_(registry),
      node_identity_(node_identity),
      submit_(std::move(submit)),
      now_ms_(std::move(now_ms)) {}

SessionId Broker::open_session(DeliverySink sink, std::optional<crypto::KeyPair> identity) {
  SessionId id = next_session_++;
  sessions_.emplace(id, ClientSession{id, std::move(sink), {}, identity});
  return id;
}

void Broker::close_session(SessionId id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return;
  for (const auto &f : it->second.filters) table_.remove(f, id);
  sessions_.erase(it);
}

ClientSession &Broker::session(SessionId id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw BrokerError(BrokerErrc::UnknownSession, "session " + std::to_string(id));
  }
  return it->second;
}

void Broker::subscribe(SessionId id, std::string_view filter) {
  auto &s = session(id);
  auto f = TopicFilter::parse(filter);
  if (s.filters.insert(f).second) table_.add(f, id);
}

void Broker::unsubscribe(SessionId id, std::string_view filter) {
  auto &s = session(id);
  auto f = TopicFilter::parse(filter);
  if (s.filters.erase(f) > 0) table_.remove(f, id);
}

PublishReceipt Broker::publish(SessionId id, std::string_view topic, Payload payload) {
  auto &s = session(id);
  if (!contract::is_valid_topic(topic)) {
    throw BrokerError(BrokerErrc::BadTopic, "'" + std::string(topic) + "' is not a literal topic");
  }
  if (topic == contract::kContractTopic) {
    auto it = payload.find(contract::kDocumentField);
    const auto *doc = it == payload.end() ? nullptr : std::get_if<std::string>(&it->second);
    if (!doc || payload.size() != 1) {
      throw BrokerError(BrokerErrc::BadPayload,
                        "Contract publishes carry exactly one string field 'document'");
    }
    return handle_contract_publish(id, *doc);
  }
  if (is_reserved_topic(topic)) {
    throw BrokerError(BrokerErrc::ReservedTopic, "'" + std::string(topic) + "' is reserved");
  }
  try {
    canonical_serialize(ledger::payload_to_value(payload));
  } catch (const SerializationError &e) {
    throw BrokerError(BrokerErrc::BadPayload, e.what());
  }

  auto bound = registry_.lookup_contract(topic);
  if (!bound) {
    ++stats_.loopback_published;
    PublishReceipt r;
    r.path = PublishPath::Loopback;
    r.local_deliveries = deliver(Delivery{std::string(topic), std::move(payload), std::nullopt});
    return r;
  }

  if (!s.identity) {
    throw BrokerError(BrokerErrc::MissingIdentity,
                      "publishing to a contract-bound topic needs a publisher key");
  }
  auto tx = ledger::make_transaction(std::string(topic), std::move(payload), now_ms_(),
                                     bound->contract_id, *s.identity);
  auto result = submit_(tx);
  if (result != consensus::SubmitResult::Accepted) {
    throw BrokerError(BrokerErrc::SubmitRejected, std::string(consensus::to_string(result)));
  }
  ++stats_.submitted;
  return {PublishPath::Submitted, tx.tx_id, 0};
}

PublishReceipt Broker::handle_contract_publish(SessionId id, std::string_view document) {
  auto &s = session(id);
  auto c = contract::parse_contract(document);
  if (!contract::validate_contract_signatures(c)) {
    throw contract::ContractError(contract::ContractErrc::Signature,
                                  "contract is missing stakeholder signatures");
  }
  const crypto::KeyPair &signer = s.identity ? *s.identity : node_identity_;
  Payload payload{{std::string(contract::kDocumentField), contract::encode_contract(c)}};
  auto tx = ledger::make_transaction(std::string(contract::kContractTopic), std::move(payload),
                                     now_ms_(), c.contract_id, signer);
  auto result = submit_(tx);
  if (result != consensus::SubmitResult::Accepted) {
    throw BrokerError(BrokerErrc::SubmitRejected, std::string(consensus::to_string(result)));
  }
  ++stats_.contracts_submitted;
  return {PublishPath::ContractSubmitted, tx.tx_id, 0};
}

std::size_t Broker::on_commit(const Block &block) {
  std::size_t delivered = 0;
  for (const auto &tx : block.txs) {
    if (tx.topic == contract::kContractTopic && tx.verdict == Verdict::Approved) {
      if (auto c = contract::contract_of(tx)) {
        try {
          registry_.register_contract(*c);
        } catch (const contract::ContractError &) {
          // Verdicts are computed against the same registry state, so an
          // approved registration cannot fail here unless the ledger is corrupt.
        }
      }
    }
    if (!tx.contract_id || tx.verdict == Verdict::Unchecked) continue;
    const bool approved = tx.verdict == Verdict::Approved;
    Delivery d{tx.topic + std::string(approved ? contract::kVerifiedSuffix
                                               : contract::kRejectedSuffix),
               tx.payload,
               Provenance{block.header.height, tx.tx_id, tx.verdict, tx.publish_ts}};
    std::size_t n = deliver(d);
    delivered += n;
    (approved ? stats_.verified_deliveries : stats_.rejected_deliveries) += n;
  }
  return delivered;
}

std::size_t Broker::deliver(const Delivery &d) {
  std::size_t n = 0;
  for (SessionId id : table_.lookup(d.topic)) {
    auto it = sessions_.find(id);
    if (it == sessions_.end() || !it->second.sink) continue;
    try {
      it->second.sink(d);
      ++n;
    } catch (const std::exception &) {
      ++stats_.dropped_deliveries;
    }
  }
  stats_.deliveries += n;
  return n;
}

}  // namespace ledgerbus::broker
