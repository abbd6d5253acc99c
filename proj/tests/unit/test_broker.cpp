/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <gtest/gtest.h>

#include "ledgerbus/broker.hpp"
#include "ledgerbus/cluster.hpp"
#include "test_support.hpp"

namespace ledgerbus::broker {
namespace {

using consensus::SubmitResult;

TEST(SubscriptionTable, LookupMatchesFilters) {
  SubscriptionTable t;
  EXPECT_TRUE(t.add(TopicFilter::parse("a/+/c"), 1));
  EXPECT_TRUE(t.add(TopicFilter::parse("a/#"), 2));
  EXPECT_TRUE(t.add(TopicFilter::parse("a/b/c"), 3));
  EXPECT_TRUE(t.add(TopicFilter::parse("a/b/c"), 1));
  EXPECT_FALSE(t.add(TopicFilter::parse("a/#"), 2));
  EXPECT_EQ(t.size(), 4u);
  EXPECT_EQ(t.lookup("a/b/c"), (std::vector<SessionId>{1, 2, 3}));
  EXPECT_EQ(t.lookup("a/x/c"), (std::vector<SessionId>{1, 2}));
  EXPECT_EQ(t.lookup("a"), std::vector<SessionId>{});
  EXPECT_TRUE(t.remove(TopicFilter::parse("a/#"), 2));
  EXPECT_FALSE(t.remove(TopicFilter::parse("a/#"), 2));
  EXPECT_EQ(t.lookup("a/x/c"), std::vector<SessionId>{1});
}

TEST(SubscriptionTable, AgreesWithDirectMatching) {
  testing::Rng rng(8);
  const std::vector<std::string> syms = {"a", "b", "+"};
  auto filters = testing::enumerate_topics(syms, 3);
  filters.push_back("#");
  filters.push_back("a/#");
  filters.push_back("+/b/#");
  SubscriptionTable t;
  std::map<SessionId, std::vector<TopicFilter>> subs;
  for (SessionId s = 1; s <= 30; ++s) {
    for (int k = 0; k < 3; ++k) {
      auto f = TopicFilter::parse(filters[rng() % filters.size()]);
      t.add(f, s);
      subs[s].push_back(f);
    }
  }
  for (const auto &topic : testing::enumerate_topics({"a", "b", "c"}, 4)) {
    std::vector<SessionId> want;
    for (const auto &[s, fs] : subs) {
      if (std::any_of(fs.begin(), fs.end(), [&](const auto &f) { return match_topic(f, topic); })) {
        want.push_back(s);
      }
    }
    EXPECT_EQ(t.lookup(topic), want) << topic;
  }
}

struct Fixture {
  contract::ContractRegistry registry;
  std::vector<ledger::Transaction> submitted;
  SubmitResult result = SubmitResult::Accepted;
  std::int64_t clock = 1000;
  Broker broker{registry, crypto::keypair_from_label("unit/node"),
                [this](const ledger::Transaction &tx) {
                  submitted.push_back(tx);
                  return result;
                },
                [this] { return clock; }};
};

TEST(Broker, UnboundTopicsLoopBack) {
  Fixture fx;
  std::vector<Delivery> got;
  auto sub = fx.broker.open_session([&](const Delivery &d) { got.push_back(d); });
  auto pub = fx.broker.open_session(nullptr);
  fx.broker.subscribe(sub, "lab/+/temp");
  auto r = fx.broker.publish(pub, "lab/bench/temp", {{"v", std::int64_t{1}}});
  EXPECT_EQ(r.path, PublishPath::Loopback);
  EXPECT_EQ(r.local_deliveries, 1u);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_FALSE(got[0].provenance);
  EXPECT_TRUE(fx.submitted.empty());

  fx.broker.unsubscribe(sub, "lab/+/temp");
  fx.broker.unsubscribe(sub, "lab/+/temp");  // idempotent
  EXPECT_EQ(fx.broker.publish(pub, "lab/bench/temp", {}).local_deliveries, 0u);
  EXPECT_EQ(fx.broker.stats().loopback_published, 2u);
}

TEST(Broker, RejectsBadRequests) {
  Fixture fx;
  auto s = fx.broker.open_session(nullptr);
  auto code = [&](auto fn) {
    try {
      fn();
    } catch (const BrokerError &e) {
      return e.code();
    }
    ADD_FAILURE() << "no error";
    return BrokerErrc::BadTopic;
  };
  EXPECT_EQ(code([&] { fx.broker.publish(s, "a/+", {}); }), BrokerErrc::BadTopic);
  EXPECT_EQ(code([&] { fx.broker.publish(s, "a/b_verified", {}); }), BrokerErrc::ReservedTopic);
  EXPECT_EQ(code([&] { fx.broker.publish(s, "a/b_rejected", {}); }), BrokerErrc::ReservedTopic);
  EXPECT_EQ(code([&] { fx.broker.publish(s, "Contract", {{"x", std::int64_t{1}}}); }),
            BrokerErrc::BadPayload);
  EXPECT_EQ(code([&] { fx.broker.publish(99, "a", {}); }), BrokerErrc::UnknownSession);
  EXPECT_EQ(code([&] { fx.broker.subscribe(99, "a"); }), BrokerErrc::UnknownSession);
  EXPECT_THROW(fx.broker.subscribe(s, "a/#/b"), contract::FilterError);
  EXPECT_TRUE(is_reserved_topic("Contract"));
  EXPECT_FALSE(is_reserved_topic("a/b"));
}

TEST(Broker, BoundTopicsGoThroughConsensus) {
  Fixture fx;
  auto c = harness::cold_chain_contract();
  fx.registry.register_contract(c);
  auto anon = fx.broker.open_session(nullptr);
  ledger::Payload p{{"temperature", std::int64_t{5}}, {"humidity", std::int64_t{40}}};
  try {
    fx.broker.publish(anon, "supply/t1/temperature", p);
    FAIL();
  } catch (const BrokerError &e) {
    EXPECT_EQ(e.code(), BrokerErrc::MissingIdentity);
  }

  auto publisher = crypto::keypair_from_label("unit/publisher");
  std::vector<Delivery> raw, verified, rejected;
  auto pub = fx.broker.open_session(nullptr, publisher);
  auto r1 = fx.broker.open_session([&](const Delivery &d) { raw.push_back(d); });
  auto v = fx.broker.open_session([&](const Delivery &d) { verified.push_back(d); });
  auto x = fx.broker.open_session([&](const Delivery &d) { rejected.push_back(d); });
  fx.broker.subscribe(r1, "supply/+/temperature");
  fx.broker.subscribe(v, "supply/+/temperature_verified");
  fx.broker.subscribe(x, "supply/+/temperature_rejected");

  auto receipt = fx.broker.publish(pub, "supply/t1/temperature", p);
  EXPECT_EQ(receipt.path, PublishPath::Submitted);
  ASSERT_EQ(fx.submitted.size(), 1u);
  const auto tx = fx.submitted[0];
  EXPECT_EQ(tx.tx_id, receipt.tx_id);
  EXPECT_EQ(tx.publisher, publisher.public_key);
  EXPECT_EQ(tx.publish_ts, 1000);
  EXPECT_EQ(tx.contract_id, c.contract_id);
  EXPECT_TRUE(ledger::verify_transaction(tx));
  EXPECT_TRUE(raw.empty() && verified.empty());

  fx.result = SubmitResult::DuplicateTx;
  try {
    fx.broker.publish(pub, "supply/t1/temperature", p);
    FAIL();
  } catch (const BrokerError &e) {
    EXPECT_EQ(e.code(), BrokerErrc::SubmitRejected);
  }

  // Commit: one approved, one rejected, one unbound.
  ledger::Block b;
  b.header.height = 4;
  b.txs.push_back(tx);
  b.txs[0].verdict = ledger::Verdict::Approved;
  auto bad = ledger::make_transaction("supply/t2/temperature", {{"temperature", 99.0}}, 5,
                                      c.contract_id, publisher);
  bad.verdict = ledger::Verdict::Rejected;
  b.txs.push_back(bad);
  b.txs.push_back(ledger::make_transaction("supply/t3/x", {}, 6, std::nullopt, publisher));
  EXPECT_EQ(fx.broker.on_commit(b), 2u);
  ASSERT_EQ(verified.size(), 1u);
  EXPECT_EQ(verified[0].topic, "supply/t1/temperature_verified");
  EXPECT_EQ(verified[0].provenance->height, 4);
  EXPECT_EQ(verified[0].provenance->tx_id, tx.tx_id);
  ASSERT_EQ(rejected.size(), 1u);
  EXPECT_EQ(rejected[0].provenance->verdict, ledger::Verdict::Rejected);
  EXPECT_TRUE(raw.empty());
}

TEST(Broker, ContractPublishValidatesAndRegistersOnCommit) {
  Fixture fx;
  auto c = harness::cold_chain_contract();
  auto s = fx.broker.open_session(nullptr);
  auto r = fx.broker.publish(s, "Contract", {{"document", contract::encode_contract(c)}});
  EXPECT_EQ(r.path, PublishPath::ContractSubmitted);
  ASSERT_EQ(fx.submitted.size(), 1u);
  EXPECT_EQ(fx.submitted[0].publisher, crypto::keypair_from_label("unit/node").public_key);
  EXPECT_FALSE(fx.registry.contains(c.contract_id));

  ledger::Block b;
  b.txs = fx.submitted;
  b.txs[0].verdict = ledger::Verdict::Approved;
  fx.broker.on_commit(b);
  EXPECT_TRUE(fx.registry.contains(c.contract_id));

  auto unsigned_c = c;
  unsigned_c.signatures.clear();
  EXPECT_THROW(fx.broker.handle_contract_publish(s, contract::encode_contract(unsigned_c)),
               contract::ContractError);
  EXPECT_THROW(fx.broker.handle_contract_publish(s, "{}"), contract::ContractError);
}

TEST(Broker, ThrowingSinkCountsAsDrop) {
  Fixture fx;
  auto bad = fx.broker.open_session([](const Delivery &) { throw std::runtime_error("gone"); });
  std::size_t ok_count = 0;
  auto good = fx.broker.open_session([&](const Delivery &) { ++ok_count; });
  fx.broker.subscribe(bad, "t");
  fx.broker.subscribe(good, "t");
  auto pub = fx.broker.open_session(nullptr);
  EXPECT_EQ(fx.broker.publish(pub, "t", {}).local_deliveries, 1u);
  EXPECT_EQ(ok_count, 1u);
  EXPECT_EQ(fx.broker.stats().dropped_deliveries, 1u);

  fx.broker.close_session(good);
  EXPECT_FALSE(fx.broker.has_session(good));
  EXPECT_EQ(fx.broker.subscriptions().lookup("t"), std::vector<SessionId>{bad});
}

}  // namespace
}  // namespace ledgerbus::broker
