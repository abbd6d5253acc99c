/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "ledgerbus/ledger_store.hpp"
#include "test_support.hpp"

namespace ledgerbus::ledger {
namespace {

namespace fs = std::filesystem;

fs::path temp_path(const std::string &name) {
  auto p = fs::temp_directory_path() / ("ledgerbus-unit-" + name);
  fs::remove_all(p);
  return p;
}

TEST(Transaction, IdCoversPublisherFields) {
  testing::Rng rng(1);
  auto kp = crypto::keypair_from_label("unit/tx");
  auto tx = testing::random_tx(rng, kp, true);
  EXPECT_EQ(compute_tx_id(tx), tx.tx_id);
  EXPECT_TRUE(verify_transaction(tx));

  // Verdict and signature sit outside the id.
  auto v = tx;
  v.verdict = Verdict::Rejected;
  EXPECT_EQ(compute_tx_id(v), tx.tx_id);

  auto t = tx;
  t.topic += "x";
  EXPECT_NE(compute_tx_id(t), tx.tx_id);
  EXPECT_FALSE(verify_transaction(t));
  auto ts = tx;
  ts.publish_ts += 1;
  EXPECT_NE(compute_tx_id(ts), tx.tx_id);
  auto c = tx;
  c.contract_id.reset();
  EXPECT_NE(compute_tx_id(c), tx.tx_id);
}

TEST(Transaction, ValueRoundTrip) {
  testing::Rng rng(2);
  auto kp = crypto::keypair_from_label("unit/tx");
  for (int i = 0; i < 100; ++i) {
    auto tx = testing::random_tx(rng, kp, i % 2 == 0);
    EXPECT_EQ(transaction_from_value(to_value(tx)), tx);
  }
}

TEST(Merkle, MatchesOracleAndSmallCases) {
  testing::Rng rng(3);
  auto kp = crypto::keypair_from_label("unit/merkle");
  EXPECT_EQ(merkle_root({}), sha256(std::string_view("")));
  std::vector<Transaction> txs;
  for (int n = 0; n < 40; ++n) {
    EXPECT_EQ(merkle_root(txs), testing::oracle_merkle_root(txs)) << n;
    txs.push_back(testing::random_tx(rng, kp, false));
  }
  // One leaf is its own root: H(0x00 || bytes).
  std::vector<Transaction> one(txs.begin(), txs.begin() + 1);
  EXPECT_EQ(merkle_root(one), sha256_prefixed(0x00, as_bytes(canonical_bytes(one[0]))));
}

TEST(Merkle, OrderMatters) {
  testing::Rng rng(4);
  auto kp = crypto::keypair_from_label("unit/merkle");
  std::vector<Transaction> txs = {testing::random_tx(rng, kp, false),
                                  testing::random_tx(rng, kp, false)};
  auto swapped = txs;
  std::swap(swapped[0], swapped[1]);
  EXPECT_NE(merkle_root(txs), merkle_root(swapped));
}

TEST(Block, EncodeDecodeIsStrict) {
  auto chain = testing::build_chain(4, 3, 9);
  for (const auto &b : chain.blocks) {
    const auto text = encode_block(b);
    EXPECT_EQ(decode_block(text), b);
  }
  auto text = encode_block(chain.blocks[1]);
  EXPECT_ANY_THROW(decode_block(" " + text));
}

TEST(Genesis, BlockDependsOnChainIdentity) {
  auto a = testing::test_genesis("chain-a", 4);
  auto b = testing::test_genesis("chain-b", 4);
  auto ga = make_genesis_block(a);
  EXPECT_EQ(ga.header.height, 0);
  ASSERT_EQ(ga.txs.size(), 1u);
  EXPECT_EQ(ga.txs[0].topic, kGenesisTopic);
  EXPECT_NE(block_hash(ga.header), block_hash(make_genesis_block(b).header));
  EXPECT_EQ(decode_genesis(encode_genesis(a)), a);
}

TEST(Genesis, FileRoundTrip) {
  auto path = temp_path("genesis.json");
  auto g = testing::test_genesis("chain-file", 5);
  g.genesis_time = 1234;
  save_genesis_file(path, g);
  EXPECT_EQ(load_genesis_file(path), g);
  fs::remove(path);
}

TEST(Verify, AcceptsValidChain) {
  auto chain = testing::build_chain(4, 20, 1);
  EXPECT_TRUE(verify_blocks(chain.blocks, chain.genesis).ok);
}

TEST(Verify, FlagsEachFaultClass) {
  auto chain = testing::build_chain(4, 6, 2);
  auto expect = [&](std::vector<Block> blocks, std::int64_t h, LedgerErrc code) {
    auto r = verify_blocks(blocks, chain.genesis);
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(r.failed_height, h);
    EXPECT_EQ(r.error, code) << r.detail;
  };
  {
    auto b = chain.blocks;
    b[3].header.prev_hash = b[1].header.merkle_root;
    expect(b, 3, LedgerErrc::ChainMismatch);
  }
  {
    auto b = chain.blocks;
    std::swap(b[2], b[3]);
    expect(b, 2, LedgerErrc::ChainMismatch);
  }
  {
    // Find a block with transactions and drop one.
    auto b = chain.blocks;
    std::size_t h = 1;
    while (b[h].txs.empty()) ++h;
    b[h].txs.pop_back();
    expect(b, static_cast<std::int64_t>(h), LedgerErrc::MerkleMismatch);
  }
  {
    auto b = chain.blocks;
    b[4].commit_signatures.resize(2);
    expect(b, 4, LedgerErrc::QuorumNotMet);
  }
  {
    auto b = chain.blocks;
    b[4].commit_signatures.push_back(b[4].commit_signatures.front());
    expect(b, 4, LedgerErrc::QuorumNotMet);
  }
  {
    auto b = chain.blocks;
    b[5].header.block_ts += 1;  // signatures no longer cover the header
    expect(b, 5, LedgerErrc::QuorumNotMet);
  }
  {
    auto b = chain.blocks;
    b[0].header.block_ts = 77;
    expect(b, 0, LedgerErrc::ChainMismatch);
  }
}

TEST(Verify, RejectsForgedTransactionsInASignedBlock) {
  auto chain = testing::build_chain(4, 1, 3);
  testing::Rng rng(5);
  auto kp = crypto::keypair_from_label("unit/forger");
  auto tx = testing::random_tx(rng, kp, false);
  tx.signature.data[0] ^= 1;
  auto b = testing::seal_block({tx}, chain.blocks[1], chain.keys, 3);
  std::vector<Block> blocks = chain.blocks;
  blocks.push_back(b);
  auto r = verify_blocks(blocks, chain.genesis);
  EXPECT_EQ(r.failed_height, 2);
  EXPECT_EQ(r.error, LedgerErrc::TxMismatch);

  // A verdict that contradicts the contract binding.
  auto unbound = testing::random_tx(rng, kp, false);
  unbound.verdict = Verdict::Approved;
  blocks.back() = testing::seal_block({unbound}, chain.blocks[1], chain.keys, 3);
  EXPECT_EQ(verify_blocks(blocks, chain.genesis).error, LedgerErrc::TxMismatch);

  // The same transaction twice in one block.
  auto ok = testing::random_tx(rng, kp, false);
  blocks.back() = testing::seal_block({ok, ok}, chain.blocks[1], chain.keys, 3);
  EXPECT_EQ(verify_blocks(blocks, chain.genesis).error, LedgerErrc::TxMismatch);
}

TEST(Store, AppendQueryAndIndex) {
  auto chain = testing::build_chain(4, 8, 4);
  LedgerStore store(chain.genesis);
  EXPECT_TRUE(store.empty());
  EXPECT_THROW(store.current_height(), LedgerError);
  store.ensure_genesis();
  for (std::size_t h = 1; h < chain.blocks.size(); ++h) {
    EXPECT_EQ(store.append_block(chain.blocks[h]), static_cast<std::int64_t>(h));
  }
  EXPECT_EQ(store.current_height(), 8);
  EXPECT_EQ(store.head_hash(), block_hash(chain.blocks.back().header));
  EXPECT_EQ(store.get_block(3), chain.blocks[3]);
  EXPECT_THROW(store.get_block(9), LedgerError);
  EXPECT_THROW(store.get_block(-1), LedgerError);
  for (const auto &b : chain.blocks) {
    for (std::size_t i = 0; i < b.txs.size(); ++i) {
      EXPECT_TRUE(store.contains_tx(b.txs[i].tx_id));
      auto idx = store.topic_index(b.txs[i].topic);
      EXPECT_NE(std::find(idx.begin(), idx.end(), TxLocation{b.header.height, i}), idx.end());
    }
  }
  EXPECT_TRUE(store.topic_index("no/such/topic").empty());
  EXPECT_TRUE(verify_chain(store).ok);
}

TEST(Store, RejectedAppendLeavesStoreUntouched) {
  auto chain = testing::build_chain(4, 3, 6);
  LedgerStore store(chain.genesis);
  store.ensure_genesis();
  store.append_block(chain.blocks[1]);
  auto bad = chain.blocks[2];
  bad.commit_signatures.clear();
  try {
    store.append_block(bad);
    FAIL() << "append should throw";
  } catch (const LedgerError &e) {
    EXPECT_EQ(e.code(), LedgerErrc::QuorumNotMet);
  }
  EXPECT_EQ(store.current_height(), 1);
  EXPECT_THROW(store.append_block(chain.blocks[3]), LedgerError);
  EXPECT_EQ(store.append_block(chain.blocks[2]), 2);
}

TEST(Store, LogReplaysAfterRestart) {
  auto path = temp_path("replay.log");
  auto chain = testing::build_chain(4, 5, 7);
  {
    LedgerStore store(chain.genesis, path);
    store.ensure_genesis();
    for (std::size_t h = 1; h < chain.blocks.size(); ++h) store.append_block(chain.blocks[h]);
  }
  LedgerStore again(chain.genesis, path);
  EXPECT_EQ(again.current_height(), 5);
  EXPECT_EQ(again.blocks(), chain.blocks);
  fs::remove(path);
}

TEST(Store, TornTailIsCutOff) {
  auto path = temp_path("torn.log");
  auto chain = testing::build_chain(4, 4, 8);
  {
    LedgerStore store(chain.genesis, path);
    store.ensure_genesis();
    for (std::size_t h = 1; h <= 3; ++h) store.append_block(chain.blocks[h]);
  }
  // Half of the next record, as a crash mid-write would leave it.
  const auto rec = encode_record(chain.blocks[4]);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << rec.substr(0, rec.size() / 2);
  }
  const auto torn_size = fs::file_size(path);
  {
    LedgerStore store(chain.genesis, path);
    EXPECT_EQ(store.current_height(), 3);
    EXPECT_LT(fs::file_size(path), torn_size);
    store.append_block(chain.blocks[4]);
  }
  LedgerStore again(chain.genesis, path);
  EXPECT_EQ(again.current_height(), 4);
  fs::remove(path);
}

TEST(Store, CorruptLogRecordIsReported) {
  auto path = temp_path("corrupt.log");
  auto chain = testing::build_chain(4, 2, 9);
  std::string image;
  for (const auto &b : chain.blocks) image += encode_record(b);
  // Flip a digit inside the last record's header.
  auto pos = image.rfind("\"block_ts\":");
  ASSERT_NE(pos, std::string::npos);
  pos += 11;
  image[pos] = image[pos] == '9' ? '8' : '9';
  {
    std::ofstream out(path, std::ios::binary);
    out << image;
  }
  EXPECT_THROW(LedgerStore(chain.genesis, path), LedgerError);

  std::size_t valid = 0;
  auto recs = split_records(image, &valid);
  EXPECT_EQ(valid, image.size());
  auto r = verify_records(recs, chain.genesis);
  EXPECT_EQ(r.failed_height, 2);
  fs::remove(path);
}

TEST(Store, UndecodableRecordIsCorrupt) {
  auto chain = testing::build_chain(4, 2, 10);
  std::vector<std::string> recs;
  for (const auto &b : chain.blocks) recs.push_back(encode_block(b));
  recs[1] = "{broken";
  auto r = verify_records(recs, chain.genesis);
  EXPECT_EQ(r.failed_height, 1);
  EXPECT_EQ(r.error, LedgerErrc::Corrupt);
}

}  // namespace
}  // namespace ledgerbus::ledger
