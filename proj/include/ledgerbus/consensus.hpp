/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "ledgerbus/block.hpp"
#include "ledgerbus/crypto.hpp"
#include "ledgerbus/ledger_store.hpp"
#include "ledgerbus/registry.hpp"

namespace ledgerbus::consensus {

using ledger::Block;
using ledger::Transaction;
using ledger::VoteKind;

enum class Step { Propose, Prevote, Precommit };
std::string_view to_string(Step s);

struct Proposal {
  std::int64_t height = 0;
  std::int64_t round = 0;
  /// Round of the prevote quorum that justifies re-proposing a block, or -1.
  std::int64_t pol_round = -1;
  Block block;
  crypto::PublicKey proposer;
  crypto::Signature signature;

  bool operator==(const Proposal &) const = default;
};

std::string proposal_sign_bytes(std::int64_t height, std::int64_t round, std::int64_t pol_round,
                                const Hash256 &block_hash);
Proposal make_proposal(std::int64_t height, std::int64_t round, std::int64_t pol_round,
                       Block block, const crypto::KeyPair &proposer);
bool verify_proposal_signature(const Proposal &p);

struct Vote {
  VoteKind kind = VoteKind::Prevote;
  std::int64_t height = 0;
  std::int64_t round = 0;
  std::optional<Hash256> block_hash;  // nullopt is a NIL vote
  crypto::PublicKey voter;
  crypto::Signature signature;

  bool operator==(const Vote &) const = default;
};

Vote make_vote(VoteKind kind, std::int64_t height, std::int64_t round,
               std::optional<Hash256> block_hash, const crypto::KeyPair &voter);
bool verify_vote(const Vote &v);

/// Test hook for misbehaving proposers.
enum class Fault { None, ForgeVerdicts };

struct ConsensusConfig {
  std::size_t max_txs_per_block = 100;
  std::size_t mempool_capacity = 10000;
  std::int64_t timeout_propose_ms = 300;
  std::int64_t timeout_prevote_ms = 150;
  std::int64_t timeout_precommit_ms = 150;
  std::int64_t timeout_delta_ms = 100;
  /// Wait before asking a peer that is ahead for missing blocks.
  std::int64_t sync_delay_ms = 400;
  Fault fault = Fault::None;
};

enum class TimeoutKind { Propose, Prevote, Precommit, Sync };

struct Timeout {
  std::int64_t height = 0;
  std::int64_t round = 0;
  TimeoutKind kind = TimeoutKind::Propose;
};

/// Base duration plus a fixed increment per round.
std::int64_t timeout_ms(const ConsensusConfig &cfg, TimeoutKind kind, std::int64_t round);

std::size_t proposer_index(const crypto::ValidatorSet &validators, std::int64_t height,
                           std::int64_t round);
crypto::PublicKey proposer_for(const crypto::ValidatorSet &validators, std::int64_t height,
                               std::int64_t round);

enum class SubmitResult { Accepted, DuplicateTx, BadSignature, MempoolFull };
std::string_view to_string(SubmitResult r);

class NotProposer : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Everything the engine needs from its node. Calls are made from the engine's
/// event loop and must not re-enter the engine synchronously.
class ConsensusHost {
 public:
  virtual ~ConsensusHost() = default;
  virtual std::int64_t now_ms() = 0;
  virtual void broadcast_proposal(const Proposal &p) = 0;
  virtual void broadcast_vote(const Vote &v) = 0;
  virtual void gossip_transaction(const Transaction &tx) = 0;
  virtual void schedule_timeout(std::int64_t delay_ms, const Timeout &t) = 0;
  /// Called once per block, in height order, after the block is in the ledger.
  virtual void block_committed(const Block &b) = 0;
  virtual void request_block(std::size_t peer, std::int64_t height) = 0;
  /// Tells a lagging peer our committed height.
  virtual void send_status(std::size_t peer, std::int64_t committed_height) = 0;
};

struct ConsensusStats {
  std::uint64_t rounds_started = 0;
  std::uint64_t proposals_made = 0;
  std::uint64_t nil_prevotes = 0;
  std::uint64_t blocks_committed = 0;
  std::uint64_t blocks_synced = 0;
  std::uint64_t equivocations = 0;
  std::uint64_t rejected_messages = 0;
};

/// Round-based BFT engine for one validator: proposer rotation, prevote and
/// precommit quorums of more than two thirds, locking with re-proposal of the
/// last block that gathered a prevote quorum, and timeouts that grow with the
/// round number. Single-threaded; every input is one event.
class ConsensusEngine {
 public:
  ConsensusEngine(ConsensusConfig cfg, crypto::KeyPair key, ledger::LedgerStore &ledger,
                  const contract::ContractRegistry &registry, ConsensusHost &host);

  ConsensusEngine(const ConsensusEngine &) = delete;
  ConsensusEngine &operator=(const ConsensusEngine &) = delete;

  /// Creates genesis if needed and enters round 0 of the next height.
  void start();

  /// The DeliverTransaction entry point. Accepted transactions are gossiped
  /// when `gossip` is set.
  SubmitResult submit_transaction(Transaction tx, bool gossip = true);

  /// Builds, signs, broadcasts and records a proposal for the current round.
  /// Throws NotProposer when another validator owns this round.
  Proposal propose_block();

  void on_proposal(const Proposal &p, std::optional<std::size_t> from = std::nullopt);
  void on_vote(const Vote &v, std::optional<std::size_t> from = std::nullopt);
  void on_timeout(const Timeout &t);
  /// A committed block fetched from a peer during catch-up.
  void on_synced_block(const Block &b);
  /// A peer reported its committed height.
  void on_peer_height(std::size_t peer, std::int64_t committed_height);

  std::int64_t height() const { return height_; }
  std::int64_t round() const { return round_; }
  Step step() const { return step_; }
  bool active() const { return active_; }
  std::size_t mempool_size() const { return mempool_.size(); }
  std::vector<Transaction> mempool() const { return {mempool_.begin(), mempool_.end()}; }
  std::optional<Hash256> locked_hash() const { return locked_hash_; }
  std::int64_t locked_round() const { return locked_round_; }
  std::optional<std::size_t> validator_index() const { return my_index_; }
  const ConsensusStats &stats() const { return stats_; }
  const ConsensusConfig &config() const { return cfg_; }
  bool is_proposer() const;

 private:
  struct RoundVotes {
    std::map<std::size_t, Vote> prevotes;
    std::map<std::size_t, Vote> precommits;
  };

  void start_round(std::int64_t round);
  void activate();
  void try_propose();
  Block build_block();
  void process();
  bool step_rules();
  bool valid_block(const Hash256 &h);
  std::size_t count(std::int64_t round, VoteKind kind, const std::optional<Hash256> &h) const;
  void cast(VoteKind kind, const std::optional<Hash256> &h);
  void record_vote(std::size_t idx, const Vote &v);
  void commit(const Hash256 &h, std::int64_t round);
  void finish_height(const Block &b);
  void reset_height_state();
  void requeue_in_flight();
  void note_peer_height(std::optional<std::size_t> peer, std::int64_t committed_height);
  void schedule_sync();
  void request_sync();
  bool buffer_if_future(std::int64_t height, std::optional<std::size_t> from,
                        std::variant<Proposal, Vote> msg);

  ConsensusConfig cfg_;
  crypto::KeyPair key_;
  ledger::LedgerStore &ledger_;
  const contract::ContractRegistry &registry_;
  ConsensusHost &host_;
  const crypto::ValidatorSet &validators_;
  std::optional<std::size_t> my_index_;

  std::int64_t height_ = 0;
  std::int64_t round_ = 0;
  Step step_ = Step::Propose;
  bool active_ = false;
  bool proposed_this_round_ = false;
  bool in_process_ = false;

  std::optional<Hash256> locked_hash_;
  std::int64_t locked_round_ = -1;
  std::optional<Hash256> valid_hash_;
  std::int64_t valid_round_ = -1;

  std::map<std::int64_t, Proposal> proposals_;
  std::map<Hash256, Block> blocks_;
  std::map<Hash256, bool> validity_;
  std::map<std::int64_t, RoundVotes> votes_;
  std::set<std::int64_t> polka_seen_;
  std::map<std::int64_t, std::set<std::size_t>> round_senders_;

  std::deque<Transaction> mempool_;
  std::vector<Transaction> in_flight_;
  std::unordered_set<Hash256> pending_ids_;

  struct Buffered {
    std::optional<std::size_t> from;
    std::variant<Proposal, Vote> msg;
  };
  std::multimap<std::int64_t, Buffered> future_;
  std::map<std::size_t, std::int64_t> peer_heights_;
  std::map<std::size_t, std::int64_t> status_sent_;
  bool sync_scheduled_ = false;

  ConsensusStats stats_;
};

}  // namespace ledgerbus::consensus
