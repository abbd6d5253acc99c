/**
 * Copyright The ledgerbus Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "ledgerbus/consensus.hpp"

#include <algorithm>

namespace ledgerbus::consensus {

std::string_view to_string(Step s) {
  switch (s) {
    case Step::Propose:
      return "propose";
    case Step::Prevote:
      return "prevote";
    case Step::Precommit:
      return "precommit";
  }
  return "propose";
}

std::string_view to_string(SubmitResult r) {
  switch (r) {
    case SubmitResult::Accepted:
      return "Accepted";
    case SubmitResult::DuplicateTx:
      return "DuplicateTx";
    case SubmitResult::BadSignature:
      return "BadSignature";
    case SubmitResult::MempoolFull:
      return "MempoolFull";
  }
  return "Unknown";
}

std::string proposal_sign_bytes(std::int64_t height, std::int64_t round, std::int64_t pol_round,
                                const Hash256 &block_hash) {
  Value v = Value::object();
  v["kind"] = "proposal";
  v["height"] = height;
  v["round"] = round;
  v["pol_round"] = pol_round;
  v["hash"] = block_hash.hex();
  return canonical_serialize(v);
}

Proposal make_proposal(std::int64_t height, std::int64_t round, std::int64_t pol_round,
                       Block block, const crypto::KeyPair &proposer) {
  Proposal p;
  p.height = height;
  p.round = round;
  p.pol_round = pol_round;
  block.commit_round = 0;
  block.commit_signatures.clear();
  p.block = std::move(block);
  p.proposer = proposer.public_key;
  p.signature = crypto::sign(
      proposer.secret_key,
      proposal_sign_bytes(height, round, pol_round, ledger::block_hash(p.block.header)));
  return p;
}

bool verify_proposal_signature(const Proposal &p) {
  return crypto::verify(
      p.proposer,
      proposal_sign_bytes(p.height, p.round, p.pol_round, ledger::block_hash(p.block.header)),
      p.signature);
}

Vote make_vote(VoteKind kind, std::int64_t height, std::int64_t round,
               std::optional<Hash256> block_hash, const crypto::KeyPair &voter) {
  Vote v;
  v.kind = kind;
  v.height = height;
  v.round = round;
  v.block_hash = block_hash;
  v.voter = voter.public_key;
  v.signature = crypto::sign(voter.secret_key,
                             ledger::vote_sign_bytes(kind, height, round, block_hash, v.voter));
  return v;
}

bool verify_vote(const Vote &v) {
  return crypto::verify(v.voter,
                        ledger::vote_sign_bytes(v.kind, v.height, v.round, v.block_hash, v.voter),
                        v.signature);
}

std::int64_t timeout_ms(const ConsensusConfig &cfg, TimeoutKind kind, std::int64_t round) {
  switch (kind) {
    case TimeoutKind::Propose:
      return cfg.timeout_propose_ms + cfg.timeout_delta_ms * round;
    case TimeoutKind::Prevote:
      return cfg.timeout_prevote_ms + cfg.timeout_delta_ms * round;
    case TimeoutKind::Precommit:
      return cfg.timeout_precommit_ms + cfg.timeout_delta_ms * round;
    case TimeoutKind::Sync:
      return cfg.sync_delay_ms;
  }
  return cfg.timeout_propose_ms;
}

std::size_t proposer_index(const crypto::ValidatorSet &validators, std::int64_t height,
                           std::int64_t round) {
  return static_cast<std::size_t>((height + round) % static_cast<std::int64_t>(validators.size()));
}

crypto::PublicKey proposer_for(const crypto::ValidatorSet &validators, std::int64_t height,
                               std::int64_t round) {
  return validators[proposer_index(validators, height, round)].id;
}

namespace {

class ProcessGuard {
 public:
  explicit ProcessGuard(bool &flag) : flag_(flag), was_(flag) { flag_ = true; }
  ~ProcessGuard() { flag_ = was_; }
  ProcessGuard(const ProcessGuard &) = delete;
  ProcessGuard &operator=(const ProcessGuard &) = delete;

 private:
  bool &flag_;
  bool was_;
};

}  // namespace

ConsensusEngine::ConsensusEngine(ConsensusConfig cfg, crypto::KeyPair key,
                                 ledger::LedgerStore &ledger,
                                 const contract::ContractRegistry &registry,
                                 ConsensusHost &host)
    : cfg_(cfg),
      key_(key),
      ledger_(ledger),
      registry_(registry),
      host_(host),
      validators_(ledger.validators()),
      my_index_(validators_.index_of(key.public_key)) {}

void ConsensusEngine::start() {
  ledger_.ensure_genesis();
  height_ = ledger_.current_height() + 1;
  reset_height_state();
  active_ = !mempool_.empty();
  start_round(0);
  process();
}

bool ConsensusEngine::is_proposer() const {
  return my_index_ && *my_index_ == proposer_index(validators_, height_, round_);
}

SubmitResult ConsensusEngine::submit_transaction(Transaction tx, bool gossip) {
  if (!ledger::verify_transaction(tx)) return SubmitResult::BadSignature;
  if (pending_ids_.contains(tx.tx_id) || ledger_.contains_tx(tx.tx_id)) {
    return SubmitResult::DuplicateTx;
  }
  if (mempool_.size() >= cfg_.mempool_capacity) return SubmitResult::MempoolFull;
  tx.verdict = ledger::Verdict::Unchecked;
  pending_ids_.insert(tx.tx_id);
  mempool_.push_back(tx);
  if (gossip) host_.gossip_transaction(tx);
  activate();
  process();
  return SubmitResult::Accepted;
}

void ConsensusEngine::activate() {
  if (active_) return;
  active_ = true;
  host_.schedule_timeout(timeout_ms(cfg_, TimeoutKind::Propose, round_),
                         {height_, round_, TimeoutKind::Propose});
  try_propose();
}

void ConsensusEngine::start_round(std::int64_t round) {
  round_ = round;
  step_ = Step::Propose;
  proposed_this_round_ = false;
  ++stats_.rounds_started;
  requeue_in_flight();
  if (!active_) return;
  host_.schedule_timeout(timeout_ms(cfg_, TimeoutKind::Propose, round_),
                         {height_, round_, TimeoutKind::Propose});
  try_propose();
}

void ConsensusEngine::try_propose() {
  if (step_ != Step::Propose || proposed_this_round_ || !is_proposer()) return;
  if (!valid_hash_ && mempool_.empty()) return;
  propose_block();
}

Block ConsensusEngine::build_block() {
  Block b;
  while (!mempool_.empty() && b.txs.size() < cfg_.max_txs_per_block) {
    Transaction tx = std::move(mempool_.front());
    mempool_.pop_front();
    if (ledger_.contains_tx(tx.tx_id)) {
      pending_ids_.erase(tx.tx_id);
      continue;
    }
    in_flight_.push_back(tx);
    b.txs.push_back(std::move(tx));
  }
  auto verdicts = contract::assign_verdicts(registry_, b.txs);
  for (std::size_t i = 0; i < b.txs.size(); ++i) {
    b.txs[i].verdict = verdicts[i];
    if (cfg_.fault == Fault::ForgeVerdicts && verdicts[i] == ledger::Verdict::Rejected) {
      b.txs[i].verdict = ledger::Verdict::Approved;
    }
  }
  b.header.height = height_;
  b.header.prev_hash = ledger_.head_hash();
  b.header.merkle_root = ledger::merkle_root(b.txs);
  b.header.proposer = key_.public_key;
  b.header.block_ts = host_.now_ms();
  b.header.tx_count = static_cast<std::int64_t>(b.txs.size());
  return b;
}

Proposal ConsensusEngine::propose_block() {
  if (!is_proposer()) {
    throw NotProposer("validator is not the proposer for height " + std::to_string(height_) +
                      " round " + std::to_string(round_));
  }
  Block b;
  std::int64_t pol_round = -1;
  if (valid_hash_ && blocks_.contains(*valid_hash_)) {
    b = blocks_.at(*valid_hash_);
    pol_round = valid_round_;
  } else {
    b = build_block();
  }
  Proposal p = make_proposal(height_, round_, pol_round, std::move(b), key_);
  proposed_this_round_ = true;
  ++stats_.proposals_made;
  blocks_.try_emplace(ledger::block_hash(p.block.header), p.block);
  proposals_.insert_or_assign(round_, p);
  round_senders_[round_].insert(*my_index_);
  host_.broadcast_proposal(p);
  process();
  return p;
}

bool ConsensusEngine::buffer_if_future(std::int64_t height, std::optional<std::size_t> from,
                                       std::variant<Proposal, Vote> msg) {
  if (height <= height_) return false;
  note_peer_height(from, height - 1);
  if (height <= height_ + 2 && future_.size() < 4096) {
    future_.emplace(height, Buffered{from, std::move(msg)});
  }
  return true;
}

void ConsensusEngine::on_proposal(const Proposal &p, std::optional<std::size_t> from) {
  if (p.height < height_) {
    if (from && status_sent_[*from] != height_ - 1) {
      status_sent_[*from] = height_ - 1;
      host_.send_status(*from, height_ - 1);
    }
    return;
  }
  if (buffer_if_future(p.height, from, p)) return;

  const bool authentic = p.round >= 0 && p.pol_round >= -1 &&
                         p.proposer == proposer_for(validators_, p.height, p.round) &&
                         p.block.header.height == p.height && verify_proposal_signature(p);
  if (!authentic) {
    ++stats_.rejected_messages;
    if (p.round == round_ && step_ == Step::Propose) {
      activate();
      if (step_ == Step::Propose) cast(VoteKind::Prevote, std::nullopt);
    }
    process();
    return;
  }

  auto [it, inserted] = proposals_.try_emplace(p.round, p);
  if (!inserted) {
    if (!(it->second == p)) ++stats_.equivocations;
    return;
  }
  Block b = p.block;
  b.commit_round = 0;
  b.commit_signatures.clear();
  blocks_.try_emplace(ledger::block_hash(b.header), std::move(b));
  round_senders_[p.round].insert(proposer_index(validators_, p.height, p.round));
  activate();
  process();
}

void ConsensusEngine::on_vote(const Vote &v, std::optional<std::size_t> from) {
  if (v.height < height_) {
    if (from && status_sent_[*from] != height_ - 1) {
      status_sent_[*from] = height_ - 1;
      host_.send_status(*from, height_ - 1);
    }
    return;
  }
  if (buffer_if_future(v.height, from, v)) return;

  auto idx = validators_.index_of(v.voter);
  if (!idx || v.round < 0 || !verify_vote(v)) {
    ++stats_.rejected_messages;
    return;
  }
  auto &round_votes = votes_[v.round];
  auto &slot = v.kind == VoteKind::Prevote ? round_votes.prevotes : round_votes.precommits;
  auto [it, inserted] = slot.try_emplace(*idx, v);
  if (!inserted) {
    // A second, different signed vote for the same slot is equivocation.
    if (!(it->second == v)) ++stats_.equivocations;
    return;
  }
  round_senders_[v.round].insert(*idx);
  activate();
  process();
}

void ConsensusEngine::on_timeout(const Timeout &t) {
  if (t.kind == TimeoutKind::Sync) {
    sync_scheduled_ = false;
    request_sync();
    return;
  }
  if (t.height != height_ || t.round != round_) return;
  switch (t.kind) {
    case TimeoutKind::Propose:
      if (step_ == Step::Propose) cast(VoteKind::Prevote, std::nullopt);
      break;
    case TimeoutKind::Prevote:
      if (step_ == Step::Prevote) cast(VoteKind::Precommit, std::nullopt);
      break;
    case TimeoutKind::Precommit:
      if (step_ == Step::Precommit) start_round(round_ + 1);
      break;
    case TimeoutKind::Sync:
      break;
  }
  process();
}

void ConsensusEngine::on_synced_block(const Block &b) {
  if (b.header.height != height_) return;
  {
    ProcessGuard guard(in_process_);
    try {
      ledger_.append_block(b);
    } catch (const ledger::LedgerError &) {
      ++stats_.rejected_messages;
      return;
    }
    ++stats_.blocks_synced;
    finish_height(b);
  }
  request_sync();
  process();
}

void ConsensusEngine::on_peer_height(std::size_t peer, std::int64_t committed_height) {
  note_peer_height(peer, committed_height);
}

void ConsensusEngine::note_peer_height(std::optional<std::size_t> peer,
                                       std::int64_t committed_height) {
  if (!peer) return;
  auto &known = peer_heights_[*peer];
  known = std::max(known, committed_height);
  if (committed_height >= height_) schedule_sync();
}

void ConsensusEngine::schedule_sync() {
  if (sync_scheduled_) return;
  sync_scheduled_ = true;
  host_.schedule_timeout(cfg_.sync_delay_ms, {height_, round_, TimeoutKind::Sync});
}

void ConsensusEngine::request_sync() {
  std::optional<std::size_t> best;
  std::int64_t best_height = height_ - 1;
  for (const auto &[peer, h] : peer_heights_) {
    if (h > best_height) {
      best = peer;
      best_height = h;
    }
  }
  if (!best) return;
  host_.request_block(*best, height_);
  schedule_sync();
}

void ConsensusEngine::process() {
  if (in_process_) return;
  ProcessGuard guard(in_process_);
  while (step_rules()) {
  }
}

std::size_t ConsensusEngine::count(std::int64_t round, VoteKind kind,
                                   const std::optional<Hash256> &h) const {
  auto it = votes_.find(round);
  if (it == votes_.end()) return 0;
  const auto &slot = kind == VoteKind::Prevote ? it->second.prevotes : it->second.precommits;
  return static_cast<std::size_t>(std::count_if(
      slot.begin(), slot.end(), [&](const auto &entry) { return entry.second.block_hash == h; }));
}

bool ConsensusEngine::step_rules() {
  const std::size_t quorum = validators_.quorum();

  // Skip ahead when f+1 validators are already in a later round.
  for (auto it = round_senders_.upper_bound(round_); it != round_senders_.end(); ++it) {
    if (it->second.size() >= validators_.max_faults() + 1) {
      active_ = true;
      start_round(it->first);
      return true;
    }
  }

  if (step_ == Step::Propose) {
    if (auto it = proposals_.find(round_); it != proposals_.end()) {
      const Proposal &p = it->second;
      const Hash256 h = ledger::block_hash(p.block.header);
      if (p.pol_round < 0) {
        bool accept = valid_block(h) && (locked_round_ < 0 || locked_hash_ == h);
        cast(VoteKind::Prevote, accept ? std::optional(h) : std::nullopt);
        return true;
      }
      if (p.pol_round >= round_) {
        cast(VoteKind::Prevote, std::nullopt);
        return true;
      }
      if (count(p.pol_round, VoteKind::Prevote, h) >= quorum) {
        bool accept = valid_block(h) && (locked_round_ <= p.pol_round || locked_hash_ == h);
        cast(VoteKind::Prevote, accept ? std::optional(h) : std::nullopt);
        return true;
      }
    }
  }

  if (step_ != Step::Propose && !polka_seen_.contains(round_)) {
    if (auto it = proposals_.find(round_); it != proposals_.end()) {
      const Hash256 h = ledger::block_hash(it->second.block.header);
      if (count(round_, VoteKind::Prevote, h) >= quorum && valid_block(h)) {
        polka_seen_.insert(round_);
        valid_hash_ = h;
        valid_round_ = round_;
        if (step_ == Step::Prevote) {
          locked_hash_ = h;
          locked_round_ = round_;
          cast(VoteKind::Precommit, h);
        }
        return true;
      }
    }
  }

  if (step_ == Step::Prevote && count(round_, VoteKind::Prevote, std::nullopt) >= quorum) {
    cast(VoteKind::Precommit, std::nullopt);
    return true;
  }

  for (const auto &[round, round_votes] : votes_) {
    std::map<Hash256, std::size_t> tally;
    for (const auto &[idx, v] : round_votes.precommits) {
      if (v.block_hash) ++tally[*v.block_hash];
    }
    for (const auto &[h, n] : tally) {
      if (n >= quorum && blocks_.contains(h) && valid_block(h)) {
        commit(h, round);
        return true;
      }
    }
  }

  if (count(round_, VoteKind::Precommit, std::nullopt) >= quorum) {
    start_round(round_ + 1);
    return true;
  }

  if (step_ == Step::Propose && active_ && !proposed_this_round_ && is_proposer() &&
      (valid_hash_ || !mempool_.empty())) {
    try_propose();
    return proposed_this_round_;
  }
  return false;
}

bool ConsensusEngine::valid_block(const Hash256 &h) {
  if (auto it = validity_.find(h); it != validity_.end()) return it->second;
  const bool ok = [&] {
    auto it = blocks_.find(h);
    if (it == blocks_.end()) return false;
    const Block &b = it->second;
    if (b.header.height != height_) return false;
    if (b.header.prev_hash != ledger_.head_hash()) return false;
    if (b.header.tx_count != static_cast<std::int64_t>(b.txs.size())) return false;
    if (b.txs.size() > cfg_.max_txs_per_block) return false;
    if (ledger::merkle_root(b.txs) != b.header.merkle_root) return false;
    std::unordered_set<Hash256> ids;
    for (const auto &tx : b.txs) {
      if (!ledger::verify_transaction(tx)) return false;
      if (ledger_.contains_tx(tx.tx_id) || !ids.insert(tx.tx_id).second) return false;
    }
    // Every verdict must match this validator's own evaluation.
    auto expected = contract::assign_verdicts(registry_, b.txs);
    for (std::size_t i = 0; i < b.txs.size(); ++i) {
      if (b.txs[i].verdict != expected[i]) return false;
    }
    return true;
  }();
  validity_[h] = ok;
  return ok;
}

void ConsensusEngine::cast(VoteKind kind, const std::optional<Hash256> &h) {
  step_ = kind == VoteKind::Prevote ? Step::Prevote : Step::Precommit;
  const auto timer = kind == VoteKind::Prevote ? TimeoutKind::Prevote : TimeoutKind::Precommit;
  host_.schedule_timeout(timeout_ms(cfg_, timer, round_), {height_, round_, timer});
  if (!my_index_) return;
  if (kind == VoteKind::Prevote && !h) ++stats_.nil_prevotes;
  Vote v = make_vote(kind, height_, round_, h, key_);
  record_vote(*my_index_, v);
  host_.broadcast_vote(v);
}

void ConsensusEngine::record_vote(std::size_t idx, const Vote &v) {
  auto &round_votes = votes_[v.round];
  auto &slot = v.kind == VoteKind::Prevote ? round_votes.prevotes : round_votes.precommits;
  slot.try_emplace(idx, v);
  round_senders_[v.round].insert(idx);
}

void ConsensusEngine::commit(const Hash256 &h, std::int64_t round) {
  Block b = blocks_.at(h);
  b.commit_round = round;
  b.commit_signatures.clear();
  for (const auto &[idx, v] : votes_.at(round).precommits) {
    if (v.block_hash == h) b.commit_signatures.push_back({v.voter, v.signature});
  }
  try {
    ledger_.append_block(b);
  } catch (const ledger::LedgerError &) {
    validity_[h] = false;
    ++stats_.rejected_messages;
    return;
  }
  finish_height(b);
}

void ConsensusEngine::finish_height(const Block &b) {
  ++stats_.blocks_committed;
  std::unordered_set<Hash256> committed;
  for (const auto &tx : b.txs) {
    committed.insert(tx.tx_id);
    pending_ids_.erase(tx.tx_id);
  }
  std::erase_if(mempool_, [&](const Transaction &tx) { return committed.contains(tx.tx_id); });
  std::erase_if(in_flight_,
                [&](const Transaction &tx) { return committed.contains(tx.tx_id); });
  requeue_in_flight();

  host_.block_committed(b);

  height_ = b.header.height + 1;
  reset_height_state();
  active_ = !mempool_.empty();
  start_round(0);

  std::vector<Buffered> replay;
  for (auto it = future_.begin(); it != future_.end() && it->first <= height_;) {
    if (it->first == height_) replay.push_back(std::move(it->second));
    it = future_.erase(it);
  }
  for (auto &m : replay) {
    std::visit(
        [&](const auto &msg) {
          using T = std::decay_t<decltype(msg)>;
          if constexpr (std::is_same_v<T, Proposal>) {
            on_proposal(msg, m.from);
          } else {
            on_vote(msg, m.from);
          }
        },
        m.msg);
  }
}

void ConsensusEngine::reset_height_state() {
  round_ = 0;
  step_ = Step::Propose;
  proposed_this_round_ = false;
  locked_hash_.reset();
  locked_round_ = -1;
  valid_hash_.reset();
  valid_round_ = -1;
  proposals_.clear();
  blocks_.clear();
  validity_.clear();
  votes_.clear();
  polka_seen_.clear();
  round_senders_.clear();
}

void ConsensusEngine::requeue_in_flight() {
  for (auto it = in_flight_.rbegin(); it != in_flight_.rend(); ++it) {
    if (ledger_.contains_tx(it->tx_id)) {
      pending_ids_.erase(it->tx_id);
      continue;
    }
    mempool_.push_front(std::move(*it));
  }
  in_flight_.clear();
}

}  // namespace ledgerbus::consensus
