#include "fedledger/ledger/ledger.hpp"

#include <string>

namespace fedledger::ledger {

CommitReceipt consensus_commit(std::span<const Transaction> pending, std::size_t n_endorsers,
                               const ConsensusConfig& config) {
  if (n_endorsers == 0) {
    throw LedgerError(LedgerErrc::InvalidEndorserCount, "at least one endorser is required");
  }
  if (config.fault) {
    for (std::size_t e = 0; e < n_endorsers; ++e) {
      if (config.fault(e, pending)) {
        throw LedgerError(LedgerErrc::EndorsementRejected,
                          "endorser " + std::to_string(e) + " rejected the transaction batch", e);
      }
    }
  }
  return {true, config.consensus_cost, n_endorsers, pending.size()};
}

Ledger::Ledger(LedgerConfig config) : config_(std::move(config)) {
  if (config_.transitions_per_block == 0) config_.transitions_per_block = 1;
}

Ledger::Ledger(LedgerConfig config, Chain existing) : Ledger(std::move(config)) {
  const auto report = verify_chain(existing);
  if (!report.ok) {
    throw std::runtime_error("refusing to adopt chain: height " +
                             std::to_string(report.first_bad_height.value_or(0)) + ": " +
                             report.reason);
  }
  chain_ = std::move(existing);
}

std::uint64_t Ledger::next_seq() const {
  std::shared_lock lock(mu_);
  return chain_.next_seq() + pending_.size();
}

CommitReceipt Ledger::submit(std::vector<Transaction> txs) {
  std::unique_lock lock(mu_);
  if (txs.empty()) throw LedgerError(LedgerErrc::EmptyTxList, "cannot submit an empty transition");
  std::uint64_t expected = chain_.next_seq() + pending_.size();
  for (const auto& tx : txs) {
    if (!tx.digest_ok()) {
      throw LedgerError(LedgerErrc::DigestMismatch,
                        "payload digest mismatch at seq " + std::to_string(tx.seq_no), tx.seq_no);
    }
    if (tx.seq_no != expected) {
      throw LedgerError(LedgerErrc::SequenceGap, "sequence gap", expected, tx.seq_no);
    }
    ++expected;
  }
  CommitReceipt receipt = consensus_commit(txs, config_.n_endorsers, config_.consensus);
  pending_.insert(pending_.end(), std::make_move_iterator(txs.begin()),
                  std::make_move_iterator(txs.end()));
  ++pending_transitions_;
  if (pending_transitions_ >= config_.transitions_per_block) seal_locked();
  receipts_.push_back(receipt);
  return receipt;
}

void Ledger::flush() {
  std::unique_lock lock(mu_);
  seal_locked();
}

void Ledger::seal_locked() {
  if (pending_.empty()) return;
  chain_ = append_block(std::move(chain_), std::move(pending_));
  pending_.clear();
  pending_transitions_ = 0;
}

Chain Ledger::snapshot() const {
  std::shared_lock lock(mu_);
  return chain_;
}

std::size_t Ledger::height() const {
  std::shared_lock lock(mu_);
  return chain_.size();
}

void Ledger::set_fault(EndorsementFault fault) {
  std::unique_lock lock(mu_);
  config_.consensus.fault = std::move(fault);
}

}  // namespace fedledger::ledger
