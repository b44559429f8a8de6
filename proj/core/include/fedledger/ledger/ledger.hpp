#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <vector>

#include "fedledger/ledger/chain.hpp"

namespace fedledger::ledger {

struct CommitReceipt {
  bool approved = false;
  std::uint64_t latency_ticks = 0;
  std::size_t n_endorsers = 0;
  std::size_t n_txs = 0;
};

/// Fault-injection hook: return true to make `endorser` reject the batch.
using EndorsementFault = std::function<bool(std::size_t endorser, std::span<const Transaction>)>;

struct ConsensusConfig {
  std::uint64_t consensus_cost = 3;
  EndorsementFault fault;
};

/// Endorsement stub: every endorser approves unless the fault hook rejects.
/// Latency does not depend on the number of endorsers.
CommitReceipt consensus_commit(std::span<const Transaction> pending, std::size_t n_endorsers,
                               const ConsensusConfig& config = {});

struct LedgerConfig {
  std::size_t n_endorsers = 4;
  ConsensusConfig consensus;
  /// Contract transitions grouped into one block. 1 = one block per transition.
  std::size_t transitions_per_block = 1;
};

/// Single-writer ledger. Each submitted transition is endorsed immediately;
/// block formation may be deferred when batching is enabled. Readers get a
/// snapshot of the committed prefix.
class Ledger {
 public:
  explicit Ledger(LedgerConfig config = {});
  /// Adopts an existing chain (e.g. an import); throws if it fails verification.
  Ledger(LedgerConfig config, Chain existing);

  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  /// seq_no for the next transaction, counting buffered ones.
  std::uint64_t next_seq() const;

  /// Endorses and records one transition's transactions. Nothing is
  /// recorded if endorsement or validation fails.
  CommitReceipt submit(std::vector<Transaction> txs);
  /// Seals any buffered transitions into a block.
  void flush();

  Chain snapshot() const;
  std::size_t height() const;
  const std::vector<CommitReceipt>& receipts() const { return receipts_; }
  const LedgerConfig& config() const { return config_; }
  void set_fault(EndorsementFault fault);

 private:
  void seal_locked();

  LedgerConfig config_;
  mutable std::shared_mutex mu_;
  Chain chain_;
  std::vector<Transaction> pending_;
  std::size_t pending_transitions_ = 0;
  std::vector<CommitReceipt> receipts_;
};

}  // namespace fedledger::ledger
