#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedledger/common/bytes.hpp"

namespace fedledger::ledger {

enum class TxKind : std::uint8_t {
  Register = 1,
  ModelUpload = 2,
  GradientPublish = 3,
  Aggregate = 4,
  UnlearnRequest = 5,
  UnlearnComplete = 6,
  ConfigSet = 7,
};

std::string_view to_string(TxKind kind);
std::optional<TxKind> tx_kind_from_string(std::string_view name);

struct Transaction {
  std::uint64_t seq_no = 0;
  TxKind kind = TxKind::Register;
  std::string actor_id;
  std::optional<std::uint64_t> epoch;
  Digest payload_digest;
  Bytes payload;
  std::uint64_t timestamp = 0;

  /// Builds a transaction whose payload_digest is computed from `payload`.
  static Transaction make(std::uint64_t seq_no, TxKind kind, std::string actor_id,
                          std::optional<std::uint64_t> epoch, Bytes payload,
                          std::uint64_t timestamp);

  bool digest_ok() const { return sha256(payload) == payload_digest; }

  bool operator==(const Transaction&) const = default;
};

void encode(Encoder& enc, const Transaction& tx);
Transaction decode_transaction(Decoder& dec);

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash;
  std::vector<Transaction> txs;
  Digest block_hash;

  /// Hash over (height, prev_hash, merkle root of txs).
  Digest compute_hash() const;

  bool operator==(const Block&) const = default;
};

/// Binary merkle root over the canonical encodings of `txs`; an odd node is
/// paired with itself.
Digest merkle_root(std::span<const Transaction> txs);

Bytes encode_block(const Block& block);
/// Strict decoder: rejects truncated input, trailing bytes and unknown tags.
Block decode_block(std::span<const std::uint8_t> bytes);

class Chain {
 public:
  Chain() = default;

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  Digest tip_hash() const { return blocks_.empty() ? Digest::zero() : blocks_.back().block_hash; }
  /// seq_no the next appended transaction must carry.
  std::uint64_t next_seq() const;
  std::size_t tx_count() const;
  /// Locates a transaction by sequence number.
  const Transaction* find(std::uint64_t seq_no) const;

  /// Unchecked constructor used by importers and tamper tests; run
  /// verify_chain on the result before trusting it.
  static Chain from_blocks(std::vector<Block> blocks);

  bool operator==(const Chain&) const = default;

 private:
  friend Chain append_block(Chain chain, std::vector<Transaction> txs);
  std::vector<Block> blocks_;
};

enum class LedgerErrc {
  EmptyTxList,
  DigestMismatch,
  SequenceGap,
  EndorsementRejected,
  InvalidEndorserCount,
};

class LedgerError : public std::runtime_error {
 public:
  LedgerError(LedgerErrc code, std::string what, std::uint64_t a = 0, std::uint64_t b = 0)
      : std::runtime_error(std::move(what)), code_(code), a_(a), b_(b) {}

  LedgerErrc code() const { return code_; }
  /// DigestMismatch: seq_no. SequenceGap: expected. EndorsementRejected: endorser.
  std::uint64_t first() const { return a_; }
  /// SequenceGap: got.
  std::uint64_t second() const { return b_; }

 private:
  LedgerErrc code_;
  std::uint64_t a_;
  std::uint64_t b_;
};

/// Returns `chain` extended by exactly one block holding `txs`.
Chain append_block(Chain chain, std::vector<Transaction> txs);

struct VerificationReport {
  bool ok = true;
  std::optional<std::uint64_t> first_bad_height;
  std::string reason;
};

VerificationReport verify_chain(const Chain& chain);
/// Decodes and verifies raw block encodings; a block that fails to decode is
/// reported as the first bad height.
VerificationReport verify_encoded(std::span<const Bytes> block_encodings);

struct TxFilter {
  std::optional<TxKind> kind;
  std::optional<std::string> actor_id;
  /// Inclusive epoch range; transactions without an epoch never match.
  std::optional<std::pair<std::uint64_t, std::uint64_t>> epoch_range;
};

std::vector<Transaction> query(const Chain& chain, const TxFilter& filter = {});

}  // namespace fedledger::ledger
