#include "fedledger/ledger/chain.hpp"

#include <array>

namespace fedledger::ledger {

namespace {

constexpr std::array<std::pair<TxKind, std::string_view>, 7> kKindNames{{
    {TxKind::Register, "Register"},
    {TxKind::ModelUpload, "ModelUpload"},
    {TxKind::GradientPublish, "GradientPublish"},
    {TxKind::Aggregate, "Aggregate"},
    {TxKind::UnlearnRequest, "UnlearnRequest"},
    {TxKind::UnlearnComplete, "UnlearnComplete"},
    {TxKind::ConfigSet, "ConfigSet"},
}};

Digest tx_leaf(const Transaction& tx) {
  Encoder enc;
  enc.u8(0x00);
  encode(enc, tx);
  return sha256(enc.buffer());
}

Digest hash_pair(const Digest& l, const Digest& r) {
  Encoder enc;
  enc.u8(0x01).digest(l).digest(r);
  return sha256(enc.buffer());
}

}  // namespace

std::string_view to_string(TxKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "Unknown";
}

std::optional<TxKind> tx_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

Transaction Transaction::make(std::uint64_t seq_no, TxKind kind, std::string actor_id,
                              std::optional<std::uint64_t> epoch, Bytes payload,
                              std::uint64_t timestamp) {
  Transaction tx;
  tx.seq_no = seq_no;
  tx.kind = kind;
  tx.actor_id = std::move(actor_id);
  tx.epoch = epoch;
  tx.payload_digest = sha256(payload);
  tx.payload = std::move(payload);
  tx.timestamp = timestamp;
  return tx;
}

void encode(Encoder& enc, const Transaction& tx) {
  enc.u64(tx.seq_no).u8(static_cast<std::uint8_t>(tx.kind)).str(tx.actor_id);
  enc.boolean(tx.epoch.has_value());
  if (tx.epoch) enc.u64(*tx.epoch);
  enc.digest(tx.payload_digest).bytes(tx.payload).u64(tx.timestamp);
}

Transaction decode_transaction(Decoder& dec) {
  Transaction tx;
  tx.seq_no = dec.u64();
  const auto kind = dec.u8();
  if (kind < 1 || kind > 7) throw DecodeError("unknown transaction kind");
  tx.kind = static_cast<TxKind>(kind);
  tx.actor_id = dec.str();
  if (dec.boolean()) tx.epoch = dec.u64();
  tx.payload_digest = dec.digest();
  tx.payload = dec.bytes();
  tx.timestamp = dec.u64();
  return tx;
}

Digest merkle_root(std::span<const Transaction> txs) {
  if (txs.empty()) return Digest::zero();
  std::vector<Digest> level;
  level.reserve(txs.size());
  for (const auto& tx : txs) level.push_back(tx_leaf(tx));
  while (level.size() > 1) {
    std::vector<Digest> next;
    next.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) {
      const auto& right = i + 1 < level.size() ? level[i + 1] : level[i];
      next.push_back(hash_pair(level[i], right));
    }
    level = std::move(next);
  }
  return level.front();
}

Digest Block::compute_hash() const {
  Encoder enc;
  enc.u64(height).digest(prev_hash).digest(merkle_root(txs));
  return sha256(enc.buffer());
}

Bytes encode_block(const Block& block) {
  Encoder enc;
  enc.u64(block.height).digest(block.prev_hash).u32(static_cast<std::uint32_t>(block.txs.size()));
  for (const auto& tx : block.txs) encode(enc, tx);
  enc.digest(block.block_hash);
  return std::move(enc).take();
}

Block decode_block(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  Block b;
  b.height = dec.u64();
  b.prev_hash = dec.digest();
  const auto n = dec.u32();
  // An encoded transaction is at least 58 bytes.
  if (n > dec.remaining() / 58) throw DecodeError("transaction count exceeds input");
  b.txs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) b.txs.push_back(decode_transaction(dec));
  b.block_hash = dec.digest();
  dec.expect_end();
  return b;
}

std::uint64_t Chain::next_seq() const {
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
    if (!it->txs.empty()) return it->txs.back().seq_no + 1;
  return 0;
}

std::size_t Chain::tx_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += b.txs.size();
  return n;
}

const Transaction* Chain::find(std::uint64_t seq_no) const {
  for (const auto& b : blocks_) {
    if (b.txs.empty() || b.txs.back().seq_no < seq_no) continue;
    for (const auto& tx : b.txs)
      if (tx.seq_no == seq_no) return &tx;
    return nullptr;
  }
  return nullptr;
}

Chain Chain::from_blocks(std::vector<Block> blocks) {
  Chain c;
  c.blocks_ = std::move(blocks);
  return c;
}

Chain append_block(Chain chain, std::vector<Transaction> txs) {
  if (txs.empty()) throw LedgerError(LedgerErrc::EmptyTxList, "cannot append an empty block");
  std::uint64_t expected = chain.next_seq();
  for (const auto& tx : txs) {
    if (!tx.digest_ok()) {
      throw LedgerError(LedgerErrc::DigestMismatch,
                        "payload digest mismatch at seq " + std::to_string(tx.seq_no), tx.seq_no);
    }
    if (tx.seq_no != expected) {
      throw LedgerError(LedgerErrc::SequenceGap,
                        "sequence gap: expected " + std::to_string(expected) + ", got " +
                            std::to_string(tx.seq_no),
                        expected, tx.seq_no);
    }
    ++expected;
  }
  Block block;
  block.height = chain.blocks_.size();
  block.prev_hash = chain.tip_hash();
  block.txs = std::move(txs);
  block.block_hash = block.compute_hash();
  chain.blocks_.push_back(std::move(block));
  return chain;
}

VerificationReport verify_chain(const Chain& chain) {
  auto bad = [](std::uint64_t h, std::string why) {
    return VerificationReport{false, h, std::move(why)};
  };
  Digest prev = Digest::zero();
  std::optional<std::uint64_t> last_seq;
  const auto& blocks = chain.blocks();
  for (std::size_t h = 0; h < blocks.size(); ++h) {
    const Block& b = blocks[h];
    if (b.height != h) return bad(h, "height mismatch");
    if (b.prev_hash != prev) return bad(h, "prev_hash does not link to predecessor");
    if (b.txs.empty()) return bad(h, "empty block");
    for (const auto& tx : b.txs) {
      if (!tx.digest_ok()) return bad(h, "payload digest mismatch at seq " + std::to_string(tx.seq_no));
      const std::uint64_t want = last_seq ? *last_seq + 1 : 0;
      if (tx.seq_no != want) return bad(h, "sequence gap at seq " + std::to_string(tx.seq_no));
      last_seq = tx.seq_no;
    }
    if (b.compute_hash() != b.block_hash) return bad(h, "block hash does not recompute");
    prev = b.block_hash;
  }
  return {};
}

VerificationReport verify_encoded(std::span<const Bytes> block_encodings) {
  std::vector<Block> blocks;
  blocks.reserve(block_encodings.size());
  for (std::size_t h = 0; h < block_encodings.size(); ++h) {
    try {
      blocks.push_back(decode_block(block_encodings[h]));
    } catch (const DecodeError& e) {
      // Earlier blocks may already be inconsistent; report whichever comes first.
      auto prefix = verify_chain(Chain::from_blocks(std::move(blocks)));
      if (!prefix.ok) return prefix;
      return {false, h, std::string("block does not decode: ") + e.what()};
    }
  }
  return verify_chain(Chain::from_blocks(std::move(blocks)));
}

std::vector<Transaction> query(const Chain& chain, const TxFilter& filter) {
  std::vector<Transaction> out;
  for (const auto& b : chain.blocks()) {
    for (const auto& tx : b.txs) {
      if (filter.kind && tx.kind != *filter.kind) continue;
      if (filter.actor_id && tx.actor_id != *filter.actor_id) continue;
      if (filter.epoch_range) {
        if (!tx.epoch) continue;
        if (*tx.epoch < filter.epoch_range->first || *tx.epoch > filter.epoch_range->second) continue;
      }
      out.push_back(tx);
    }
  }
  return out;
}

}  // namespace fedledger::ledger
