#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fedledger/ledger/blob_store.hpp"
#include "fedledger/ledger/chain.hpp"
#include "fedledger/ledger/chain_io.hpp"
#include "fedledger/ledger/ledger.hpp"

using namespace fedledger;
using namespace fedledger::ledger;

namespace {

Bytes bytes_of(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::vector<Transaction> oracle_txs() {
  return {Transaction::make(0, TxKind::Register, "a", std::nullopt, bytes_of("x"), 10),
          Transaction::make(1, TxKind::GradientPublish, "b", 5, bytes_of("yy"), 11),
          Transaction::make(2, TxKind::Aggregate, "c", std::nullopt, {}, 12)};
}

Chain build_chain(std::size_t blocks, std::size_t per_block, std::mt19937_64& rng) {
  Chain c;
  std::uint64_t seq = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<Transaction> txs;
    for (std::size_t i = 0; i < per_block; ++i) {
      Bytes payload(rng() % 12);
      for (auto& v : payload) v = static_cast<std::uint8_t>(rng());
      std::optional<std::uint64_t> epoch;
      if (rng() % 2) epoch = rng() % 9;
      txs.push_back(Transaction::make(seq++, static_cast<TxKind>(1 + rng() % 7), "n" + std::to_string(rng() % 3),
                                      epoch, std::move(payload), rng() % 100));
    }
    c = append_block(std::move(c), std::move(txs));
  }
  return c;
}

std::vector<Bytes> encodings(const Chain& c) {
  std::vector<Bytes> out;
  for (const auto& b : c.blocks()) out.push_back(encode_block(b));
  return out;
}

}  // namespace

// Root and hash computed by an independent Python implementation of the
// leaf/node domain-separated tree over the canonical tx encoding.
TEST(Merkle, MatchesIndependentOracle) {
  const auto txs = oracle_txs();
  EXPECT_EQ(merkle_root(txs).hex(), "10c2f2cbd902dbc79d1965cd18ddd99a6a9bb2f5f6dc1623a8b830a6e41898ae");
  const auto chain = append_block(Chain{}, txs);
  EXPECT_EQ(chain.blocks()[0].block_hash.hex(),
            "d3a88b90d405fd119c4eeae8d56d67e709601a665d7f6e9be1209d0ae01adaa9");
}

TEST(Merkle, EmptyIsZero) { EXPECT_TRUE(merkle_root({}).is_zero()); }

TEST(Chain, AppendLinksBlocks) {
  std::mt19937_64 rng(1);
  const auto c = build_chain(4, 3, rng);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_TRUE(c.blocks()[0].prev_hash.is_zero());
  for (std::size_t h = 1; h < c.size(); ++h) EXPECT_EQ(c.blocks()[h].prev_hash, c.blocks()[h - 1].block_hash);
  EXPECT_EQ(c.next_seq(), 12u);
  EXPECT_EQ(c.tx_count(), 12u);
  EXPECT_TRUE(verify_chain(c).ok);
  ASSERT_NE(c.find(7), nullptr);
  EXPECT_EQ(c.find(7)->seq_no, 7u);
  EXPECT_EQ(c.find(12), nullptr);
}

TEST(Chain, AppendRejectsBadBatches) {
  std::mt19937_64 rng(2);
  auto c = build_chain(1, 2, rng);
  try {
    append_block(c, {});
    FAIL();
  } catch (const LedgerError& e) {
    EXPECT_EQ(e.code(), LedgerErrc::EmptyTxList);
  }
  auto gap = Transaction::make(5, TxKind::Register, "z", std::nullopt, {}, 0);
  try {
    append_block(c, {gap});
    FAIL();
  } catch (const LedgerError& e) {
    EXPECT_EQ(e.code(), LedgerErrc::SequenceGap);
    EXPECT_EQ(e.first(), 2u);
    EXPECT_EQ(e.second(), 5u);
  }
  auto bad = Transaction::make(2, TxKind::Register, "z", std::nullopt, bytes_of("p"), 0);
  bad.payload = bytes_of("q");
  try {
    append_block(c, {bad});
    FAIL();
  } catch (const LedgerError& e) {
    EXPECT_EQ(e.code(), LedgerErrc::DigestMismatch);
    EXPECT_EQ(e.first(), 2u);
  }
}

TEST(Chain, BlockCodecRoundTrip) {
  std::mt19937_64 rng(3);
  const auto c = build_chain(3, 4, rng);
  for (const auto& b : c.blocks()) EXPECT_EQ(decode_block(encode_block(b)), b);
  auto enc = encode_block(c.blocks()[0]);
  enc.push_back(0);
  EXPECT_THROW(decode_block(enc), DecodeError);
  enc.resize(enc.size() - 2);
  EXPECT_THROW(decode_block(enc), DecodeError);
}

TEST(Chain, StructuralTamperDetectedAtHeight) {
  std::mt19937_64 rng(4);
  const auto good = build_chain(5, 2, rng);
  {
    auto blocks = good.blocks();
    blocks[2].txs[0].timestamp += 1;
    const auto r = verify_chain(Chain::from_blocks(blocks));
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(r.first_bad_height, 2u);
  }
  {
    auto blocks = good.blocks();
    blocks[3].txs[1].payload.push_back(1);
    const auto r = verify_chain(Chain::from_blocks(blocks));
    EXPECT_EQ(r.first_bad_height, 3u);
  }
  {
    // Recomputing the hash moves the failure to the next link.
    auto blocks = good.blocks();
    blocks[1].txs[0].timestamp += 1;
    blocks[1].block_hash = blocks[1].compute_hash();
    const auto r = verify_chain(Chain::from_blocks(blocks));
    EXPECT_EQ(r.first_bad_height, 2u);
  }
  {
    auto blocks = good.blocks();
    blocks.erase(blocks.begin() + 1);
    EXPECT_EQ(verify_chain(Chain::from_blocks(blocks)).first_bad_height, 1u);
  }
  {
    auto blocks = good.blocks();
    std::swap(blocks[0].txs[0], blocks[0].txs[1]);
    blocks[0].block_hash = blocks[0].compute_hash();
    EXPECT_EQ(verify_chain(Chain::from_blocks(blocks)).first_bad_height, 0u);
  }
}

// Every byte of every block, every alternative value.
TEST(Chain, ExhaustiveSingleByteMutationsOfSmallChain) {
  std::mt19937_64 rng(5);
  const auto c = build_chain(3, 2, rng);
  auto enc = encodings(c);
  ASSERT_TRUE(verify_encoded(enc).ok);
  std::size_t checked = 0;
  for (std::size_t h = 0; h < enc.size(); ++h) {
    for (std::size_t i = 0; i < enc[h].size(); ++i) {
      const auto orig = enc[h][i];
      for (int v = 0; v < 256; ++v) {
        if (v == orig) continue;
        enc[h][i] = static_cast<std::uint8_t>(v);
        const auto r = verify_encoded(enc);
        ASSERT_FALSE(r.ok) << "block " << h << " byte " << i;
        ASSERT_EQ(r.first_bad_height, h) << "block " << h << " byte " << i;
        ++checked;
      }
      enc[h][i] = orig;
    }
  }
  EXPECT_GT(checked, 1000u);
}

TEST(Chain, QueryFilters) {
  Chain c;
  c = append_block(c, {Transaction::make(0, TxKind::Register, "a", std::nullopt, {}, 0),
                       Transaction::make(1, TxKind::GradientPublish, "a", 0, {}, 0)});
  c = append_block(c, {Transaction::make(2, TxKind::GradientPublish, "b", 1, {}, 0),
                       Transaction::make(3, TxKind::GradientPublish, "a", 2, {}, 0)});
  EXPECT_EQ(query(c).size(), 4u);
  EXPECT_EQ(query(c, {TxKind::GradientPublish, {}, {}}).size(), 3u);
  EXPECT_EQ(query(c, {{}, std::string("a"), {}}).size(), 3u);
  const auto in = query(c, {TxKind::GradientPublish, std::string("a"), std::pair<std::uint64_t, std::uint64_t>{1, 2}});
  ASSERT_EQ(in.size(), 1u);
  EXPECT_EQ(in[0].seq_no, 3u);
  EXPECT_TRUE(query(c, {{}, {}, std::pair<std::uint64_t, std::uint64_t>{5, 9}}).empty());
}

TEST(Consensus, RejectionAndEndorserCount) {
  const std::vector<Transaction> txs{Transaction::make(0, TxKind::Register, "a", std::nullopt, {}, 0)};
  const auto ok = consensus_commit(txs, 4, {3, {}});
  EXPECT_TRUE(ok.approved);
  EXPECT_EQ(ok.latency_ticks, 3u);
  EXPECT_EQ(consensus_commit(txs, 9, {3, {}}).latency_ticks, 3u);
  try {
    consensus_commit(txs, 0, {});
    FAIL();
  } catch (const LedgerError& e) {
    EXPECT_EQ(e.code(), LedgerErrc::InvalidEndorserCount);
  }
  ConsensusConfig cc{3, [](std::size_t e, std::span<const Transaction>) { return e == 2; }};
  try {
    consensus_commit(txs, 4, cc);
    FAIL();
  } catch (const LedgerError& e) {
    EXPECT_EQ(e.code(), LedgerErrc::EndorsementRejected);
    EXPECT_EQ(e.first(), 2u);
  }
}

TEST(Ledger, FailedSubmitChangesNothing) {
  Ledger l;
  l.submit({Transaction::make(0, TxKind::Register, "a", std::nullopt, {}, 0)});
  const auto before = l.snapshot();
  l.set_fault([](std::size_t, std::span<const Transaction>) { return true; });
  EXPECT_THROW(l.submit({Transaction::make(1, TxKind::Register, "b", std::nullopt, {}, 0)}), LedgerError);
  EXPECT_EQ(l.snapshot(), before);
  EXPECT_EQ(l.next_seq(), 1u);
  l.set_fault({});
  EXPECT_THROW(l.submit({Transaction::make(3, TxKind::Register, "b", std::nullopt, {}, 0)}), LedgerError);
  EXPECT_EQ(l.snapshot(), before);
  EXPECT_EQ(l.receipts().size(), 1u);
}

TEST(Ledger, BatchedBlocksSealOnThresholdAndFlush) {
  LedgerConfig cfg;
  cfg.transitions_per_block = 3;
  Ledger l(cfg);
  for (std::uint64_t i = 0; i < 7; ++i) {
    l.submit({Transaction::make(i, TxKind::Register, "a" + std::to_string(i), std::nullopt, {}, 0)});
  }
  EXPECT_EQ(l.height(), 2u);
  EXPECT_EQ(l.next_seq(), 7u);
  EXPECT_EQ(l.receipts().size(), 7u);
  l.flush();
  EXPECT_EQ(l.height(), 3u);
  EXPECT_TRUE(verify_chain(l.snapshot()).ok);
}

TEST(Ledger, AdoptRequiresVerifiedChain) {
  std::mt19937_64 rng(6);
  auto c = build_chain(2, 2, rng);
  Ledger adopted({}, c);
  EXPECT_EQ(adopted.next_seq(), 4u);
  auto blocks = c.blocks();
  blocks[1].txs[0].timestamp ^= 1;
  EXPECT_THROW(Ledger({}, Chain::from_blocks(blocks)), std::runtime_error);
}

TEST(ChainIo, BinaryAndJsonlExports) {
  std::mt19937_64 rng(7);
  const auto c = build_chain(3, 2, rng);
  const auto dir = std::filesystem::temp_directory_path() / "fedledger_chain_io";
  std::filesystem::create_directories(dir);
  write_chain_bin(dir / "chain.bin", c);
  EXPECT_EQ(read_chain_bin(dir / "chain.bin"), c);
  EXPECT_EQ(read_chain_encodings(dir / "chain.bin"), encodings(c));
  {
    std::ifstream in(dir / "chain.bin", std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    EXPECT_EQ(std::string(magic, 8), "FLCHAIN1");
  }
  write_chain_jsonl(dir / "chain.jsonl", c);
  std::ifstream in(dir / "chain.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    EXPECT_NE(line.find("\"block_hash\""), std::string::npos);
  }
  EXPECT_EQ(lines, 3u);
}

TEST(BlobStore, ContentAddressedAndRejectsMismatchedFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "fedledger_blobs_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  BlobStore store(dir);
  const auto d = store.put(bytes_of("hello"));
  EXPECT_EQ(d, sha256(std::string_view("hello")));
  EXPECT_TRUE(std::filesystem::exists(dir / d.hex()));
  EXPECT_EQ(*store.get(d), bytes_of("hello"));
  EXPECT_FALSE(store.get(sha256(std::string_view("nope"))).has_value());

  std::ofstream(dir / sha256(std::string_view("a")).hex()) << "b";
  BlobStore fresh;
  EXPECT_EQ(fresh.load_dir(dir), 1u);
  EXPECT_TRUE(fresh.contains(d));
  EXPECT_EQ(fresh.size(), 1u);
}
