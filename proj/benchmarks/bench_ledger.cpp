#include <benchmark/benchmark.h>

#include <random>

#include "fedledger/ledger/chain.hpp"

using namespace fedledger;
using namespace fedledger::ledger;

namespace {

std::vector<Transaction> make_txs(std::uint64_t first_seq, std::size_t n, std::size_t payload_bytes) {
  std::mt19937_64 rng(first_seq);
  std::vector<Transaction> txs;
  for (std::size_t i = 0; i < n; ++i) {
    Bytes payload(payload_bytes);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    txs.push_back(Transaction::make(first_seq + i, TxKind::GradientPublish, "C" + std::to_string(i % 5), i,
                                    std::move(payload), i));
  }
  return txs;
}

Chain make_chain(std::size_t blocks, std::size_t txs_per_block) {
  Chain c;
  for (std::size_t b = 0; b < blocks; ++b) c = append_block(c, make_txs(c.next_seq(), txs_per_block, 96));
  return c;
}

}  // namespace

static void BM_Sha256(benchmark::State& state) {
  const Bytes data(static_cast<std::size_t>(state.range(0)), 0xab);
  for (auto _ : state) benchmark::DoNotOptimize(sha256(data));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(64)->Arg(4096)->Arg(1 << 20);

static void BM_MerkleRoot(benchmark::State& state) {
  const auto txs = make_txs(0, static_cast<std::size_t>(state.range(0)), 96);
  for (auto _ : state) benchmark::DoNotOptimize(merkle_root(txs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MerkleRoot)->Arg(1)->Arg(16)->Arg(256)->Arg(4096);

static void BM_AppendBlock(benchmark::State& state) {
  const auto base = make_chain(16, 8);
  const auto txs = make_txs(base.next_seq(), static_cast<std::size_t>(state.range(0)), 96);
  for (auto _ : state) benchmark::DoNotOptimize(append_block(base, txs));
}
BENCHMARK(BM_AppendBlock)->Arg(1)->Arg(64);

static void BM_VerifyChain(benchmark::State& state) {
  const auto c = make_chain(static_cast<std::size_t>(state.range(0)), 16);
  for (auto _ : state) benchmark::DoNotOptimize(verify_chain(c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VerifyChain)->Arg(10)->Arg(100)->Arg(1000);

static void BM_BlockCodec(benchmark::State& state) {
  const auto c = make_chain(1, static_cast<std::size_t>(state.range(0)));
  const auto& block = c.blocks().front();
  for (auto _ : state) benchmark::DoNotOptimize(decode_block(encode_block(block)));
}
BENCHMARK(BM_BlockCodec)->Arg(16)->Arg(256);
