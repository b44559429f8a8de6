#include "fedledger/ledger/chain_io.hpp"

#include <fstream>
#include <iterator>

#include "json.hpp"

namespace fedledger::ledger {

namespace {

constexpr std::string_view kMagic = "FLCHAIN1";

Bytes slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

void write_chain_bin(const std::filesystem::path& path, const Chain& chain) {
  Encoder enc;
  enc.raw(std::span(reinterpret_cast<const std::uint8_t*>(kMagic.data()), kMagic.size()));
  enc.u64(chain.size());
  for (const auto& b : chain.blocks()) {
    const Bytes block = encode_block(b);
    enc.u64(block.size()).raw(block);
  }
  spit(path, enc.buffer());
}

std::vector<Bytes> read_chain_encodings(const std::filesystem::path& path) {
  const Bytes data = slurp(path);
  Decoder dec(data);
  const auto magic = dec.raw(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw DecodeError("not a chain file: bad magic");
  }
  const auto count = dec.u64();
  if (count > dec.remaining() / 8) throw DecodeError("block count exceeds file size");
  std::vector<Bytes> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = dec.u64();
    const auto raw = dec.raw(len);
    out.emplace_back(raw.begin(), raw.end());
  }
  dec.expect_end();
  return out;
}

Chain read_chain_bin(const std::filesystem::path& path) {
  std::vector<Block> blocks;
  for (const auto& enc : read_chain_encodings(path)) blocks.push_back(decode_block(enc));
  return Chain::from_blocks(std::move(blocks));
}

std::string block_to_json_line(const Block& block, const PayloadView& view) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["height"] = block.height;
  j["prev_hash"] = block.prev_hash.hex();
  j["block_hash"] = block.block_hash.hex();
  auto txs = ordered_json::array();
  for (const auto& tx : block.txs) {
    ordered_json t;
    t["seq_no"] = tx.seq_no;
    t["kind"] = std::string(to_string(tx.kind));
    t["actor_id"] = tx.actor_id;
    t["epoch"] = tx.epoch ? ordered_json(*tx.epoch) : ordered_json(nullptr);
    t["timestamp"] = tx.timestamp;
    t["payload_digest"] = tx.payload_digest.hex();
    t["payload_hex"] = to_hex(tx.payload);
    if (view) {
      try {
        t["payload"] = ordered_json::parse(view(tx));
      } catch (const std::exception& e) {
        t["payload"] = ordered_json{{"error", e.what()}};
      }
    }
    txs.push_back(std::move(t));
  }
  j["txs"] = std::move(txs);
  return j.dump();
}

void write_chain_jsonl(const std::filesystem::path& path, const Chain& chain,
                       const PayloadView& view) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& b : chain.blocks()) out << block_to_json_line(b, view) << '\n';
}

}  // namespace fedledger::ledger
