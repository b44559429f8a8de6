#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fedledger/ledger/chain.hpp"

namespace fedledger::ledger {

// chain.bin layout: "FLCHAIN1", u64 block count, then per block a u64 length
// followed by the canonical block encoding. All integers little-endian.

void write_chain_bin(const std::filesystem::path& path, const Chain& chain);
/// Reads the raw block encodings without decoding them.
std::vector<Bytes> read_chain_encodings(const std::filesystem::path& path);
/// Reads and decodes; throws DecodeError on malformed blocks. Does not verify.
Chain read_chain_bin(const std::filesystem::path& path);

/// Optional decoder producing a JSON object text describing a payload.
using PayloadView = std::function<std::string(const Transaction&)>;

std::string block_to_json_line(const Block& block, const PayloadView& view = {});
/// One JSON object per line, one line per block.
void write_chain_jsonl(const std::filesystem::path& path, const Chain& chain,
                       const PayloadView& view = {});

}  // namespace fedledger::ledger
