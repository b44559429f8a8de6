#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>

#include "fedledger/common/bytes.hpp"

namespace fedledger::ledger {

/// Content-addressed off-chain storage for large payloads (model and
/// gradient parameter vectors). When a directory is attached every blob is
/// also written to `<dir>/<lowercase hex digest>`.
class BlobStore {
 public:
  BlobStore() = default;
  explicit BlobStore(std::filesystem::path dir);

  Digest put(Bytes data);
  std::optional<Bytes> get(const Digest& digest) const;
  bool contains(const Digest& digest) const;
  std::size_t size() const;

  /// Loads every well-formed blob file from `dir`. Files whose content does
  /// not hash to their name are skipped and counted in the return value.
  std::size_t load_dir(const std::filesystem::path& dir);

 private:
  void write_file(const Digest& digest, const Bytes& data) const;

  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  std::map<Digest, Bytes> blobs_;
};

}  // namespace fedledger::ledger
