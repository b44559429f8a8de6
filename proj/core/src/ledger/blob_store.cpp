#include "fedledger/ledger/blob_store.hpp"

#include <fstream>
#include <iterator>

namespace fedledger::ledger {

BlobStore::BlobStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(*dir_);
}

Digest BlobStore::put(Bytes data) {
  const Digest d = sha256(data);
  std::lock_guard lock(mu_);
  if (blobs_.contains(d)) return d;
  if (dir_) write_file(d, data);
  blobs_.emplace(d, std::move(data));
  return d;
}

std::optional<Bytes> BlobStore::get(const Digest& digest) const {
  std::lock_guard lock(mu_);
  auto it = blobs_.find(digest);
  if (it == blobs_.end()) return std::nullopt;
  return it->second;
}

bool BlobStore::contains(const Digest& digest) const {
  std::lock_guard lock(mu_);
  return blobs_.contains(digest);
}

std::size_t BlobStore::size() const {
  std::lock_guard lock(mu_);
  return blobs_.size();
}

void BlobStore::write_file(const Digest& digest, const Bytes& data) const {
  std::ofstream out(*dir_ / digest.hex(), std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("failed to write blob " + digest.hex());
}

std::size_t BlobStore::load_dir(const std::filesystem::path& dir) {
  std::size_t rejected = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    Digest name;
    try {
      name = Digest::from_hex(entry.path().filename().string());
    } catch (const DecodeError&) {
      continue;
    }
    std::ifstream in(entry.path(), std::ios::binary);
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (sha256(data) != name) {
      ++rejected;
      continue;
    }
    std::lock_guard lock(mu_);
    blobs_.emplace(name, std::move(data));
  }
  return rejected;
}

}  // namespace fedledger::ledger
