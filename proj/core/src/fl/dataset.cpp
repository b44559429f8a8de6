#include "fedledger/fl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

namespace fedledger::fl {

namespace {

Bytes slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::uint32_t be32(const Bytes& b, std::size_t off) {
  if (off + 4 > b.size()) throw DecodeError("truncated IDX header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const Bytes img = slurp(images);
  const Bytes lab = slurp(labels);
  if (be32(img, 0) != 0x00000803) throw DecodeError("bad IDX image magic in " + images.string());
  if (be32(lab, 0) != 0x00000801) throw DecodeError("bad IDX label magic in " + labels.string());
  const std::size_t n = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  if (be32(lab, 4) != n) throw DecodeError("IDX image/label counts differ");
  const std::size_t dim = rows * cols;
  if (img.size() != 16 + n * dim || lab.size() != 8 + n) throw DecodeError("IDX payload size mismatch");

  Dataset d;
  d.input_dim = dim;
  d.features.resize(n * dim);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n * dim; ++i) d.features[i] = img[16 + i] / 255.0;
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = lab[8 + i];
  return d;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Dataset d;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto* b = cell.data();
      const auto* e = b + cell.size();
      while (b < e && *b == ' ') ++b;
      auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || ptr != e) {
        numeric = false;
        break;
      }
      cells.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw DecodeError("non-numeric CSV cell on line " + std::to_string(lineno));
    }
    first = false;
    if (cells.size() < 2) throw DecodeError("CSV row needs a label and features");
    if (cells[0] < 0 || cells[0] != std::floor(cells[0]))
      throw DecodeError("CSV label must be a non-negative integer");
    if (d.input_dim == 0) d.input_dim = cells.size() - 1;
    if (cells.size() - 1 != d.input_dim) throw DecodeError("ragged CSV on line " + std::to_string(lineno));
    d.push(std::span(cells).subspan(1), static_cast<std::uint32_t>(cells[0]));
  }
  return d;
}

Dataset make_blobs(std::size_t per_class, std::size_t num_classes, std::size_t dim, double spread,
                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> centre(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<std::vector<double>> centres(num_classes, std::vector<double>(dim));
  for (auto& c : centres)
    for (auto& v : c) v = centre(rng);
  Dataset d;
  d.input_dim = dim;
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      for (std::size_t k = 0; k < dim; ++k) x[k] = std::max(0.0, centres[c][k] + noise(rng));
      d.push(x, static_cast<std::uint32_t>(c));
    }
  }
  return d;
}

Dataset take_per_class(const Dataset& data, std::size_t per_class) {
  Dataset out;
  out.owner = data.owner;
  out.input_dim = data.input_dim;
  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto y = data.labels[i];
    if (y >= seen.size()) seen.resize(y + 1, 0);
    if (seen[y]++ < per_class) out.push(data.row(i), y);
  }
  return out;
}

std::vector<Dataset> partition_iid(const Dataset& data, std::size_t n_clients, std::uint64_t seed) {
  if (n_clients == 0) throw FlError(FlErrc::InvalidArgument, "need at least one client");
  std::vector<Dataset> parts(n_clients);
  for (auto& p : parts) p.input_dim = data.input_dim;
  const auto idx = shuffled_indices(data.size(), seed);
  for (std::size_t k = 0; k < idx.size(); ++k) parts[k % n_clients].push(data.row(idx[k]), data.labels[idx[k]]);
  return parts;
}

std::vector<Dataset> partition_class_sharded(const Dataset& data, std::size_t n_clients,
                                             std::size_t holder, std::uint32_t cls,
                                             std::uint64_t seed) {
  if (n_clients < 2) throw FlError(FlErrc::InvalidArgument, "class sharding needs two or more clients");
  if (holder >= n_clients) throw FlError(FlErrc::InvalidArgument, "holder index out of range");
  std::vector<Dataset> parts(n_clients);
  for (auto& p : parts) p.input_dim = data.input_dim;
  const auto idx = shuffled_indices(data.size(), seed);
  std::size_t next = 0;
  for (std::size_t i : idx) {
    if (data.labels[i] == cls) {
      parts[holder].push(data.row(i), cls);
      continue;
    }
    std::size_t target = next % (n_clients - 1);
    if (target >= holder) ++target;
    parts[target].push(data.row(i), data.labels[i]);
    ++next;
  }
  return parts;
}

Dataset concat(std::span<const Dataset> parts) {
  Dataset out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (out.input_dim == 0) out.input_dim = p.input_dim;
    if (p.input_dim != out.input_dim) throw FlError(FlErrc::DimensionMismatch, "concat width mismatch");
    out.features.insert(out.features.end(), p.features.begin(), p.features.end());
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

}  // namespace fedledger::fl
