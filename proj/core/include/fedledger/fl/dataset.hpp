#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fedledger/fl/model.hpp"

namespace fedledger::fl {

/// Reads an MNIST-style IDX pair (images magic 0x00000803, labels magic
/// 0x00000801, both big-endian). Pixels are scaled to [0, 1].
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CSV rows of `label,f1,f2,...`. A non-numeric first line is treated as a
/// header and skipped.
Dataset load_csv(const std::filesystem::path& path);

/// Isotropic Gaussian blobs with non-negative features (centres drawn in
/// [0, 1]^dim, values clamped at zero).
Dataset make_blobs(std::size_t per_class, std::size_t num_classes, std::size_t dim, double spread,
                   std::uint64_t seed);

/// First `per_class` examples of each class, in original order.
Dataset take_per_class(const Dataset& data, std::size_t per_class);

/// Shuffles then deals examples round-robin to `n_clients`.
std::vector<Dataset> partition_iid(const Dataset& data, std::size_t n_clients, std::uint64_t seed);

/// Client `holder` receives every example of `cls`; all other examples are
/// shuffled and dealt to the remaining clients.
std::vector<Dataset> partition_class_sharded(const Dataset& data, std::size_t n_clients,
                                             std::size_t holder, std::uint32_t cls,
                                             std::uint64_t seed);

Dataset concat(std::span<const Dataset> parts);

}  // namespace fedledger::fl
