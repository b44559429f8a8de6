#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedledger/fl/model.hpp"
#include "fedledger/fl/train.hpp"
#include "fedledger/harness/cost_model.hpp"

namespace fedledger::harness {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class DatasetKind { Mnist, Blobs, Csv };
enum class PartitionKind { Iid, ClassSharded };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Blobs;
  /// Mnist: directory holding the four IDX files.
  std::filesystem::path dir;
  /// Csv: label-first files.
  std::filesystem::path train_file;
  std::filesystem::path test_file;
  /// Per-class caps for Mnist/Csv (0 keeps everything), sizes for Blobs.
  std::size_t train_per_class = 0;
  std::size_t test_per_class = 0;
  /// Blobs only.
  std::size_t num_classes = 4;
  std::size_t dim = 8;
  double spread = 0.15;
};

struct PartitionConfig {
  PartitionKind kind = PartitionKind::Iid;
  /// ClassSharded: client index holding every example of `cls`.
  std::size_t holder = 0;
  std::uint32_t cls = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::size_t n_clients = 5;
  DatasetConfig dataset;
  PartitionConfig partition;
  fl::Architecture architecture = fl::Architecture::MulticlassLogistic;
  std::vector<std::size_t> hidden_sizes;
  std::uint64_t rounds = 10;
  /// Epochs per aggregation round.
  std::uint64_t k = 1;
  std::uint64_t batch_size = 32;
  double lr = 0.1;
  double quorum = 1.0;
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  CostParams cost;
  std::optional<std::uint64_t> unlearn_at;
  std::optional<std::string> unlearn_client;
  std::uint64_t token_ttl = 1'000'000'000;
  /// Clients left out of the session entirely; their data is still carved
  /// out of the partition so the others see identical shards.
  std::vector<std::string> exclude_clients;
  std::size_t n_endorsers = 4;
  std::size_t transitions_per_block = 1;
  bool parallel_clients = false;

  static std::string client_id(std::size_t index);
  std::vector<std::string> client_ids() const;
  /// The unlearn target, defaulting to the class holder when sharded.
  std::optional<std::string> unlearn_target() const;
  fl::DPParams dp() const;
  void validate() const;
};

/// Parses JSON text. Relative paths are resolved against `base_dir`.
ExperimentConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir = {});
/// Canonical JSON with absolute paths.
std::string config_to_json(const ExperimentConfig& config);

inline constexpr std::string_view kEnvPrefix = "FEDLEDGER_";

using EnvList = std::vector<std::pair<std::string, std::string>>;

/// Collects the process environment variables that carry the override prefix.
EnvList prefixed_environment();

/// Applies FEDLEDGER_<KEY> overrides to config JSON text. The key is
/// lowercased and `__` descends into objects, e.g. FEDLEDGER_DATASET__DIR.
/// Values that parse as JSON are used as such, anything else as a string.
std::string apply_env_overrides(std::string_view json_text, const EnvList& env);

/// Reads a config file, applies environment overrides and validates.
ExperimentConfig load_config(const std::filesystem::path& path, const EnvList& env = prefixed_environment());

}  // namespace fedledger::harness
