#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fedledger::harness {

/// Simulated-time constants, in seconds.
struct CostParams {
  std::uint64_t init_cost = 35;
  std::uint64_t consensus_cost = 3;
  std::uint64_t tx_cost = 2;
  std::uint64_t epoch_cost = 26;
  /// On-chain transactions outside the per-epoch stream.
  std::uint64_t setup_txs = 0;

  bool operator==(const CostParams&) const = default;
};

struct TimeCost {
  std::uint64_t normal = 0;
  std::uint64_t ours = 0;

  std::uint64_t overhead() const { return ours - normal; }
  double overhead_ratio() const { return static_cast<double>(overhead()) / static_cast<double>(normal); }
};

/// normal = E * epoch_cost
/// ours   = E * epoch_cost + init_cost + consensus_cost + E_tx * tx_cost
/// E_tx defaults to one transaction per epoch plus `setup_txs`.
/// Throws std::invalid_argument for E == 0.
TimeCost estimate_time_cost(std::uint64_t epochs, const CostParams& params,
                            std::optional<std::uint64_t> n_tx = std::nullopt);

/// One published column of the reference timing table; t is the last epoch
/// index, so the column covers t + 1 epochs.
struct ReferenceColumn {
  std::uint64_t t;
  std::uint64_t normal;
  std::uint64_t ours;
};

inline constexpr std::array<ReferenceColumn, 4> kReferenceTable{{
    {0, 26, 66},
    {9, 260, 318},
    {199, 5200, 5638},
    {1999, 26000, 28038},
}};

struct ReferenceCheck {
  ReferenceColumn reference;
  TimeCost model;
  bool matches = false;
  /// Transaction count the published total would need under the same
  /// constants; nullopt when it is not a whole number.
  std::optional<std::uint64_t> implied_tx;
  /// Epoch count the published `normal` total corresponds to.
  std::optional<std::uint64_t> implied_epochs;
};

std::vector<ReferenceCheck> check_reference_table(const CostParams& params);

/// Human-readable comparison against the reference table.
std::string reference_report(const CostParams& params);

}  // namespace fedledger::harness
