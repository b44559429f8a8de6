#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedledger/harness/cost_model.hpp"
#include "fedledger/unlearn/unlearn.hpp"

namespace fedledger::harness {

enum class RoundPhase { Train, Retrain };

std::string_view to_string(RoundPhase phase);

/// One row per Aggregate transaction.
struct MetricsRecord {
  std::uint64_t round = 0;
  RoundPhase phase = RoundPhase::Train;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  /// Indexed like MetricsTable::client_ids; nullopt for empty datasets.
  std::vector<std::optional<double>> client_loss;
  std::vector<std::optional<double>> client_accuracy;
  /// Test-set accuracy per class; nullopt for classes absent from the test set.
  std::vector<std::optional<double>> per_class_accuracy;
  /// Cumulative simulated seconds.
  std::uint64_t time_without_chain = 0;
  std::uint64_t time_with_chain = 0;

  bool operator==(const MetricsRecord&) const = default;
};

struct MetricsTable {
  std::vector<std::string> client_ids;
  std::size_t num_classes = 0;
  std::vector<MetricsRecord> rows;
};

class EmptyMetrics : public std::runtime_error {
 public:
  EmptyMetrics() : std::runtime_error("metrics stream is empty") {}
};

std::string metrics_csv_header(const MetricsTable& table);
std::string metrics_csv_row(const MetricsTable& table, const MetricsRecord& row);
/// Header plus one line per row.
std::string metrics_csv(const MetricsTable& table);

/// Writes loss.csv, accuracy.csv, per_class.csv and overhead.csv into `dir`.
/// `overhead_epochs` lists the epoch counts tabulated in overhead.csv.
/// Throws EmptyMetrics when the table has no rows.
void emit_plots_data(const MetricsTable& table, const CostParams& cost,
                     const std::vector<std::uint64_t>& overhead_epochs,
                     const unlearn::UnlearnCertificate* certificate, const std::filesystem::path& dir);

}  // namespace fedledger::harness
