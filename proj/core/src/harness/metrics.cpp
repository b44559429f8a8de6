#include "fedledger/harness/metrics.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace fedledger::harness {

namespace {

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::optional<double> at(const std::vector<std::optional<double>>& v, std::size_t i) {
  return i < v.size() ? v[i] : std::nullopt;
}

}  // namespace

std::string_view to_string(RoundPhase phase) { return phase == RoundPhase::Train ? "train" : "retrain"; }

std::string metrics_csv_header(const MetricsTable& table) {
  std::string h =
      "round,phase,train_loss,train_accuracy,test_loss,test_accuracy,time_without_chain,time_with_chain";
  for (const auto& id : table.client_ids) h += fmt::format(",{}_loss,{}_accuracy", id, id);
  for (std::size_t c = 0; c < table.num_classes; ++c) h += fmt::format(",class_{}_accuracy", c);
  return h + "\n";
}

std::string metrics_csv_row(const MetricsTable& table, const MetricsRecord& r) {
  std::string s = fmt::format("{},{},{},{},{},{},{},{}", r.round, to_string(r.phase), r.train_loss,
                              r.train_accuracy, r.test_loss, r.test_accuracy, r.time_without_chain,
                              r.time_with_chain);
  for (std::size_t i = 0; i < table.client_ids.size(); ++i) {
    s += "," + cell(at(r.client_loss, i)) + "," + cell(at(r.client_accuracy, i));
  }
  for (std::size_t c = 0; c < table.num_classes; ++c) s += "," + cell(at(r.per_class_accuracy, c));
  return s + "\n";
}

std::string metrics_csv(const MetricsTable& table) {
  std::string s = metrics_csv_header(table);
  for (const auto& r : table.rows) s += metrics_csv_row(table, r);
  return s;
}

void emit_plots_data(const MetricsTable& table, const CostParams& cost,
                     const std::vector<std::uint64_t>& overhead_epochs,
                     const unlearn::UnlearnCertificate* certificate, const std::filesystem::path& dir) {
  if (table.rows.empty()) throw EmptyMetrics();
  std::filesystem::create_directories(dir);

  std::string loss = "round,phase,train_loss,test_loss";
  std::string acc = "round,phase,train_accuracy,test_accuracy";
  for (const auto& id : table.client_ids) {
    loss += "," + id + "_loss";
    acc += "," + id + "_accuracy";
  }
  for (std::size_t c = 0; c < table.num_classes; ++c) acc += fmt::format(",class_{}_accuracy", c);
  loss += "\n";
  acc += "\n";
  for (const auto& r : table.rows) {
    loss += fmt::format("{},{},{},{}", r.round, to_string(r.phase), r.train_loss, r.test_loss);
    acc += fmt::format("{},{},{},{}", r.round, to_string(r.phase), r.train_accuracy, r.test_accuracy);
    for (std::size_t i = 0; i < table.client_ids.size(); ++i) {
      loss += "," + cell(at(r.client_loss, i));
      acc += "," + cell(at(r.client_accuracy, i));
    }
    for (std::size_t c = 0; c < table.num_classes; ++c) acc += "," + cell(at(r.per_class_accuracy, c));
    loss += "\n";
    acc += "\n";
  }
  write_file(dir / "loss.csv", loss);
  write_file(dir / "accuracy.csv", acc);

  std::string pc = "class,before,after,final\n";
  const auto& last = table.rows.back();
  for (std::size_t c = 0; c < table.num_classes; ++c) {
    std::optional<double> before, after;
    if (certificate != nullptr) {
      before = at(certificate->per_class_accuracy_before, c);
      after = at(certificate->per_class_accuracy_after, c);
    }
    pc += fmt::format("{},{},{},{}\n", c, cell(before), cell(after), cell(at(last.per_class_accuracy, c)));
  }
  write_file(dir / "per_class.csv", pc);

  auto epochs = overhead_epochs;
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
  std::string oh = "epochs,normal,ours,overhead,overhead_ratio\n";
  for (auto e : epochs) {
    if (e == 0) continue;
    const auto t = estimate_time_cost(e, cost);
    oh += fmt::format("{},{},{},{},{}\n", e, t.normal, t.ours, t.overhead(), t.overhead_ratio());
  }
  write_file(dir / "overhead.csv", oh);
}

}  // namespace fedledger::harness
