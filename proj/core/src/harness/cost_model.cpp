#include "fedledger/harness/cost_model.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace fedledger::harness {

TimeCost estimate_time_cost(std::uint64_t epochs, const CostParams& params,
                            std::optional<std::uint64_t> n_tx) {
  if (epochs == 0) throw std::invalid_argument("epoch count must be at least 1");
  const std::uint64_t txs = n_tx.value_or(epochs + params.setup_txs);
  const std::uint64_t normal = epochs * params.epoch_cost;
  return {normal, normal + params.init_cost + params.consensus_cost + txs * params.tx_cost};
}

std::vector<ReferenceCheck> check_reference_table(const CostParams& params) {
  std::vector<ReferenceCheck> out;
  for (const auto& ref : kReferenceTable) {
    ReferenceCheck c;
    c.reference = ref;
    c.model = estimate_time_cost(ref.t + 1, params);
    c.matches = c.model.normal == ref.normal && c.model.ours == ref.ours;
    const auto fixed = params.init_cost + params.consensus_cost;
    if (params.tx_cost > 0 && ref.ours >= ref.normal + fixed &&
        (ref.ours - ref.normal - fixed) % params.tx_cost == 0) {
      c.implied_tx = (ref.ours - ref.normal - fixed) / params.tx_cost;
    }
    if (params.epoch_cost > 0 && ref.normal % params.epoch_cost == 0) c.implied_epochs = ref.normal / params.epoch_cost;
    out.push_back(c);
  }
  return out;
}

std::string reference_report(const CostParams& params) {
  std::string s = fmt::format("{:>6} {:>7} {:>10} {:>10} {:>10} {:>10}  {}\n", "t", "epochs",
                              "normal", "ref", "ours", "ref", "status");
  for (const auto& c : check_reference_table(params)) {
    std::string status = c.matches ? "match" : "MISMATCH";
    if (!c.matches) {
      if (c.implied_epochs) {
        status += fmt::format("; reference normal total is {} epochs, not {}", *c.implied_epochs, c.reference.t + 1);
      }
      status += c.implied_tx ? fmt::format("; reference overhead implies {} txs", *c.implied_tx)
                             : std::string("; reference overhead not reachable with these constants");
      status += "; reported, not fitted";
    }
    s += fmt::format("{:>6} {:>7} {:>10} {:>10} {:>10} {:>10}  {}\n", c.reference.t, c.reference.t + 1,
                     c.model.normal, c.reference.normal, c.model.ours, c.reference.ours, status);
  }
  return s;
}

}  // namespace fedledger::harness
