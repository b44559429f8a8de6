#include "fedledger/fl/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fedledger::fl {

ParamVector local_train(const ParamVector& model, const ModelSpec& spec, const Dataset& data,
                        std::size_t batch_size, std::size_t local_epochs, double lr,
                        std::uint64_t seed) {
  if (data.empty()) throw FlError(FlErrc::EmptyDataset, "local training on an empty dataset");
  if (!(lr > 0.0)) throw FlError(FlErrc::InvalidArgument, "learning rate must be positive");
  if (batch_size == 0) throw FlError(FlErrc::InvalidArgument, "batch size must be positive");

  ParamVector theta = model;
  ParamVector total(model.size());
  std::vector<std::size_t> order(data.size());
  for (std::size_t e = 0; e < local_epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, "shuffle", e));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const auto n = std::min(batch_size, order.size() - start);
      auto step = loss_and_gradient(theta, spec, data, std::span(order).subspan(start, n));
      theta.axpy(-lr, step.gradient);
      total.axpy(1.0, step.gradient);
    }
  }
  return total;
}

ParamVector dp_apply(const ParamVector& gradient, const DPParams& dp) {
  if (!(dp.clip_norm > 0.0)) throw FlError(FlErrc::InvalidArgument, "clip_norm must be positive");
  if (!(dp.noise_multiplier >= 0.0))
    throw FlError(FlErrc::InvalidArgument, "noise_multiplier must be non-negative");
  if (!gradient.all_finite()) throw FlError(FlErrc::NonFinite, "gradient has non-finite entries");

  ParamVector out = gradient;
  const double norm = gradient.l2_norm();
  if (norm > dp.clip_norm) {
    const double scale = dp.clip_norm / norm;
    for (auto& v : out.values()) v *= scale;
  }
  if (dp.noise_multiplier > 0.0) {
    std::mt19937_64 rng(dp.rng_seed);
    std::normal_distribution<double> noise(0.0, dp.noise_multiplier * dp.clip_norm);
    for (auto& v : out.values()) v += noise(rng);
  }
  return out;
}

DPParams dp_for_submission(const DPParams& base, std::uint64_t epoch, const std::string& client_id) {
  DPParams p = base;
  p.rng_seed = derive_seed(base.rng_seed, "dp", epoch, client_id);
  return p;
}

ParamVector accumulate(std::span<const ParamVector> parts) {
  if (parts.empty()) throw FlError(FlErrc::LengthMismatch, "nothing to accumulate");
  ParamVector sum = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) sum.axpy(1.0, parts[i]);
  return sum;
}

ParamVector fedavg(std::span<const ParamVector> gradients, std::span<const double> weights,
                   const ParamVector& current, double lr) {
  if (gradients.empty() || gradients.size() != weights.size()) {
    throw FlError(FlErrc::LengthMismatch, "fedavg needs equal-length, non-empty lists");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw FlError(FlErrc::NonPositiveWeight, "fedavg weights must be positive");
    total += w;
  }
  ParamVector step(current.size());
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    if (gradients[i].size() != current.size())
      throw FlError(FlErrc::DimensionMismatch, "gradient dimension mismatch in fedavg");
    step.axpy(weights[i] / total, gradients[i]);
  }
  ParamVector next = current;
  next.axpy(-lr, step);
  return next;
}

EvalResult evaluate(const ParamVector& model, const ModelSpec& spec, const Dataset& data) {
  if (data.empty()) throw FlError(FlErrc::EmptyDataset, "evaluation on an empty dataset");
  EvalResult r;
  r.class_count.assign(spec.num_classes, 0);
  r.class_correct.assign(spec.num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto label = data.labels[n];
    if (label >= spec.num_classes) throw FlError(FlErrc::InvalidArgument, "label out of range");
    ++r.class_count[label];
    if (predict(model, spec, data.row(n)) == label) {
      ++r.class_correct[label];
      ++correct;
    }
  }
  r.overall_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.per_class_accuracy.resize(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    if (r.class_count[c] > 0) {
      r.per_class_accuracy[c] =
          static_cast<double>(r.class_correct[c]) / static_cast<double>(r.class_count[c]);
    }
  }
  r.loss = loss(model, spec, data);
  return r;
}

std::vector<ParamVector> client_epoch_gradients(const ParamVector& global, const ModelSpec& spec,
                                                const Dataset& data, const std::string& client_id,
                                                std::uint64_t first_epoch, std::uint64_t n_epochs,
                                                const TrainingHyper& hyper) {
  std::vector<ParamVector> out;
  out.reserve(n_epochs);
  ParamVector local = global;
  for (std::uint64_t e = first_epoch; e < first_epoch + n_epochs; ++e) {
    auto g = local_train(local, spec, data, hyper.batch_size, 1, hyper.lr,
                         derive_seed(hyper.train_seed, "local", e, client_id));
    local.axpy(-hyper.lr, g);
    out.push_back(std::move(g));
  }
  return out;
}

ParamVector run_round(const ParamVector& global, const ModelSpec& spec,
                      std::span<const ClientData> clients, const RoundPlan& plan,
                      const TrainingHyper& hyper) {
  std::vector<ParamVector> updates;
  std::vector<double> weights;
  for (const auto& id : plan.participants) {
    auto it = std::find_if(clients.begin(), clients.end(),
                           [&](const ClientData& c) { return c.id == id; });
    if (it == clients.end() || it->data == nullptr) {
      throw FlError(FlErrc::MissingDataset, "no dataset for round participant " + id);
    }
    if (it->data->empty()) continue;
    auto raw = client_epoch_gradients(global, spec, *it->data, id, plan.first_epoch, plan.epochs, hyper);
    std::vector<ParamVector> published;
    published.reserve(raw.size());
    for (std::uint64_t i = 0; i < raw.size(); ++i) {
      published.push_back(dp_apply(raw[i], dp_for_submission(hyper.dp, plan.first_epoch + i, id)));
    }
    updates.push_back(accumulate(published));
    weights.push_back(static_cast<double>(it->data->size()));
  }
  if (updates.empty()) return global;
  return fedavg(updates, weights, global, hyper.lr);
}

RetrainResult retrain_from(const ParamVector& checkpoint_model, const ModelSpec& spec,
                           std::span<const ClientData> clients, std::span<const RoundPlan> schedule,
                           const TrainingHyper& hyper) {
  RetrainResult r{checkpoint_model, {}};
  r.trajectory.reserve(schedule.size());
  for (const auto& plan : schedule) {
    r.final_model = run_round(r.final_model, spec, clients, plan, hyper);
    r.trajectory.push_back(r.final_model);
  }
  return r;
}

}  // namespace fedledger::fl
