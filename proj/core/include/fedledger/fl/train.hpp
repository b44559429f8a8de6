#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedledger/fl/model.hpp"

namespace fedledger::fl {

/// Runs `local_epochs` of shuffled minibatch SGD from `model` and returns the
/// sum of the step gradients, i.e. the parameter delta divided by -lr.
ParamVector local_train(const ParamVector& model, const ModelSpec& spec, const Dataset& data,
                        std::size_t batch_size, std::size_t local_epochs, double lr,
                        std::uint64_t seed);

struct DPParams {
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  std::uint64_t rng_seed = 0;

  bool operator==(const DPParams&) const = default;
};

/// L2 clip to clip_norm, then add N(0, (noise_multiplier * clip_norm)^2) per
/// coordinate. With noise_multiplier == 0 no noise is drawn.
ParamVector dp_apply(const ParamVector& gradient, const DPParams& dp);

/// The DP stream used for one published (epoch, client) gradient.
DPParams dp_for_submission(const DPParams& base, std::uint64_t epoch, const std::string& client_id);

/// theta - lr * sum_i (w_i / sum w) * g_i, summed in list order.
ParamVector fedavg(std::span<const ParamVector> gradients, std::span<const double> weights,
                   const ParamVector& current, double lr);

/// Element-wise sum in list order.
ParamVector accumulate(std::span<const ParamVector> parts);

struct EvalResult {
  double overall_accuracy = 0.0;
  /// nullopt for classes absent from the dataset.
  std::vector<std::optional<double>> per_class_accuracy;
  std::vector<std::size_t> class_count;
  std::vector<std::size_t> class_correct;
  double loss = 0.0;
};

EvalResult evaluate(const ParamVector& model, const ModelSpec& spec, const Dataset& data);

struct TrainingHyper {
  std::size_t batch_size = 32;
  double lr = 0.1;
  std::uint64_t train_seed = 0;
  DPParams dp;
};

/// One client's per-epoch effective gradients for one aggregation round.
/// Each epoch continues from the client's locally updated model.
std::vector<ParamVector> client_epoch_gradients(const ParamVector& global, const ModelSpec& spec,
                                                const Dataset& data, const std::string& client_id,
                                                std::uint64_t first_epoch, std::uint64_t n_epochs,
                                                const TrainingHyper& hyper);

struct ClientData {
  std::string id;
  const Dataset* data = nullptr;
};

struct RoundPlan {
  std::uint64_t round = 0;
  std::uint64_t first_epoch = 0;
  std::uint64_t epochs = 1;
  std::vector<std::string> participants;

  bool operator==(const RoundPlan&) const = default;
};

/// Local training -> per-epoch DP -> per-client sum -> FedAvg, the same
/// arithmetic the on-chain round performs. Participants with empty datasets
/// contribute nothing; a round without contributions returns `global`.
ParamVector run_round(const ParamVector& global, const ModelSpec& spec,
                      std::span<const ClientData> clients, const RoundPlan& plan,
                      const TrainingHyper& hyper);

struct RetrainResult {
  ParamVector final_model;
  /// Global model after each scheduled round.
  std::vector<ParamVector> trajectory;
};

/// Retrains from a checkpoint over `clients` (which must exclude the
/// unlearned data) following `schedule`.
RetrainResult retrain_from(const ParamVector& checkpoint_model, const ModelSpec& spec,
                           std::span<const ClientData> clients, std::span<const RoundPlan> schedule,
                           const TrainingHyper& hyper);

}  // namespace fedledger::fl
