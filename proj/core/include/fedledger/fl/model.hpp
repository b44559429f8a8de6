#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedledger/common/bytes.hpp"

namespace fedledger::fl {

enum class FlErrc {
  EmptyDataset,
  LengthMismatch,
  NonPositiveWeight,
  DimensionMismatch,
  InvalidArgument,
  MissingDataset,
  NonFinite,
};

class FlError : public std::runtime_error {
 public:
  FlError(FlErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  FlErrc code() const { return code_; }

 private:
  FlErrc code_;
};

/// Flat model parameters.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t d, double fill = 0.0) : values_(d, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool all_finite() const;
  double l2_norm() const;

  /// this += alpha * other
  void axpy(double alpha, const ParamVector& other);

  /// u64 dimension followed by little-endian IEEE-754 doubles.
  Bytes to_blob() const;
  static ParamVector from_blob(std::span<const std::uint8_t> blob);
  Digest digest() const { return sha256(to_blob()); }

  /// Bitwise comparison (distinguishes -0.0 from 0.0).
  bool bit_equal(const ParamVector& other) const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
};

enum class Architecture : std::uint8_t { MulticlassLogistic = 1, Mlp = 2 };

struct ModelSpec {
  Architecture architecture = Architecture::MulticlassLogistic;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  /// Hidden layer widths; empty for MulticlassLogistic. Hidden units use tanh.
  std::vector<std::size_t> hidden_sizes;

  static ModelSpec logistic(std::size_t input_dim, std::size_t num_classes);
  static ModelSpec mlp(std::size_t input_dim, std::vector<std::size_t> hidden,
                       std::size_t num_classes);

  std::size_t param_dim() const;
  /// (fan_in, fan_out) for each dense layer in order.
  std::vector<std::pair<std::size_t, std::size_t>> layers() const;

  bool operator==(const ModelSpec&) const = default;
};

/// Row-major features with integer labels.
struct Dataset {
  std::string owner;
  std::size_t input_dim = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span(features).subspan(i * input_dim, input_dim);
  }
  void push(std::span<const double> x, std::uint32_t label);
};

/// Zeros for logistic models; seeded Glorot-uniform weights (zero biases)
/// for MLPs.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

std::vector<double> logits(const ParamVector& params, const ModelSpec& spec,
                           std::span<const double> x);
/// argmax of the logits; ties go to the lowest class index.
std::size_t predict(const ParamVector& params, const ModelSpec& spec, std::span<const double> x);

/// Mean cross-entropy over the dataset.
double loss(const ParamVector& params, const ModelSpec& spec, const Dataset& data);

struct LossGrad {
  double loss = 0.0;
  ParamVector gradient;
};

/// Mean loss and analytic gradient over `indices` (all examples if empty).
LossGrad loss_and_gradient(const ParamVector& params, const ModelSpec& spec, const Dataset& data,
                           std::span<const std::size_t> indices = {});

}  // namespace fedledger::fl
