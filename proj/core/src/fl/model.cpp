#include "fedledger/fl/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

namespace fedledger::fl {

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ParamVector::l2_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

void ParamVector::axpy(double alpha, const ParamVector& other) {
  if (other.size() != size()) throw FlError(FlErrc::DimensionMismatch, "axpy dimension mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += alpha * other.values_[i];
}

Bytes ParamVector::to_blob() const {
  Encoder enc;
  enc.u64(values_.size());
  for (double v : values_) enc.f64(v);
  return std::move(enc).take();
}

ParamVector ParamVector::from_blob(std::span<const std::uint8_t> blob) {
  Decoder dec(blob);
  const auto d = dec.u64();
  if (d != dec.remaining() / 8 || dec.remaining() % 8 != 0) {
    throw DecodeError("parameter blob length does not match its dimension prefix");
  }
  std::vector<double> values(d);
  for (auto& v : values) v = dec.f64();
  return ParamVector(std::move(values));
}

bool ParamVector::bit_equal(const ParamVector& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (std::bit_cast<std::uint64_t>(values_[i]) != std::bit_cast<std::uint64_t>(other.values_[i]))
      return false;
  }
  return true;
}

ModelSpec ModelSpec::logistic(std::size_t input_dim, std::size_t num_classes) {
  return {Architecture::MulticlassLogistic, input_dim, num_classes, {}};
}

ModelSpec ModelSpec::mlp(std::size_t input_dim, std::vector<std::size_t> hidden,
                         std::size_t num_classes) {
  if (hidden.empty()) throw FlError(FlErrc::InvalidArgument, "an MLP needs at least one hidden layer");
  return {Architecture::Mlp, input_dim, num_classes, std::move(hidden)};
}

std::vector<std::pair<std::size_t, std::size_t>> ModelSpec::layers() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t in = input_dim;
  if (architecture == Architecture::Mlp) {
    for (auto h : hidden_sizes) {
      out.emplace_back(in, h);
      in = h;
    }
  }
  out.emplace_back(in, num_classes);
  return out;
}

std::size_t ModelSpec::param_dim() const {
  std::size_t d = 0;
  for (auto [in, out] : layers()) d += in * out + out;
  return d;
}

void Dataset::push(std::span<const double> x, std::uint32_t label) {
  if (x.size() != input_dim) throw FlError(FlErrc::DimensionMismatch, "feature width mismatch");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  ParamVector p(spec.param_dim());
  if (spec.architecture == Architecture::MulticlassLogistic) return p;
  std::mt19937_64 rng(seed);
  std::size_t off = 0;
  for (auto [in, out] : spec.layers()) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-a, a);
    for (std::size_t i = 0; i < in * out; ++i) p[off + i] = u(rng);
    off += in * out + out;
  }
  return p;
}

namespace {

void check_shapes(const ParamVector& params, const ModelSpec& spec, std::size_t x_dim) {
  if (params.size() != spec.param_dim())
    throw FlError(FlErrc::DimensionMismatch, "parameter vector does not match model spec");
  if (x_dim != spec.input_dim)
    throw FlError(FlErrc::DimensionMismatch, "feature width does not match model spec");
}

// Forward pass keeping every layer's activations: acts[0] = x, acts[L] = logits.
std::vector<std::vector<double>> forward(const ParamVector& params, const ModelSpec& spec,
                                         std::span<const double> x) {
  const auto layers = spec.layers();
  std::vector<std::vector<double>> acts;
  acts.reserve(layers.size() + 1);
  acts.emplace_back(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto [in, out] = layers[l];
    const double* w = params.values().data() + off;
    const double* b = w + in * out;
    const auto& a = acts.back();
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = s;
    }
    if (l + 1 < layers.size())
      for (auto& v : z) v = std::tanh(v);
    acts.push_back(std::move(z));
    off += in * out + out;
  }
  return acts;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

std::vector<double> logits(const ParamVector& params, const ModelSpec& spec,
                           std::span<const double> x) {
  check_shapes(params, spec, x.size());
  return std::move(forward(params, spec, x).back());
}

std::size_t predict(const ParamVector& params, const ModelSpec& spec, std::span<const double> x) {
  const auto z = logits(params, spec, x);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

double loss(const ParamVector& params, const ModelSpec& spec, const Dataset& data) {
  if (data.empty()) throw FlError(FlErrc::EmptyDataset, "loss over an empty dataset");
  check_shapes(params, spec, data.input_dim);
  double total = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto z = std::move(forward(params, spec, data.row(n)).back());
    total += log_sum_exp(z) - z[data.labels[n]];
  }
  return total / static_cast<double>(data.size());
}

LossGrad loss_and_gradient(const ParamVector& params, const ModelSpec& spec, const Dataset& data,
                           std::span<const std::size_t> indices) {
  if (data.empty()) throw FlError(FlErrc::EmptyDataset, "gradient over an empty dataset");
  check_shapes(params, spec, data.input_dim);
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    indices = all;
  }

  const auto layers = spec.layers();
  std::vector<std::size_t> offsets(layers.size());
  for (std::size_t l = 0, off = 0; l < layers.size(); ++l) {
    offsets[l] = off;
    off += layers[l].first * layers[l].second + layers[l].second;
  }

  LossGrad out{0.0, ParamVector(params.size())};
  auto& grad = out.gradient;
  for (std::size_t n : indices) {
    const auto acts = forward(params, spec, data.row(n));
    const auto& z = acts.back();
    const double lse = log_sum_exp(z);
    const auto label = data.labels[n];
    out.loss += lse - z[label];

    // delta at the output: softmax - onehot
    std::vector<double> delta(z.size());
    for (std::size_t c = 0; c < z.size(); ++c) delta[c] = std::exp(z[c] - lse);
    delta[label] -= 1.0;

    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto [in, outw] = layers[l];
      const auto& a = acts[l];
      double* gw = grad.values().data() + offsets[l];
      double* gb = gw + in * outw;
      for (std::size_t o = 0; o < outw; ++o) {
        const double d = delta[o];
        gb[o] += d;
        double* row = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += d * a[i];
      }
      if (l == 0) break;
      const double* w = params.values().data() + offsets[l];
      std::vector<double> prev(in, 0.0);
      for (std::size_t o = 0; o < outw; ++o) {
        const double d = delta[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
      }
      // tanh'(u) = 1 - tanh(u)^2, and acts[l] already holds tanh(u).
      for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - a[i] * a[i];
      delta = std::move(prev);
    }
  }
  const double scale = 1.0 / static_cast<double>(indices.size());
  out.loss *= scale;
  for (auto& g : grad.values()) g *= scale;
  return out;
}

}  // namespace fedledger::fl
