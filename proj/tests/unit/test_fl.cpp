#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "fedledger/fl/dataset.hpp"
#include "fedledger/fl/model.hpp"
#include "fedledger/fl/train.hpp"
#include "support.hpp"

using namespace fedledger;
using namespace fedledger::fl;
using fedledger::testing::random_vector;

namespace {

Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t dim, std::size_t classes) {
  Dataset d;
  d.input_dim = dim;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(dim);
    for (auto& v : x) v = u(rng);
    d.push(x, static_cast<std::uint32_t>(rng() % classes));
  }
  return d;
}

double rel_error(const ParamVector& a, const ParamVector& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den = std::max(den, std::max(a[i] * a[i], b[i] * b[i]));
  }
  return std::sqrt(num) / std::max(std::sqrt(den * static_cast<double>(a.size())), 1e-12);
}

ParamVector numeric_gradient(const ParamVector& p, const ModelSpec& spec, const Dataset& d) {
  ParamVector g(p.size());
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto plus = p, minus = p;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (loss(plus, spec, d) - loss(minus, spec, d)) / (2 * h);
  }
  return g;
}

// Independent loss for the logistic layout: W[c][i] row-major, then b[c].
double naive_logistic_loss(const ParamVector& p, std::size_t dim, std::size_t classes, const Dataset& d) {
  double total = 0.0;
  for (std::size_t n = 0; n < d.size(); ++n) {
    std::vector<double> z(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      z[c] = p[classes * dim + c];
      for (std::size_t i = 0; i < dim; ++i) z[c] += p[c * dim + i] * d.features[n * dim + i];
    }
    double sum = 0.0;
    for (double v : z) sum += std::exp(v);
    total += std::log(sum) - z[d.labels[n]];
  }
  return total / static_cast<double>(d.size());
}

}  // namespace

TEST(Model, ParamDims) {
  EXPECT_EQ(ModelSpec::logistic(784, 10).param_dim(), 7850u);
  EXPECT_EQ(ModelSpec::mlp(4, {5, 3}, 2).param_dim(), (4 * 5 + 5) + (5 * 3 + 3) + (3 * 2 + 2));
}

TEST(Model, BlobRoundTripIsBitExact) {
  std::mt19937_64 rng(1);
  ParamVector p(random_vector(rng, 33));
  p[0] = -0.0;
  const auto back = ParamVector::from_blob(p.to_blob());
  EXPECT_TRUE(back.bit_equal(p));
  EXPECT_FALSE(back.bit_equal(ParamVector(std::vector<double>(33, 0.0))));
  auto blob = p.to_blob();
  blob.pop_back();
  EXPECT_THROW(ParamVector::from_blob(blob), DecodeError);
}

TEST(Model, LossMatchesNaiveOracle) {
  std::mt19937_64 rng(2);
  for (int draw = 0; draw < 10; ++draw) {
    const auto d = random_dataset(rng, 15, 6, 4);
    const auto spec = ModelSpec::logistic(6, 4);
    const ParamVector p(random_vector(rng, spec.param_dim()));
    EXPECT_NEAR(loss(p, spec, d), naive_logistic_loss(p, 6, 4, d), 1e-12);
  }
}

TEST(Model, LogisticGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (int draw = 0; draw < 10; ++draw) {
    const auto d = random_dataset(rng, 12, 5, 3);
    const auto spec = ModelSpec::logistic(5, 3);
    const ParamVector p(random_vector(rng, spec.param_dim()));
    const auto lg = loss_and_gradient(p, spec, d);
    EXPECT_NEAR(lg.loss, loss(p, spec, d), 1e-12);
    EXPECT_LE(rel_error(lg.gradient, numeric_gradient(p, spec, d)), 1e-4);
  }
}

TEST(Model, MlpGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int draw = 0; draw < 10; ++draw) {
    const auto d = random_dataset(rng, 10, 4, 3);
    const auto spec = ModelSpec::mlp(4, {6, 5}, 3);
    const ParamVector p(random_vector(rng, spec.param_dim(), 0.7));
    EXPECT_LE(rel_error(loss_and_gradient(p, spec, d).gradient, numeric_gradient(p, spec, d)), 1e-4);
  }
}

TEST(Model, SubsetGradientUsesOnlyIndices) {
  std::mt19937_64 rng(5);
  const auto d = random_dataset(rng, 8, 3, 2);
  const auto spec = ModelSpec::logistic(3, 2);
  const ParamVector p(random_vector(rng, spec.param_dim()));
  const std::vector<std::size_t> idx{1, 4, 6};
  Dataset sub;
  sub.input_dim = 3;
  for (auto i : idx) sub.push(d.row(i), d.labels[i]);
  const auto a = loss_and_gradient(p, spec, d, idx);
  const auto b = loss_and_gradient(p, spec, sub);
  EXPECT_NEAR(a.loss, b.loss, 1e-14);
  EXPECT_LE(rel_error(a.gradient, b.gradient), 1e-14);
}

TEST(Model, PredictTiesGoToLowestIndex) {
  const auto spec = ModelSpec::logistic(2, 3);
  const ParamVector zeros(spec.param_dim());
  const std::vector<double> x{0.3, 0.9};
  EXPECT_EQ(predict(zeros, spec, x), 0u);
}

TEST(Model, MlpInitIsSeededAndLogisticIsZero) {
  const auto mlp = ModelSpec::mlp(4, {3}, 2);
  EXPECT_TRUE(init_params(mlp, 1).bit_equal(init_params(mlp, 1)));
  EXPECT_FALSE(init_params(mlp, 1).bit_equal(init_params(mlp, 2)));
  const auto lr = init_params(ModelSpec::logistic(4, 2), 9);
  EXPECT_EQ(lr.l2_norm(), 0.0);
}

// Hand case: theta = (1, 1), lr = 1, g1 = (2, 6) with weight 1,
// g2 = (6, 2) with weight 3. Weighted mean = (5, 3), so theta' = (-4, -2).
TEST(FedAvg, TwoClientHandCase) {
  const std::vector<ParamVector> g{ParamVector(std::vector<double>{2, 6}), ParamVector(std::vector<double>{6, 2})};
  const std::vector<double> w{1, 3};
  const auto next = fedavg(g, w, ParamVector(std::vector<double>{1, 1}), 1.0);
  EXPECT_NEAR(next[0], -4.0, 1e-12);
  EXPECT_NEAR(next[1], -2.0, 1e-12);
}

TEST(FedAvg, Errors) {
  const ParamVector cur(2);
  const std::vector<ParamVector> g{ParamVector(2)};
  EXPECT_THROW(fedavg({}, {}, cur, 1.0), FlError);
  const std::vector<double> zero{0.0};
  try {
    fedavg(g, zero, cur, 1.0);
    FAIL();
  } catch (const FlError& e) {
    EXPECT_EQ(e.code(), FlErrc::NonPositiveWeight);
  }
  const std::vector<ParamVector> bad{ParamVector(3)};
  const std::vector<double> one{1.0};
  try {
    fedavg(bad, one, cur, 1.0);
    FAIL();
  } catch (const FlError& e) {
    EXPECT_EQ(e.code(), FlErrc::DimensionMismatch);
  }
}

TEST(FedAvg, EqualWeightsGiveTheMean) {
  std::mt19937_64 rng(6);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<ParamVector> g;
    const std::size_t k = 1 + rng() % 5;
    for (std::size_t i = 0; i < k; ++i) g.emplace_back(random_vector(rng, 7));
    const std::vector<double> w(k, 2.5);
    const ParamVector cur(random_vector(rng, 7));
    const auto next = fedavg(g, w, cur, 0.1);
    for (std::size_t j = 0; j < 7; ++j) {
      double mean = 0.0;
      for (const auto& x : g) mean += x[j];
      mean /= static_cast<double>(k);
      EXPECT_NEAR(next[j], cur[j] - 0.1 * mean, 1e-12);
    }
  }
}

TEST(Dp, ZeroNoiseWithinClipIsIdentity) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    ParamVector g(random_vector(rng, 20));
    const double norm = g.l2_norm();
    const auto out = dp_apply(g, {norm * 1.5 + 1e-9, 0.0, rng()});
    EXPECT_TRUE(out.bit_equal(g));
  }
}

TEST(Dp, ClipBoundHoldsOnManyRandomVectors) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int i = 0; i < 10000; ++i) {
    const ParamVector g(random_vector(rng, 1 + rng() % 50, scale(rng)));
    const double c = scale(rng);
    const auto out = dp_apply(g, {c, 0.0, 0});
    ASSERT_LE(out.l2_norm(), c * (1 + 1e-12));
    if (g.l2_norm() > c) {
      // Direction is preserved.
      const double ratio = out.l2_norm() / g.l2_norm();
      for (std::size_t j = 0; j < g.size(); ++j) ASSERT_NEAR(out[j], g[j] * ratio, 1e-9 * c);
    }
  }
}

TEST(Dp, NoiseStatisticsAndDeterminism) {
  const ParamVector zero(200000);
  const DPParams dp{2.0, 0.5, 1234};
  const auto a = dp_apply(zero, dp);
  const auto b = dp_apply(zero, dp);
  EXPECT_TRUE(a.bit_equal(b));
  double mean = 0.0, sq = 0.0;
  for (double v : a.values()) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(a.size());
  const double var = sq / static_cast<double>(a.size()) - mean * mean;
  // sigma = 0.5 * 2.0 = 1; standard errors are about 0.002 and 0.003.
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
  auto other = dp;
  other.rng_seed = 1235;
  EXPECT_FALSE(dp_apply(zero, other).bit_equal(a));
}

TEST(Dp, SubmissionStreamsDiffer) {
  const DPParams base{1.0, 1.0, 5};
  EXPECT_NE(dp_for_submission(base, 0, "C0").rng_seed, dp_for_submission(base, 1, "C0").rng_seed);
  EXPECT_NE(dp_for_submission(base, 0, "C0").rng_seed, dp_for_submission(base, 0, "C1").rng_seed);
  EXPECT_EQ(dp_for_submission(base, 0, "C0").clip_norm, 1.0);
}

TEST(Evaluate, MatchesConfusionRecount) {
  std::mt19937_64 rng(9);
  const auto d = random_dataset(rng, 200, 5, 4);
  const auto spec = ModelSpec::logistic(5, 4);
  const ParamVector p(random_vector(rng, spec.param_dim()));
  const auto r = evaluate(p, spec, d);
  std::vector<std::vector<std::size_t>> confusion(4, std::vector<std::size_t>(4, 0));
  for (std::size_t n = 0; n < d.size(); ++n) {
    const auto z = logits(p, spec, d.row(n));
    const auto pred = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    ++confusion[d.labels[n]][pred];
  }
  std::size_t diag = 0;
  for (std::size_t c = 0; c < 4; ++c) {
    const auto row = std::accumulate(confusion[c].begin(), confusion[c].end(), std::size_t{0});
    EXPECT_EQ(r.class_count[c], row);
    EXPECT_EQ(r.class_correct[c], confusion[c][c]);
    ASSERT_TRUE(r.per_class_accuracy[c].has_value());
    EXPECT_DOUBLE_EQ(*r.per_class_accuracy[c], static_cast<double>(confusion[c][c]) / static_cast<double>(row));
    diag += confusion[c][c];
  }
  EXPECT_DOUBLE_EQ(r.overall_accuracy, static_cast<double>(diag) / 200.0);
}

// Zero-initialised logistic regression trained on non-negative features that
// never show class 0 can never predict class 0.
TEST(Train, AbsentClassIsNeverPredicted) {
  std::mt19937_64 rng(10);
  for (int draw = 0; draw < 20; ++draw) {
    Dataset d;
    d.input_dim = 6;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 60; ++i) {
      std::vector<double> x(6);
      for (auto& v : x) v = u(rng);
      d.push(x, static_cast<std::uint32_t>(1 + rng() % 3));
    }
    const auto spec = ModelSpec::logistic(6, 4);
    auto p = init_params(spec, 0);
    for (int e = 0; e < 5; ++e) p.axpy(-0.5, local_train(p, spec, d, 8, 1, 0.5, rng()));
    const auto probe = random_dataset(rng, 300, 6, 4);
    const auto r = evaluate(p, spec, probe);
    EXPECT_EQ(r.class_correct[0], 0u);
  }
}

TEST(Train, LocalTrainReturnsSummedStepGradients) {
  std::mt19937_64 rng(11);
  const auto d = random_dataset(rng, 20, 3, 2);
  const auto spec = ModelSpec::logistic(3, 2);
  const ParamVector p0(random_vector(rng, spec.param_dim()));
  // Full-batch single epoch: exactly one step.
  const auto g = local_train(p0, spec, d, 100, 1, 0.1, 1);
  EXPECT_LE(rel_error(g, loss_and_gradient(p0, spec, d).gradient), 1e-14);
  EXPECT_EQ(local_train(p0, spec, d, 4, 0, 0.1, 1).l2_norm(), 0.0);
  EXPECT_TRUE(local_train(p0, spec, d, 4, 2, 0.1, 9).bit_equal(local_train(p0, spec, d, 4, 2, 0.1, 9)));
  EXPECT_THROW(local_train(p0, spec, Dataset{}, 4, 1, 0.1, 1), FlError);
}

TEST(Train, RunRoundMatchesManualPipeline) {
  std::mt19937_64 rng(12);
  const auto spec = ModelSpec::logistic(4, 3);
  const auto a = random_dataset(rng, 30, 4, 3);
  const auto b = random_dataset(rng, 18, 4, 3);
  const std::vector<ClientData> clients{{"A", &a}, {"B", &b}};
  const TrainingHyper hyper{5, 0.2, 77, {0.5, 0.3, 4}};
  const ParamVector global(random_vector(rng, spec.param_dim()));
  const RoundPlan plan{1, 2, 2, {"B", "A"}};

  std::vector<ParamVector> updates;
  std::vector<double> weights;
  for (const auto* c : {&clients[1], &clients[0]}) {
    const auto raw = client_epoch_gradients(global, spec, *c->data, c->id, 2, 2, hyper);
    std::vector<ParamVector> pub;
    for (std::uint64_t i = 0; i < 2; ++i) pub.push_back(dp_apply(raw[i], dp_for_submission(hyper.dp, 2 + i, c->id)));
    updates.push_back(accumulate(pub));
    weights.push_back(static_cast<double>(c->data->size()));
  }
  EXPECT_TRUE(run_round(global, spec, clients, plan, hyper).bit_equal(fedavg(updates, weights, global, 0.2)));

  const RoundPlan missing{1, 0, 1, {"Z"}};
  EXPECT_THROW(run_round(global, spec, clients, missing, hyper), FlError);
  const RoundPlan none{1, 0, 1, {}};
  EXPECT_TRUE(run_round(global, spec, clients, none, hyper).bit_equal(global));
}

TEST(Train, RetrainTrajectoryChainsRounds) {
  std::mt19937_64 rng(13);
  const auto spec = ModelSpec::logistic(4, 3);
  const auto a = random_dataset(rng, 20, 4, 3);
  const std::vector<ClientData> clients{{"A", &a}};
  const TrainingHyper hyper{4, 0.1, 3, {10.0, 0.0, 1}};
  const std::vector<RoundPlan> sched{{1, 0, 1, {"A"}}, {2, 1, 1, {"A"}}, {3, 2, 1, {"A"}}};
  const auto r = retrain_from(init_params(spec, 0), spec, clients, sched, hyper);
  ASSERT_EQ(r.trajectory.size(), 3u);
  auto m = init_params(spec, 0);
  for (std::size_t i = 0; i < 3; ++i) {
    m = run_round(m, spec, clients, sched[i], hyper);
    EXPECT_TRUE(r.trajectory[i].bit_equal(m));
  }
  EXPECT_TRUE(r.final_model.bit_equal(m));
}

TEST(Dataset, MnistSubsetLoads) {
  const std::filesystem::path dir = std::filesystem::path(FEDLEDGER_SOURCE_DIR) / "data/mnist-subset";
  const auto train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  const auto test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  EXPECT_EQ(train.size(), 5000u);
  EXPECT_EQ(test.size(), 1000u);
  EXPECT_EQ(train.input_dim, 784u);
  std::vector<std::size_t> counts(10, 0);
  for (auto y : train.labels) ++counts.at(y);
  for (auto c : counts) EXPECT_EQ(c, 500u);
  EXPECT_TRUE(std::all_of(train.features.begin(), train.features.end(), [](double v) { return v >= 0 && v <= 1; }));
  EXPECT_EQ(take_per_class(train, 7).size(), 70u);
}

TEST(Dataset, CsvLoaderHeaderAndErrors) {
  const auto dir = std::filesystem::temp_directory_path() / "fedledger_csv_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "ok.csv") << "label,a,b\n1,0.5,2\n0,1,1\n";
  const auto d = load_csv(dir / "ok.csv");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.input_dim, 2u);
  EXPECT_EQ(d.labels[0], 1u);
  EXPECT_EQ(d.features[1], 2.0);
  std::ofstream(dir / "ragged.csv") << "1,0.5,2\n0,1\n";
  EXPECT_THROW(load_csv(dir / "ragged.csv"), DecodeError);
  std::ofstream(dir / "label.csv") << "1.5,0.5\n";
  EXPECT_THROW(load_csv(dir / "label.csv"), DecodeError);
}

TEST(Dataset, PartitionsCoverTheData) {
  std::mt19937_64 rng(14);
  const auto d = random_dataset(rng, 103, 3, 4);
  const auto iid = partition_iid(d, 4, 1);
  std::size_t total = 0;
  for (const auto& p : iid) {
    total += p.size();
    EXPECT_GE(p.size(), 25u);
    EXPECT_LE(p.size(), 26u);
  }
  EXPECT_EQ(total, 103u);

  const auto sharded = partition_class_sharded(d, 4, 2, 1, 3);
  const auto ones = static_cast<std::size_t>(std::count(d.labels.begin(), d.labels.end(), 1u));
  EXPECT_EQ(sharded[2].size(), ones);
  EXPECT_TRUE(std::all_of(sharded[2].labels.begin(), sharded[2].labels.end(), [](auto y) { return y == 1u; }));
  total = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    total += sharded[i].size();
    if (i != 2) {
      EXPECT_TRUE(std::none_of(sharded[i].labels.begin(), sharded[i].labels.end(), [](auto y) { return y == 1u; }));
    }
  }
  EXPECT_EQ(total, 103u);
  EXPECT_EQ(concat(sharded).size(), 103u);
}
