#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fedledger/contract/contract.hpp"
#include "fedledger/fl/dataset.hpp"
#include "fedledger/fl/train.hpp"
#include "fedledger/ledger/blob_store.hpp"
#include "fedledger/ledger/ledger.hpp"

namespace fedledger::testing {

/// A small in-memory session: agent "A", clients "C0".."Cn-1" on blob data.
struct Session {
  explicit Session(std::size_t n_clients = 3, std::uint64_t ttl = 1'000'000, ledger::LedgerConfig lc = {})
      : ledger(std::move(lc)), contract(ledger, blobs, contract::ContractOptions{11, ttl}) {
    auto all = fl::make_blobs(12, 3, 4, 0.2, 99);
    shards = fl::partition_iid(all, n_clients, 5);
    spec = fl::ModelSpec::logistic(4, 3);
    for (std::size_t i = 0; i < n_clients; ++i) ids.push_back("C" + std::to_string(i));
  }

  void enroll(std::uint64_t now = 0) {
    tokens["A"] = contract.register_identity("A", auth::Role::Agent, now).token;
    for (const auto& id : ids) tokens[id] = contract.register_identity(id, auth::Role::Client, now).token;
  }

  void start(std::uint64_t epochs = 4, std::uint64_t k = 1, std::uint64_t now = 0) {
    contract.upload_global_model("A", tokens["A"], fl::init_params(spec, 1), now);
    config.epochs = epochs;
    config.aggregation_interval = k;
    config.batch_size = 4;
    config.lr = 0.3;
    config.dp = {10.0, 0.0, 77};
    contract.configure_training("A", tokens["A"], config, now);
  }

  fl::TrainingHyper hyper() const { return {config.batch_size, config.lr, 5, config.dp}; }

  std::vector<fl::ClientData> clients() const {
    std::vector<fl::ClientData> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], &shards[i]});
    return out;
  }

  /// Every active client submits its whole window, then the agent aggregates.
  void play_round(std::uint64_t now = 0) {
    const auto st = contract.state();
    const auto round = st.current_round + 1;
    const auto [lo, hi] = st.round_window(round);
    const auto global = contract.global_model();
    for (const auto& id : st.active_clients()) {
      const auto& data = shards[std::stoul(id.substr(1))];
      const auto grads = fl::client_epoch_gradients(global, spec, data, id, lo, hi - lo, hyper());
      for (auto e = lo; e < hi; ++e) contract.submit_gradient(id, tokens[id], e, grads[e - lo], data.size(), now);
    }
    contract.aggregate("A", tokens["A"], round, now);
  }

  ledger::Ledger ledger;
  ledger::BlobStore blobs;
  contract::Contract contract;
  std::vector<fl::Dataset> shards;
  fl::ModelSpec spec;
  std::vector<std::string> ids;
  std::map<std::string, auth::SessionToken> tokens;
  contract::TrainingConfig config;
};

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace fedledger::testing
