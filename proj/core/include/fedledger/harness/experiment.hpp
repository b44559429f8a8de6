#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedledger/contract/contract.hpp"
#include "fedledger/fl/model.hpp"
#include "fedledger/harness/config.hpp"
#include "fedledger/harness/metrics.hpp"
#include "fedledger/ledger/chain.hpp"
#include "fedledger/unlearn/unlearn.hpp"

namespace fedledger::harness {

inline constexpr std::string_view kAgentId = "agent";

/// Datasets and model shape derived deterministically from a config.
struct SessionData {
  fl::ModelSpec spec;
  /// Union of every client's shard.
  fl::Dataset train;
  fl::Dataset test;
  std::vector<std::string> client_ids;
  std::vector<fl::Dataset> client_data;

  std::vector<fl::ClientData> clients() const;
};

SessionData prepare_data(const ExperimentConfig& config);

struct ExperimentResult {
  MetricsTable metrics;
  ledger::Chain chain;
  contract::ContractState state;
  fl::ParamVector final_model;
  std::optional<unlearn::UnlearnCertificate> certificate;
};

/// register -> upload -> configure -> rounds of {train, submit, aggregate},
/// with the configured unlearning after its round. When `out_dir` is set
/// the session is written there: metrics.csv, chain.bin, chain.jsonl,
/// config.json, tokens.json, session.json, blobs/, plots/ and, after an
/// unlearning, certificate.json.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct UnlearnSessionResult {
  unlearn::UnlearnCertificate certificate;
  std::vector<MetricsRecord> rows;
};

/// Reopens a session directory written by run_experiment, unlearns
/// `client_id` and rewrites the chain exports, metrics.csv, session.json and
/// certificate.json in place.
UnlearnSessionResult unlearn_session(const std::filesystem::path& session_dir, const std::string& client_id);

}  // namespace fedledger::harness
