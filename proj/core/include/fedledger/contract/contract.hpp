#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedledger/auth/auth.hpp"
#include "fedledger/contract/payloads.hpp"
#include "fedledger/fl/model.hpp"
#include "fedledger/ledger/blob_store.hpp"
#include "fedledger/ledger/ledger.hpp"

namespace fedledger::contract {

enum class Phase : std::uint8_t { Idle = 0, Configured = 1, Training = 2, Unlearning = 3 };

std::string_view to_string(Phase phase);

enum class ContractErrc {
  AlreadyExists,
  InvalidId,
  InvalidArgument,
  UnregisteredActor,
  UnknownClient,
  NotAnAgent,
  NotAClient,
  TokenExpired,
  TokenInvalid,
  NoGlobalModel,
  InvalidConfig,
  WrongPhase,
  UnlearnedClient,
  EpochOutOfWindow,
  DuplicateSubmission,
  DimensionMismatch,
  IncompleteRound,
  UnknownRound,
  AlreadyUnlearned,
  NoOpenRequest,
  PlanMismatch,
  MissingBlob,
};

std::string_view to_string(ContractErrc code);

class ContractError : public std::runtime_error {
 public:
  ContractError(ContractErrc code, const std::string& what, std::string detail = {})
      : std::runtime_error(what), code_(code), detail_(std::move(detail)) {}

  ContractErrc code() const { return code_; }
  /// Offending field, missing client list, etc.
  const std::string& detail() const { return detail_; }

 private:
  ContractErrc code_;
  std::string detail_;
};

/// Thrown when a chain cannot be replayed into a consistent state.
class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradientEntry {
  Digest digest;
  std::uint64_t num_examples = 0;
  std::uint64_t seq = 0;
  bool operator==(const GradientEntry&) const = default;
};

/// Global model snapshot at an aggregation round; round 0 is the uploaded
/// initial model.
struct Checkpoint {
  std::uint64_t round = 0;
  Digest model_digest;
  std::uint64_t ledger_seq = 0;
  std::vector<std::string> participants;
  bool operator==(const Checkpoint&) const = default;
};

struct OpenRequest {
  std::uint64_t seq = 0;
  UnlearnPlan plan;
  bool operator==(const OpenRequest&) const = default;
};

struct ContractState {
  std::map<std::string, auth::Identity> user_pool;
  std::vector<std::string> registration_order;
  std::optional<Digest> global_model_digest;
  std::uint64_t model_dim = 0;
  std::optional<TrainingConfig> training_config;
  std::map<std::pair<std::uint64_t, std::string>, GradientEntry> gradient_log;
  std::map<std::uint64_t, Checkpoint> checkpoints;
  std::set<std::string> unlearned_clients;
  Phase phase = Phase::Idle;
  /// Completed aggregation rounds on the active timeline.
  std::uint64_t current_round = 0;
  std::optional<OpenRequest> open_request;
  std::uint64_t applied_txs = 0;

  /// Canonical snapshot used for byte-level state comparison.
  Bytes encode() const;
  /// Registered, non-unlearned clients in registration order.
  std::vector<std::string> active_clients() const;
  /// Epoch window [first, last) of a 1-based round.
  std::pair<std::uint64_t, std::uint64_t> round_window(std::uint64_t round) const;

  bool operator==(const ContractState&) const = default;
};

/// Applies one committed transaction. Live transitions and replay share
/// this function, so replaying a chain reproduces the live state exactly.
void apply(ContractState& state, const ledger::Transaction& tx);
ContractState replay(const ledger::Chain& chain);

struct ContractOptions {
  /// Seed for per-identity key generation.
  std::uint64_t key_seed = 0;
  std::uint64_t token_ttl = 1'000'000'000;
};

struct RegisterResult {
  bool success = false;
  auth::SessionToken token;
};

/// The smart-contract state machine. Transitions are serialized; a failed
/// transition changes neither the state nor the ledger.
class Contract {
 public:
  /// Replays whatever the ledger already holds.
  Contract(ledger::Ledger& ledger, ledger::BlobStore& blobs, ContractOptions options = {});

  RegisterResult register_identity(const std::string& id, auth::Role role, std::uint64_t now);

  void upload_global_model(const std::string& agent_id, const auth::SessionToken& token,
                           const fl::ParamVector& model, std::uint64_t now);

  void configure_training(const std::string& agent_id, const auth::SessionToken& token,
                          const TrainingConfig& config, std::uint64_t now);

  /// Returns the digest of the published DP(gradient) blob.
  Digest submit_gradient(const std::string& client_id, const auth::SessionToken& token,
                         std::uint64_t epoch, const fl::ParamVector& gradient,
                         std::uint64_t num_examples, std::uint64_t now);

  /// Returns the new global model digest.
  Digest aggregate(const std::string& agent_id, const auth::SessionToken& token,
                   std::uint64_t round, std::uint64_t now);

  UnlearnPlan request_unlearning(const std::string& client_id, const auth::SessionToken& token,
                                 std::uint64_t now);

  /// `retrained_rounds[i]` is the global model after `plan.schedule[i]`.
  /// Appends one retrain Aggregate per scheduled round plus the
  /// UnlearnComplete record, all in one transition. Returns the new global
  /// model digest.
  Digest complete_unlearning(const std::string& agent_id, const auth::SessionToken& token,
                             const UnlearnPlan& plan,
                             std::span<const fl::ParamVector> retrained_rounds, std::uint64_t now);

  ContractState state() const;
  fl::ParamVector load_model(const Digest& digest) const;
  fl::ParamVector global_model() const;

  ledger::Ledger& ledger() { return ledger_; }
  ledger::BlobStore& blobs() { return blobs_; }

 private:
  const auth::Identity& authorize(const std::string& actor, const auth::SessionToken& token,
                                  std::uint64_t now, auth::Role role, ContractErrc unknown) const;
  /// Endorses `txs`, stores `blobs` and applies the transactions to state.
  void commit(std::vector<ledger::Transaction> txs, std::vector<Bytes> blobs);
  ledger::Transaction make_tx(std::uint64_t offset, ledger::TxKind kind, const std::string& actor,
                              std::optional<std::uint64_t> epoch, Bytes payload,
                              std::uint64_t now) const;

  ledger::Ledger& ledger_;
  ledger::BlobStore& blobs_;
  ContractOptions options_;
  mutable std::mutex mu_;
  ContractState state_;
};

}  // namespace fedledger::contract
