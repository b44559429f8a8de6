#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedledger/auth/auth.hpp"
#include "fedledger/contract/contract.hpp"
#include "fedledger/fl/model.hpp"
#include "fedledger/fl/train.hpp"
#include "fedledger/ledger/chain.hpp"

namespace fedledger::unlearn {

enum class UnlearnErrc { MissingCheckpoint, NoRequestFound, MalformedCertificate };

class UnlearnError : public std::runtime_error {
 public:
  UnlearnError(UnlearnErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  UnlearnErrc code() const { return code_; }

 private:
  UnlearnErrc code_;
};

/// Ledger evidence for one completed unlearning.
struct UnlearnCertificate {
  std::string client_id;
  std::uint64_t request_seq = 0;
  std::uint64_t complete_seq = 0;
  std::uint64_t rollback_round = 0;
  Digest pre_model_digest;
  Digest post_model_digest;
  std::vector<std::optional<double>> per_class_accuracy_before;
  std::vector<std::optional<double>> per_class_accuracy_after;
  bool chain_ok = false;

  /// Pretty-printed JSON with hex digests; byte-stable for equal inputs.
  std::string to_json() const;
  static UnlearnCertificate from_json(std::string_view text);

  bool operator==(const UnlearnCertificate&) const = default;
};

/// Everything retraining needs besides the plan.
struct FlContext {
  fl::ModelSpec spec;
  /// Datasets of every client that may appear in a schedule.
  std::span<const fl::ClientData> clients;
  fl::TrainingHyper hyper;
  /// Held-out data for the per-class accuracy snapshots; may be null.
  const fl::Dataset* eval_data = nullptr;
};

struct AgentCredentials {
  std::string id;
  auth::SessionToken token;
};

struct ExecuteResult {
  fl::ParamVector model;
  /// Global model after each retrained round, in schedule order.
  std::vector<fl::ParamVector> trajectory;
  UnlearnCertificate certificate;
};

/// Rolls back to the plan's checkpoint, retrains the schedule without the
/// excluded clients, completes the request on chain and issues a certificate.
/// The ledger is flushed before the certificate is built.
ExecuteResult execute_plan(const contract::UnlearnPlan& plan, contract::Contract& contract,
                           const AgentCredentials& agent, const FlContext& ctx, std::uint64_t now);

struct AuditReport {
  std::string client_id;
  ledger::Transaction request;
  std::optional<ledger::Transaction> complete;
  std::uint64_t rollback_round = 0;
  std::optional<Digest> pre_model_digest;
  std::optional<Digest> post_model_digest;
  bool chain_ok = false;
  std::string chain_reason;

  std::string to_json() const;
};

/// Pure read over a chain export. Throws NoRequestFound when the client never
/// asked to be unlearned.
AuditReport audit_unlearning(const ledger::Chain& chain, const std::string& client_id);

struct RevalidationReport {
  bool ok = false;
  std::string reason;
};

/// Checks a certificate against a chain export without any contract state.
RevalidationReport revalidate_certificate(const ledger::Chain& chain, const UnlearnCertificate& cert);

}  // namespace fedledger::unlearn
