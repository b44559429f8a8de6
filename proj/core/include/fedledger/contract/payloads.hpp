#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedledger/auth/auth.hpp"
#include "fedledger/common/bytes.hpp"
#include "fedledger/fl/train.hpp"
#include "fedledger/ledger/chain.hpp"

namespace fedledger::contract {

// Canonical on-chain payloads, one per transaction kind. Every encoder starts
// with a one-byte kind tag so a payload can never be replayed under another
// kind. Decoders are strict (no trailing bytes).

struct TrainingConfig {
  std::uint64_t epochs = 1;
  std::uint64_t batch_size = 32;
  std::uint64_t aggregation_interval = 1;
  double lr = 0.1;
  /// Fraction of active clients required per round, in (0, 1].
  double quorum = 1.0;
  fl::DPParams dp;

  std::uint64_t total_rounds() const {
    return (epochs + aggregation_interval - 1) / aggregation_interval;
  }
  bool operator==(const TrainingConfig&) const = default;
};

struct RegisterPayload {
  std::string id;
  auth::Role role = auth::Role::Client;
  auth::PublicKey public_key;
  bool operator==(const RegisterPayload&) const = default;
};

struct ModelUploadPayload {
  Digest model_digest;
  std::uint64_t dim = 0;
  bool operator==(const ModelUploadPayload&) const = default;
};

struct ConfigPayload {
  TrainingConfig config;
  bool operator==(const ConfigPayload&) const = default;
};

struct GradientPayload {
  std::string client_id;
  std::uint64_t epoch = 0;
  Digest dp_gradient_digest;
  std::uint64_t num_examples = 0;
  bool operator==(const GradientPayload&) const = default;
};

struct AggregatePayload {
  std::uint64_t round = 0;
  Digest model_digest;
  std::vector<std::string> participants;
  /// True for rounds recomputed while completing an unlearning request.
  bool retrain = false;
  bool operator==(const AggregatePayload&) const = default;
};

struct UnlearnPlan {
  std::string client_id;
  std::uint64_t rollback_round = 0;
  Digest checkpoint_digest;
  std::uint64_t checkpoint_seq = 0;
  /// Every client excluded from retraining, including earlier unlearnings.
  std::vector<std::string> excluded;
  std::vector<fl::RoundPlan> schedule;
  bool operator==(const UnlearnPlan&) const = default;
};

struct UnlearnRequestPayload {
  UnlearnPlan plan;
  bool operator==(const UnlearnRequestPayload&) const = default;
};

struct UnlearnCompletePayload {
  std::uint64_t request_seq = 0;
  std::string client_id;
  std::uint64_t rollback_round = 0;
  Digest pre_model_digest;
  Digest post_model_digest;
  bool operator==(const UnlearnCompletePayload&) const = default;
};

Bytes encode(const RegisterPayload& p);
Bytes encode(const ModelUploadPayload& p);
Bytes encode(const ConfigPayload& p);
Bytes encode(const GradientPayload& p);
Bytes encode(const AggregatePayload& p);
Bytes encode(const UnlearnRequestPayload& p);
Bytes encode(const UnlearnCompletePayload& p);

RegisterPayload decode_register(std::span<const std::uint8_t> b);
ModelUploadPayload decode_model_upload(std::span<const std::uint8_t> b);
ConfigPayload decode_config(std::span<const std::uint8_t> b);
GradientPayload decode_gradient(std::span<const std::uint8_t> b);
AggregatePayload decode_aggregate(std::span<const std::uint8_t> b);
UnlearnRequestPayload decode_unlearn_request(std::span<const std::uint8_t> b);
UnlearnCompletePayload decode_unlearn_complete(std::span<const std::uint8_t> b);

/// Human-readable JSON object text for any transaction payload.
std::string payload_json(const ledger::Transaction& tx);

}  // namespace fedledger::contract
