#include "fedledger/contract/contract.hpp"

#include <algorithm>
#include <cmath>

#include "fedledger/fl/train.hpp"

namespace fedledger::contract {

using auth::Role;
using ledger::Transaction;
using ledger::TxKind;

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::Configured: return "Configured";
    case Phase::Training: return "Training";
    case Phase::Unlearning: return "Unlearning";
  }
  return "Unknown";
}

std::string_view to_string(ContractErrc code) {
  switch (code) {
    case ContractErrc::AlreadyExists: return "AlreadyExists";
    case ContractErrc::InvalidId: return "InvalidId";
    case ContractErrc::InvalidArgument: return "InvalidArgument";
    case ContractErrc::UnregisteredActor: return "UnregisteredActor";
    case ContractErrc::UnknownClient: return "UnknownClient";
    case ContractErrc::NotAnAgent: return "NotAnAgent";
    case ContractErrc::NotAClient: return "NotAClient";
    case ContractErrc::TokenExpired: return "TokenExpired";
    case ContractErrc::TokenInvalid: return "TokenInvalid";
    case ContractErrc::NoGlobalModel: return "NoGlobalModel";
    case ContractErrc::InvalidConfig: return "InvalidConfig";
    case ContractErrc::WrongPhase: return "WrongPhase";
    case ContractErrc::UnlearnedClient: return "UnlearnedClient";
    case ContractErrc::EpochOutOfWindow: return "EpochOutOfWindow";
    case ContractErrc::DuplicateSubmission: return "DuplicateSubmission";
    case ContractErrc::DimensionMismatch: return "DimensionMismatch";
    case ContractErrc::IncompleteRound: return "IncompleteRound";
    case ContractErrc::UnknownRound: return "UnknownRound";
    case ContractErrc::AlreadyUnlearned: return "AlreadyUnlearned";
    case ContractErrc::NoOpenRequest: return "NoOpenRequest";
    case ContractErrc::PlanMismatch: return "PlanMismatch";
    case ContractErrc::MissingBlob: return "MissingBlob";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// State

Bytes ContractState::encode() const {
  Encoder enc;
  enc.u32(static_cast<std::uint32_t>(user_pool.size()));
  for (const auto& [id, ident] : user_pool) {
    enc.str(id).u8(static_cast<std::uint8_t>(ident.role)).raw(ident.public_key.bytes);
  }
  enc.u32(static_cast<std::uint32_t>(registration_order.size()));
  for (const auto& id : registration_order) enc.str(id);
  enc.boolean(global_model_digest.has_value());
  if (global_model_digest) enc.digest(*global_model_digest);
  enc.u64(model_dim);
  enc.boolean(training_config.has_value());
  if (training_config) {
    const auto cfg = contract::encode(ConfigPayload{*training_config});
    enc.bytes(cfg);
  }
  enc.u32(static_cast<std::uint32_t>(gradient_log.size()));
  for (const auto& [key, e] : gradient_log) {
    enc.u64(key.first).str(key.second).digest(e.digest).u64(e.num_examples).u64(e.seq);
  }
  enc.u32(static_cast<std::uint32_t>(checkpoints.size()));
  for (const auto& [round, cp] : checkpoints) {
    enc.u64(round).u64(cp.round).digest(cp.model_digest).u64(cp.ledger_seq);
    enc.u32(static_cast<std::uint32_t>(cp.participants.size()));
    for (const auto& p : cp.participants) enc.str(p);
  }
  enc.u32(static_cast<std::uint32_t>(unlearned_clients.size()));
  for (const auto& c : unlearned_clients) enc.str(c);
  enc.u8(static_cast<std::uint8_t>(phase)).u64(current_round);
  enc.boolean(open_request.has_value());
  if (open_request) {
    enc.u64(open_request->seq);
    enc.bytes(contract::encode(UnlearnRequestPayload{open_request->plan}));
  }
  enc.u64(applied_txs);
  return std::move(enc).take();
}

std::vector<std::string> ContractState::active_clients() const {
  std::vector<std::string> out;
  for (const auto& id : registration_order) {
    if (user_pool.at(id).role == Role::Client && !unlearned_clients.contains(id)) out.push_back(id);
  }
  return out;
}

std::pair<std::uint64_t, std::uint64_t> ContractState::round_window(std::uint64_t round) const {
  if (!training_config || round == 0) return {0, 0};
  const auto k = training_config->aggregation_interval;
  const auto lo = (round - 1) * k;
  const auto hi = std::min(lo + k, training_config->epochs);
  return {lo, std::max(lo, hi)};
}

void apply(ContractState& s, const Transaction& tx) {
  if (!tx.digest_ok()) throw ReplayError("payload digest mismatch at seq " + std::to_string(tx.seq_no));
  try {
    switch (tx.kind) {
      case TxKind::Register: {
        auto p = decode_register(tx.payload);
        if (p.id != tx.actor_id || s.user_pool.contains(p.id))
          throw ReplayError("inconsistent Register at seq " + std::to_string(tx.seq_no));
        s.registration_order.push_back(p.id);
        s.user_pool.emplace(p.id, auth::Identity{p.id, p.role, p.public_key});
        break;
      }
      case TxKind::ModelUpload: {
        const auto p = decode_model_upload(tx.payload);
        s.global_model_digest = p.model_digest;
        s.model_dim = p.dim;
        s.checkpoints[0] = Checkpoint{0, p.model_digest, tx.seq_no, {}};
        break;
      }
      case TxKind::ConfigSet: {
        s.training_config = decode_config(tx.payload).config;
        s.phase = Phase::Configured;
        break;
      }
      case TxKind::GradientPublish: {
        const auto p = decode_gradient(tx.payload);
        s.gradient_log[{p.epoch, p.client_id}] = GradientEntry{p.dp_gradient_digest, p.num_examples, tx.seq_no};
        s.phase = Phase::Training;
        break;
      }
      case TxKind::Aggregate: {
        auto p = decode_aggregate(tx.payload);
        if (!p.retrain) s.current_round = p.round;
        s.checkpoints[p.round] = Checkpoint{p.round, p.model_digest, tx.seq_no, std::move(p.participants)};
        s.global_model_digest = p.model_digest;
        break;
      }
      case TxKind::UnlearnRequest: {
        auto p = decode_unlearn_request(tx.payload);
        s.unlearned_clients.insert(p.plan.client_id);
        // Submissions for the round in flight were computed against a model
        // that is about to be replaced; they never enter an aggregate.
        if (s.training_config) {
          const auto in_flight = s.current_round * s.training_config->aggregation_interval;
          std::erase_if(s.gradient_log, [&](const auto& kv) { return kv.first.first >= in_flight; });
        }
        s.open_request = OpenRequest{tx.seq_no, std::move(p.plan)};
        s.phase = Phase::Unlearning;
        break;
      }
      case TxKind::UnlearnComplete: {
        const auto p = decode_unlearn_complete(tx.payload);
        s.global_model_digest = p.post_model_digest;
        s.open_request.reset();
        s.phase = Phase::Training;
        break;
      }
    }
  } catch (const DecodeError& e) {
    throw ReplayError("undecodable payload at seq " + std::to_string(tx.seq_no) + ": " + e.what());
  }
  ++s.applied_txs;
}

ContractState replay(const ledger::Chain& chain) {
  ContractState s;
  for (const auto& b : chain.blocks())
    for (const auto& tx : b.txs) apply(s, tx);
  return s;
}

// ---------------------------------------------------------------------------
// Contract

Contract::Contract(ledger::Ledger& ledger, ledger::BlobStore& blobs, ContractOptions options)
    : ledger_(ledger), blobs_(blobs), options_(options), state_(replay(ledger.snapshot())) {}

ContractState Contract::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

fl::ParamVector Contract::load_model(const Digest& digest) const {
  auto blob = blobs_.get(digest);
  if (!blob) throw ContractError(ContractErrc::MissingBlob, "blob " + digest.hex() + " not in store");
  return fl::ParamVector::from_blob(*blob);
}

fl::ParamVector Contract::global_model() const {
  std::optional<Digest> d;
  {
    std::lock_guard lock(mu_);
    d = state_.global_model_digest;
  }
  if (!d) throw ContractError(ContractErrc::NoGlobalModel, "no global model uploaded");
  return load_model(*d);
}

const auth::Identity& Contract::authorize(const std::string& actor, const auth::SessionToken& token,
                                          std::uint64_t now, Role role, ContractErrc unknown) const {
  auto it = state_.user_pool.find(actor);
  if (it == state_.user_pool.end()) {
    throw ContractError(unknown, actor + " is not registered");
  }
  const auto& ident = it->second;
  const std::string label = ident.role == Role::Agent ? "Agent" : actor;
  if (token.subject_id != actor) {
    throw ContractError(ContractErrc::TokenInvalid, label + " jwt token ineligible: subject mismatch");
  }
  switch (auth::token_check(token, ident.public_key, now)) {
    case auth::CheckResult::Valid: break;
    case auth::CheckResult::Expired:
      throw ContractError(ContractErrc::TokenExpired, label + " jwt token expired");
    case auth::CheckResult::BadSignature:
      throw ContractError(ContractErrc::TokenInvalid, label + " jwt token ineligible: bad signature");
  }
  if (ident.role != role) {
    if (role == Role::Agent) throw ContractError(ContractErrc::NotAnAgent, actor + " is not an agent");
    throw ContractError(ContractErrc::NotAClient, actor + " is not a client");
  }
  return ident;
}

Transaction Contract::make_tx(std::uint64_t offset, TxKind kind, const std::string& actor,
                              std::optional<std::uint64_t> epoch, Bytes payload,
                              std::uint64_t now) const {
  return Transaction::make(ledger_.next_seq() + offset, kind, actor, epoch, std::move(payload), now);
}

void Contract::commit(std::vector<Transaction> txs, std::vector<Bytes> blobs) {
  // Endorsement may throw; nothing below runs in that case.
  const auto copy = txs;
  ledger_.submit(std::move(txs));
  for (auto& b : blobs) blobs_.put(std::move(b));
  for (const auto& tx : copy) apply(state_, tx);
}

RegisterResult Contract::register_identity(const std::string& id, Role role, std::uint64_t now) {
  std::lock_guard lock(mu_);
  if (id.empty()) throw ContractError(ContractErrc::InvalidId, "identity must be non-empty");
  if (state_.user_pool.contains(id)) {
    throw ContractError(ContractErrc::AlreadyExists, id + " already existed", id);
  }
  const auto kp = auth::key_generate(derive_seed(options_.key_seed, "identity", 0, id));
  const auth::Identity ident{id, role, kp.public_key};
  auto token = auth::token_issue(ident, kp.secret_key, now, options_.token_ttl);
  auto tx = make_tx(0, TxKind::Register, id, std::nullopt,
                    encode(RegisterPayload{id, role, kp.public_key}), now);
  commit({std::move(tx)}, {});
  return {true, std::move(token)};
}

void Contract::upload_global_model(const std::string& agent_id, const auth::SessionToken& token,
                                   const fl::ParamVector& model, std::uint64_t now) {
  std::lock_guard lock(mu_);
  authorize(agent_id, token, now, Role::Agent, ContractErrc::UnregisteredActor);
  if (state_.phase != Phase::Idle && state_.phase != Phase::Configured) {
    throw ContractError(ContractErrc::WrongPhase, "global model can only be uploaded before training");
  }
  if (model.size() == 0 || !model.all_finite()) {
    throw ContractError(ContractErrc::InvalidArgument, "model must be non-empty and finite");
  }
  Bytes blob = model.to_blob();
  const Digest d = sha256(blob);
  auto tx = make_tx(0, TxKind::ModelUpload, agent_id, std::nullopt,
                    encode(ModelUploadPayload{d, model.size()}), now);
  commit({std::move(tx)}, {std::move(blob)});
}

void Contract::configure_training(const std::string& agent_id, const auth::SessionToken& token,
                                  const TrainingConfig& config, std::uint64_t now) {
  std::lock_guard lock(mu_);
  authorize(agent_id, token, now, Role::Agent, ContractErrc::UnregisteredActor);
  if (!state_.global_model_digest) throw ContractError(ContractErrc::NoGlobalModel, "no global model uploaded");
  if (state_.phase != Phase::Idle && state_.phase != Phase::Configured) {
    throw ContractError(ContractErrc::WrongPhase, "training is already under way");
  }
  auto invalid = [](const char* field) {
    return ContractError(ContractErrc::InvalidConfig, std::string("invalid training config: ") + field, field);
  };
  if (config.epochs < 1) throw invalid("epochs");
  if (config.batch_size < 1) throw invalid("batch_size");
  if (config.aggregation_interval < 1) throw invalid("aggregation_interval");
  if (!(config.lr > 0.0) || !std::isfinite(config.lr)) throw invalid("lr");
  if (!(config.quorum > 0.0 && config.quorum <= 1.0)) throw invalid("quorum");
  if (!(config.dp.clip_norm > 0.0)) throw invalid("clip_norm");
  if (!(config.dp.noise_multiplier >= 0.0)) throw invalid("noise_multiplier");
  auto tx = make_tx(0, TxKind::ConfigSet, agent_id, std::nullopt, encode(ConfigPayload{config}), now);
  commit({std::move(tx)}, {});
}

Digest Contract::submit_gradient(const std::string& client_id, const auth::SessionToken& token,
                                 std::uint64_t epoch, const fl::ParamVector& gradient,
                                 std::uint64_t num_examples, std::uint64_t now) {
  std::lock_guard lock(mu_);
  authorize(client_id, token, now, Role::Client, ContractErrc::UnregisteredActor);
  if (state_.unlearned_clients.contains(client_id)) {
    throw ContractError(ContractErrc::UnlearnedClient, client_id + " has been unlearned");
  }
  if (state_.phase != Phase::Configured && state_.phase != Phase::Training) {
    throw ContractError(ContractErrc::WrongPhase,
                        std::string("gradients are not accepted in phase ") + std::string(to_string(state_.phase)));
  }
  const auto [lo, hi] = state_.round_window(state_.current_round + 1);
  if (epoch < lo || epoch >= hi) {
    throw ContractError(ContractErrc::EpochOutOfWindow,
                        "epoch " + std::to_string(epoch) + " outside window [" + std::to_string(lo) +
                            ", " + std::to_string(hi) + ")");
  }
  if (state_.gradient_log.contains({epoch, client_id})) {
    throw ContractError(ContractErrc::DuplicateSubmission,
                        "duplicate submission for epoch " + std::to_string(epoch) + " by " + client_id);
  }
  if (gradient.size() != state_.model_dim) {
    throw ContractError(ContractErrc::DimensionMismatch, "gradient dimension does not match the model");
  }
  if (num_examples == 0 || !gradient.all_finite()) {
    throw ContractError(ContractErrc::InvalidArgument, "gradient must be finite with a positive example count");
  }
  const auto noised = fl::dp_apply(gradient, fl::dp_for_submission(state_.training_config->dp, epoch, client_id));
  Bytes blob = noised.to_blob();
  const Digest d = sha256(blob);
  auto tx = make_tx(0, TxKind::GradientPublish, client_id, epoch,
                    encode(GradientPayload{client_id, epoch, d, num_examples}), now);
  commit({std::move(tx)}, {std::move(blob)});
  return d;
}

Digest Contract::aggregate(const std::string& agent_id, const auth::SessionToken& token,
                           std::uint64_t round, std::uint64_t now) {
  std::lock_guard lock(mu_);
  authorize(agent_id, token, now, Role::Agent, ContractErrc::UnregisteredActor);
  if (state_.phase != Phase::Configured && state_.phase != Phase::Training) {
    throw ContractError(ContractErrc::WrongPhase,
                        std::string("cannot aggregate in phase ") + std::string(to_string(state_.phase)));
  }
  const auto& cfg = *state_.training_config;
  if (round != state_.current_round + 1 || round > cfg.total_rounds()) {
    throw ContractError(ContractErrc::UnknownRound, "round " + std::to_string(round) + " is not open");
  }
  const auto [lo, hi] = state_.round_window(round);

  struct Contribution {
    std::string id;
    std::uint64_t first_seq;
    std::uint64_t num_examples;
  };
  std::vector<Contribution> complete;
  std::string missing;
  const auto active = state_.active_clients();
  for (const auto& id : active) {
    bool full = true;
    for (auto e = lo; e < hi && full; ++e) full = state_.gradient_log.contains({e, id});
    if (full) {
      const auto& first = state_.gradient_log.at({lo, id});
      complete.push_back({id, first.seq, first.num_examples});
    } else {
      missing += (missing.empty() ? "" : ",") + id;
    }
  }
  const auto required = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(cfg.quorum * static_cast<double>(active.size()) - 1e-9)));
  if (complete.size() < required) {
    throw ContractError(ContractErrc::IncompleteRound,
                        "round " + std::to_string(round) + " is missing submissions from " + missing,
                        missing);
  }
  // Ledger order of each client's first submission in the round.
  std::sort(complete.begin(), complete.end(),
            [](const Contribution& a, const Contribution& b) { return a.first_seq < b.first_seq; });

  std::vector<fl::ParamVector> updates;
  std::vector<double> weights;
  std::vector<std::string> participants;
  for (const auto& c : complete) {
    std::vector<fl::ParamVector> parts;
    for (auto e = lo; e < hi; ++e) parts.push_back(load_model(state_.gradient_log.at({e, c.id}).digest));
    updates.push_back(fl::accumulate(parts));
    weights.push_back(static_cast<double>(c.num_examples));
    participants.push_back(c.id);
  }
  const auto next = fl::fedavg(updates, weights, load_model(*state_.global_model_digest), cfg.lr);
  Bytes blob = next.to_blob();
  const Digest d = sha256(blob);
  auto tx = make_tx(0, TxKind::Aggregate, agent_id, hi - 1,
                    encode(AggregatePayload{round, d, std::move(participants), false}), now);
  commit({std::move(tx)}, {std::move(blob)});
  return d;
}

UnlearnPlan Contract::request_unlearning(const std::string& client_id, const auth::SessionToken& token,
                                         std::uint64_t now) {
  std::lock_guard lock(mu_);
  authorize(client_id, token, now, Role::Client, ContractErrc::UnknownClient);
  if (state_.unlearned_clients.contains(client_id)) {
    throw ContractError(ContractErrc::AlreadyUnlearned, client_id + " was already unlearned");
  }
  if (!state_.global_model_digest) throw ContractError(ContractErrc::NoGlobalModel, "no global model uploaded");
  if (state_.phase == Phase::Unlearning) {
    throw ContractError(ContractErrc::WrongPhase, "another unlearning request is open");
  }
  const std::uint64_t k = state_.training_config ? state_.training_config->aggregation_interval : 1;
  const std::uint64_t committed_epochs = state_.current_round * k;

  // Earliest aggregated contribution; submissions of the round in flight never
  // reached a checkpoint.
  std::optional<std::uint64_t> first_epoch;
  for (const auto& [key, entry] : state_.gradient_log) {
    if (key.second == client_id && key.first < committed_epochs) {
      if (!first_epoch || key.first < *first_epoch) first_epoch = key.first;
    }
  }
  UnlearnPlan plan;
  plan.client_id = client_id;
  plan.rollback_round = first_epoch ? *first_epoch / k : state_.current_round;
  const auto& cp = state_.checkpoints.at(plan.rollback_round);
  plan.checkpoint_digest = cp.model_digest;
  plan.checkpoint_seq = cp.ledger_seq;
  std::set<std::string> excluded = state_.unlearned_clients;
  excluded.insert(client_id);
  plan.excluded.assign(excluded.begin(), excluded.end());
  for (auto r = plan.rollback_round + 1; r <= state_.current_round; ++r) {
    const auto [lo, hi] = state_.round_window(r);
    fl::RoundPlan rp{r, lo, hi - lo, {}};
    for (const auto& p : state_.checkpoints.at(r).participants)
      if (!excluded.contains(p)) rp.participants.push_back(p);
    plan.schedule.push_back(std::move(rp));
  }
  auto tx = make_tx(0, TxKind::UnlearnRequest, client_id, std::nullopt,
                    encode(UnlearnRequestPayload{plan}), now);
  commit({std::move(tx)}, {});
  return plan;
}

Digest Contract::complete_unlearning(const std::string& agent_id, const auth::SessionToken& token,
                                     const UnlearnPlan& plan,
                                     std::span<const fl::ParamVector> retrained_rounds,
                                     std::uint64_t now) {
  std::lock_guard lock(mu_);
  authorize(agent_id, token, now, Role::Agent, ContractErrc::UnregisteredActor);
  if (state_.phase != Phase::Unlearning || !state_.open_request) {
    throw ContractError(ContractErrc::NoOpenRequest, "no open unlearning request");
  }
  const auto& open = *state_.open_request;
  if (!(open.plan == plan)) throw ContractError(ContractErrc::PlanMismatch, "plan does not match the open request");
  if (retrained_rounds.size() != plan.schedule.size()) {
    throw ContractError(ContractErrc::PlanMismatch, "one retrained model is required per scheduled round");
  }
  for (const auto& m : retrained_rounds) {
    if (m.size() != state_.model_dim || !m.all_finite()) {
      throw ContractError(ContractErrc::DimensionMismatch, "retrained model has the wrong dimension");
    }
  }

  std::vector<Transaction> txs;
  std::vector<Bytes> blobs;
  Digest post = plan.checkpoint_digest;
  for (std::size_t i = 0; i < plan.schedule.size(); ++i) {
    const auto& rp = plan.schedule[i];
    Bytes blob = retrained_rounds[i].to_blob();
    post = sha256(blob);
    txs.push_back(make_tx(txs.size(), TxKind::Aggregate, agent_id, rp.first_epoch + rp.epochs - 1,
                          encode(AggregatePayload{rp.round, post, rp.participants, true}), now));
    blobs.push_back(std::move(blob));
  }
  const UnlearnCompletePayload done{open.seq, plan.client_id, plan.rollback_round,
                                    *state_.global_model_digest, post};
  txs.push_back(make_tx(txs.size(), TxKind::UnlearnComplete, agent_id, std::nullopt, encode(done), now));
  commit(std::move(txs), std::move(blobs));
  return post;
}

}  // namespace fedledger::contract
