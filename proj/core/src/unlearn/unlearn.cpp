#include "fedledger/unlearn/unlearn.hpp"

#include <algorithm>

#include "fedledger/contract/payloads.hpp"
#include "json.hpp"

namespace fedledger::unlearn {

using ledger::Transaction;
using ledger::TxKind;
using nlohmann::ordered_json;

namespace {

ordered_json accuracies_to_json(const std::vector<std::optional<double>>& v) {
  auto arr = ordered_json::array();
  for (const auto& a : v) {
    if (a) arr.push_back(*a);
    else arr.push_back(nullptr);
  }
  return arr;
}

std::vector<std::optional<double>> accuracies_from_json(const ordered_json& arr) {
  std::vector<std::optional<double>> v;
  for (const auto& a : arr) {
    if (a.is_null()) v.emplace_back(std::nullopt);
    else v.emplace_back(a.get<double>());
  }
  return v;
}

Digest digest_field(const ordered_json& j, const char* key) {
  const auto bytes = from_hex(j.at(key).get<std::string>());
  if (bytes.size() != 32) throw DecodeError(std::string(key) + " is not a 32-byte digest");
  Digest d;
  std::copy(bytes.begin(), bytes.end(), d.bytes.begin());
  return d;
}

std::vector<std::optional<double>> snapshot(const FlContext& ctx, const fl::ParamVector& model) {
  if (ctx.eval_data == nullptr || ctx.eval_data->empty()) return {};
  return fl::evaluate(model, ctx.spec, *ctx.eval_data).per_class_accuracy;
}

}  // namespace

std::string UnlearnCertificate::to_json() const {
  ordered_json j;
  j["client_id"] = client_id;
  j["request_seq"] = request_seq;
  j["complete_seq"] = complete_seq;
  j["rollback_round"] = rollback_round;
  j["pre_model_digest"] = pre_model_digest.hex();
  j["post_model_digest"] = post_model_digest.hex();
  j["per_class_accuracy_before"] = accuracies_to_json(per_class_accuracy_before);
  j["per_class_accuracy_after"] = accuracies_to_json(per_class_accuracy_after);
  j["chain_ok"] = chain_ok;
  return j.dump(2) + "\n";
}

UnlearnCertificate UnlearnCertificate::from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    UnlearnCertificate c;
    c.client_id = j.at("client_id").get<std::string>();
    c.request_seq = j.at("request_seq").get<std::uint64_t>();
    c.complete_seq = j.at("complete_seq").get<std::uint64_t>();
    c.rollback_round = j.at("rollback_round").get<std::uint64_t>();
    c.pre_model_digest = digest_field(j, "pre_model_digest");
    c.post_model_digest = digest_field(j, "post_model_digest");
    c.per_class_accuracy_before = accuracies_from_json(j.at("per_class_accuracy_before"));
    c.per_class_accuracy_after = accuracies_from_json(j.at("per_class_accuracy_after"));
    c.chain_ok = j.at("chain_ok").get<bool>();
    return c;
  } catch (const std::exception& e) {
    throw UnlearnError(UnlearnErrc::MalformedCertificate, std::string("malformed certificate: ") + e.what());
  }
}

ExecuteResult execute_plan(const contract::UnlearnPlan& plan, contract::Contract& contract,
                           const AgentCredentials& agent, const FlContext& ctx, std::uint64_t now) {
  const auto state = contract.state();
  const auto blob = contract.blobs().get(plan.checkpoint_digest);
  if (!blob) {
    throw UnlearnError(UnlearnErrc::MissingCheckpoint,
                       "checkpoint for round " + std::to_string(plan.rollback_round) + " is not in the blob store");
  }
  const auto checkpoint = fl::ParamVector::from_blob(*blob);
  const auto pre = contract.global_model();

  std::vector<fl::ClientData> remaining;
  for (const auto& c : ctx.clients) {
    if (std::find(plan.excluded.begin(), plan.excluded.end(), c.id) == plan.excluded.end()) {
      remaining.push_back(c);
    }
  }
  auto retrained = fl::retrain_from(checkpoint, ctx.spec, remaining, plan.schedule, ctx.hyper);

  const std::uint64_t request_seq = state.open_request ? state.open_request->seq : 0;
  const Digest pre_digest = state.global_model_digest.value_or(Digest::zero());
  const Digest post_digest =
      contract.complete_unlearning(agent.id, agent.token, plan, retrained.trajectory, now);
  contract.ledger().flush();

  const auto chain = contract.ledger().snapshot();
  UnlearnCertificate cert;
  cert.client_id = plan.client_id;
  cert.request_seq = request_seq;
  cert.complete_seq = chain.next_seq() - 1;
  cert.rollback_round = plan.rollback_round;
  cert.pre_model_digest = pre_digest;
  cert.post_model_digest = post_digest;
  cert.per_class_accuracy_before = snapshot(ctx, pre);
  cert.per_class_accuracy_after = snapshot(ctx, retrained.final_model);
  cert.chain_ok = ledger::verify_chain(chain).ok;
  return {std::move(retrained.final_model), std::move(retrained.trajectory), std::move(cert)};
}

AuditReport audit_unlearning(const ledger::Chain& chain, const std::string& client_id) {
  const auto verification = ledger::verify_chain(chain);
  AuditReport report;
  report.client_id = client_id;
  report.chain_ok = verification.ok;
  report.chain_reason = verification.reason;

  const Transaction* request = nullptr;
  for (const auto& b : chain.blocks()) {
    for (const auto& tx : b.txs) {
      if (tx.kind == TxKind::UnlearnRequest && tx.actor_id == client_id && request == nullptr) request = &tx;
    }
  }
  if (request == nullptr) {
    throw UnlearnError(UnlearnErrc::NoRequestFound, "no unlearning request by " + client_id);
  }
  report.request = *request;
  try {
    report.rollback_round = contract::decode_unlearn_request(request->payload).plan.rollback_round;
  } catch (const DecodeError&) {
    report.chain_ok = false;
  }

  for (const auto& b : chain.blocks()) {
    for (const auto& tx : b.txs) {
      if (tx.kind != TxKind::UnlearnComplete) continue;
      try {
        const auto p = contract::decode_unlearn_complete(tx.payload);
        if (p.request_seq != request->seq_no) continue;
        report.complete = tx;
        report.pre_model_digest = p.pre_model_digest;
        report.post_model_digest = p.post_model_digest;
      } catch (const DecodeError&) {
        report.chain_ok = false;
      }
    }
  }
  return report;
}

std::string AuditReport::to_json() const {
  ordered_json j;
  j["client_id"] = client_id;
  j["request_seq"] = request.seq_no;
  j["complete_seq"] = complete ? ordered_json(complete->seq_no) : ordered_json(nullptr);
  j["rollback_round"] = rollback_round;
  j["pre_model_digest"] = pre_model_digest ? ordered_json(pre_model_digest->hex()) : ordered_json(nullptr);
  j["post_model_digest"] = post_model_digest ? ordered_json(post_model_digest->hex()) : ordered_json(nullptr);
  j["chain_ok"] = chain_ok;
  if (!chain_ok) j["chain_reason"] = chain_reason;
  return j.dump(2) + "\n";
}

RevalidationReport revalidate_certificate(const ledger::Chain& chain, const UnlearnCertificate& cert) {
  auto fail = [](std::string why) { return RevalidationReport{false, std::move(why)}; };
  if (!cert.chain_ok) return fail("certificate was issued over an unverified chain");
  const auto v = ledger::verify_chain(chain);
  if (!v.ok) return fail("chain verification failed: " + v.reason);
  if (cert.request_seq >= cert.complete_seq) return fail("request must precede completion");

  const auto* req = chain.find(cert.request_seq);
  const auto* done = chain.find(cert.complete_seq);
  if (req == nullptr || done == nullptr) return fail("referenced transaction not on chain");
  if (req->kind != TxKind::UnlearnRequest || req->actor_id != cert.client_id) {
    return fail("request_seq does not point at the client's UnlearnRequest");
  }
  if (done->kind != TxKind::UnlearnComplete) return fail("complete_seq does not point at an UnlearnComplete");
  try {
    const auto plan = contract::decode_unlearn_request(req->payload).plan;
    const auto p = contract::decode_unlearn_complete(done->payload);
    if (plan.client_id != cert.client_id || p.client_id != cert.client_id) return fail("client mismatch");
    if (p.request_seq != cert.request_seq) return fail("completion refers to another request");
    if (plan.rollback_round != cert.rollback_round || p.rollback_round != cert.rollback_round) {
      return fail("rollback round mismatch");
    }
    if (p.pre_model_digest != cert.pre_model_digest) return fail("pre-unlearning digest mismatch");
    if (p.post_model_digest != cert.post_model_digest) return fail("post-unlearning digest mismatch");
  } catch (const DecodeError& e) {
    return fail(std::string("undecodable payload: ") + e.what());
  }
  return {true, {}};
}

}  // namespace fedledger::unlearn
