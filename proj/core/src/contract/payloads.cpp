#include "fedledger/contract/payloads.hpp"

#include <cstring>

#include "json.hpp"

namespace fedledger::contract {

using ledger::TxKind;

namespace {

Encoder tagged(TxKind kind) {
  Encoder enc;
  enc.u8(static_cast<std::uint8_t>(kind));
  return enc;
}

Decoder expect_tag(std::span<const std::uint8_t> b, TxKind kind) {
  Decoder dec(b);
  if (dec.u8() != static_cast<std::uint8_t>(kind)) throw DecodeError("payload kind tag mismatch");
  return dec;
}

void put_strings(Encoder& enc, const std::vector<std::string>& v) {
  enc.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& s : v) enc.str(s);
}

std::vector<std::string> get_strings(Decoder& dec) {
  const auto n = dec.u32();
  if (n > dec.remaining() / 4) throw DecodeError("string list longer than input");
  std::vector<std::string> v;
  v.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) v.push_back(dec.str());
  return v;
}

void put_dp(Encoder& enc, const fl::DPParams& dp) {
  enc.f64(dp.clip_norm).f64(dp.noise_multiplier).u64(dp.rng_seed);
}

fl::DPParams get_dp(Decoder& dec) {
  fl::DPParams dp;
  dp.clip_norm = dec.f64();
  dp.noise_multiplier = dec.f64();
  dp.rng_seed = dec.u64();
  return dp;
}

void put_plan(Encoder& enc, const UnlearnPlan& p) {
  enc.str(p.client_id).u64(p.rollback_round).digest(p.checkpoint_digest).u64(p.checkpoint_seq);
  put_strings(enc, p.excluded);
  enc.u32(static_cast<std::uint32_t>(p.schedule.size()));
  for (const auto& r : p.schedule) {
    enc.u64(r.round).u64(r.first_epoch).u64(r.epochs);
    put_strings(enc, r.participants);
  }
}

UnlearnPlan get_plan(Decoder& dec) {
  UnlearnPlan p;
  p.client_id = dec.str();
  p.rollback_round = dec.u64();
  p.checkpoint_digest = dec.digest();
  p.checkpoint_seq = dec.u64();
  p.excluded = get_strings(dec);
  const auto n = dec.u32();
  if (n > dec.remaining() / 28) throw DecodeError("schedule longer than input");
  for (std::uint32_t i = 0; i < n; ++i) {
    fl::RoundPlan r;
    r.round = dec.u64();
    r.first_epoch = dec.u64();
    r.epochs = dec.u64();
    r.participants = get_strings(dec);
    p.schedule.push_back(std::move(r));
  }
  return p;
}

}  // namespace

Bytes encode(const RegisterPayload& p) {
  auto enc = tagged(TxKind::Register);
  enc.str(p.id).u8(static_cast<std::uint8_t>(p.role)).raw(p.public_key.bytes);
  return std::move(enc).take();
}

Bytes encode(const ModelUploadPayload& p) {
  auto enc = tagged(TxKind::ModelUpload);
  enc.digest(p.model_digest).u64(p.dim);
  return std::move(enc).take();
}

Bytes encode(const ConfigPayload& p) {
  auto enc = tagged(TxKind::ConfigSet);
  const auto& c = p.config;
  enc.u64(c.epochs).u64(c.batch_size).u64(c.aggregation_interval).f64(c.lr).f64(c.quorum);
  put_dp(enc, c.dp);
  return std::move(enc).take();
}

Bytes encode(const GradientPayload& p) {
  auto enc = tagged(TxKind::GradientPublish);
  enc.str(p.client_id).u64(p.epoch).digest(p.dp_gradient_digest).u64(p.num_examples);
  return std::move(enc).take();
}

Bytes encode(const AggregatePayload& p) {
  auto enc = tagged(TxKind::Aggregate);
  enc.u64(p.round).digest(p.model_digest);
  put_strings(enc, p.participants);
  enc.boolean(p.retrain);
  return std::move(enc).take();
}

Bytes encode(const UnlearnRequestPayload& p) {
  auto enc = tagged(TxKind::UnlearnRequest);
  put_plan(enc, p.plan);
  return std::move(enc).take();
}

Bytes encode(const UnlearnCompletePayload& p) {
  auto enc = tagged(TxKind::UnlearnComplete);
  enc.u64(p.request_seq).str(p.client_id).u64(p.rollback_round).digest(p.pre_model_digest).digest(
      p.post_model_digest);
  return std::move(enc).take();
}

RegisterPayload decode_register(std::span<const std::uint8_t> b) {
  auto dec = expect_tag(b, TxKind::Register);
  RegisterPayload p;
  p.id = dec.str();
  const auto role = dec.u8();
  if (role != 1 && role != 2) throw DecodeError("unknown role");
  p.role = static_cast<auth::Role>(role);
  const auto key = dec.raw(32);
  std::memcpy(p.public_key.bytes.data(), key.data(), 32);
  dec.expect_end();
  return p;
}

ModelUploadPayload decode_model_upload(std::span<const std::uint8_t> b) {
  auto dec = expect_tag(b, TxKind::ModelUpload);
  ModelUploadPayload p;
  p.model_digest = dec.digest();
  p.dim = dec.u64();
  dec.expect_end();
  return p;
}

ConfigPayload decode_config(std::span<const std::uint8_t> b) {
  auto dec = expect_tag(b, TxKind::ConfigSet);
  ConfigPayload p;
  auto& c = p.config;
  c.epochs = dec.u64();
  c.batch_size = dec.u64();
  c.aggregation_interval = dec.u64();
  c.lr = dec.f64();
  c.quorum = dec.f64();
  c.dp = get_dp(dec);
  dec.expect_end();
  return p;
}

GradientPayload decode_gradient(std::span<const std::uint8_t> b) {
  auto dec = expect_tag(b, TxKind::GradientPublish);
  GradientPayload p;
  p.client_id = dec.str();
  p.epoch = dec.u64();
  p.dp_gradient_digest = dec.digest();
  p.num_examples = dec.u64();
  dec.expect_end();
  return p;
}

AggregatePayload decode_aggregate(std::span<const std::uint8_t> b) {
  auto dec = expect_tag(b, TxKind::Aggregate);
  AggregatePayload p;
  p.round = dec.u64();
  p.model_digest = dec.digest();
  p.participants = get_strings(dec);
  p.retrain = dec.boolean();
  dec.expect_end();
  return p;
}

UnlearnRequestPayload decode_unlearn_request(std::span<const std::uint8_t> b) {
  auto dec = expect_tag(b, TxKind::UnlearnRequest);
  UnlearnRequestPayload p{get_plan(dec)};
  dec.expect_end();
  return p;
}

UnlearnCompletePayload decode_unlearn_complete(std::span<const std::uint8_t> b) {
  auto dec = expect_tag(b, TxKind::UnlearnComplete);
  UnlearnCompletePayload p;
  p.request_seq = dec.u64();
  p.client_id = dec.str();
  p.rollback_round = dec.u64();
  p.pre_model_digest = dec.digest();
  p.post_model_digest = dec.digest();
  dec.expect_end();
  return p;
}

std::string payload_json(const ledger::Transaction& tx) {
  using nlohmann::ordered_json;
  ordered_json j;
  switch (tx.kind) {
    case TxKind::Register: {
      const auto p = decode_register(tx.payload);
      j = {{"id", p.id}, {"role", std::string(auth::to_string(p.role))},
           {"public_key", to_hex(p.public_key.bytes)}};
      break;
    }
    case TxKind::ModelUpload: {
      const auto p = decode_model_upload(tx.payload);
      j = {{"model_digest", p.model_digest.hex()}, {"dim", p.dim}};
      break;
    }
    case TxKind::ConfigSet: {
      const auto& c = decode_config(tx.payload).config;
      j = {{"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"aggregation_interval", c.aggregation_interval},
           {"lr", c.lr},
           {"quorum", c.quorum},
           {"dp", {{"clip_norm", c.dp.clip_norm},
                   {"noise_multiplier", c.dp.noise_multiplier},
                   {"rng_seed", c.dp.rng_seed}}}};
      break;
    }
    case TxKind::GradientPublish: {
      const auto p = decode_gradient(tx.payload);
      j = {{"client_id", p.client_id}, {"epoch", p.epoch},
           {"dp_gradient_digest", p.dp_gradient_digest.hex()}, {"num_examples", p.num_examples}};
      break;
    }
    case TxKind::Aggregate: {
      const auto p = decode_aggregate(tx.payload);
      j = {{"round", p.round}, {"model_digest", p.model_digest.hex()},
           {"participants", p.participants}, {"retrain", p.retrain}};
      break;
    }
    case TxKind::UnlearnRequest: {
      const auto& p = decode_unlearn_request(tx.payload).plan;
      auto sched = ordered_json::array();
      for (const auto& r : p.schedule) {
        sched.push_back({{"round", r.round}, {"first_epoch", r.first_epoch}, {"epochs", r.epochs},
                         {"participants", r.participants}});
      }
      j = {{"client_id", p.client_id}, {"rollback_round", p.rollback_round},
           {"checkpoint_digest", p.checkpoint_digest.hex()}, {"checkpoint_seq", p.checkpoint_seq},
           {"excluded", p.excluded}, {"schedule", sched}};
      break;
    }
    case TxKind::UnlearnComplete: {
      const auto p = decode_unlearn_complete(tx.payload);
      j = {{"request_seq", p.request_seq}, {"client_id", p.client_id},
           {"rollback_round", p.rollback_round}, {"pre_model_digest", p.pre_model_digest.hex()},
           {"post_model_digest", p.post_model_digest.hex()}};
      break;
    }
  }
  return j.dump();
}

}  // namespace fedledger::contract
