#include <gtest/gtest.h>

#include "fedledger/unlearn/unlearn.hpp"
#include "support.hpp"

using namespace fedledger;
using namespace fedledger::unlearn;
using fedledger::testing::Session;

namespace {

struct Unlearned {
  Session s;
  std::vector<fl::ClientData> clients;
  fl::Dataset eval;
  ExecuteResult result;
  contract::UnlearnPlan plan;

  explicit Unlearned(const std::string& target = "C1", std::size_t rounds_before = 2) {
    s.enroll();
    s.start(5, 1);
    for (std::size_t r = 0; r < rounds_before; ++r) s.play_round();
    clients = s.clients();
    eval = fl::make_blobs(10, 3, 4, 0.2, 5);
    plan = s.contract.request_unlearning(target, s.tokens[target], 0);
    result = execute_plan(plan, s.contract, {"A", s.tokens["A"]}, {s.spec, clients, s.hyper(), &eval}, 0);
  }
};

}  // namespace

TEST(ExecutePlan, MatchesIndependentRetrain) {
  Unlearned u;
  std::vector<fl::ClientData> kept;
  for (const auto& c : u.clients)
    if (c.id != "C1") kept.push_back(c);
  const auto expected = fl::retrain_from(fl::init_params(u.s.spec, 1), u.s.spec, kept, u.plan.schedule, u.s.hyper());
  EXPECT_TRUE(u.result.model.bit_equal(expected.final_model));
  ASSERT_EQ(u.result.trajectory.size(), 2u);
  EXPECT_EQ(*u.s.contract.state().global_model_digest, u.result.model.digest());

  const auto& c = u.result.certificate;
  EXPECT_EQ(c.client_id, "C1");
  EXPECT_EQ(c.rollback_round, 0u);
  EXPECT_EQ(c.post_model_digest, u.result.model.digest());
  EXPECT_NE(c.pre_model_digest, c.post_model_digest);
  EXPECT_TRUE(c.chain_ok);
  EXPECT_EQ(c.per_class_accuracy_before.size(), 3u);
  EXPECT_EQ(c.per_class_accuracy_after.size(), 3u);
  EXPECT_LT(c.request_seq, c.complete_seq);
  // Retrain aggregates plus the completion record.
  EXPECT_EQ(c.complete_seq, c.request_seq + 3);
  EXPECT_TRUE(revalidate_certificate(u.s.ledger.snapshot(), c).ok);
}

TEST(ExecutePlan, ZeroContributionLeavesModelUntouched) {
  Session s;
  s.enroll();
  s.start(4, 1);
  const auto before = s.contract.global_model();
  const auto clients = s.clients();
  const auto plan = s.contract.request_unlearning("C2", s.tokens["C2"], 0);
  const auto r = execute_plan(plan, s.contract, {"A", s.tokens["A"]}, {s.spec, clients, s.hyper(), nullptr}, 0);
  EXPECT_TRUE(r.model.bit_equal(before));
  EXPECT_EQ(r.certificate.pre_model_digest, r.certificate.post_model_digest);
  EXPECT_TRUE(r.certificate.per_class_accuracy_before.empty());
  EXPECT_TRUE(revalidate_certificate(s.ledger.snapshot(), r.certificate).ok);
}

TEST(ExecutePlan, MissingCheckpointBlob) {
  Session s;
  s.enroll();
  s.start(4, 1);
  s.play_round();
  auto plan = s.contract.request_unlearning("C0", s.tokens["C0"], 0);
  plan.checkpoint_digest = sha256(std::string_view("nowhere"));
  const auto clients = s.clients();
  try {
    execute_plan(plan, s.contract, {"A", s.tokens["A"]}, {s.spec, clients, s.hyper(), nullptr}, 0);
    FAIL();
  } catch (const UnlearnError& e) {
    EXPECT_EQ(e.code(), UnlearnErrc::MissingCheckpoint);
  }
}

TEST(Certificate, JsonRoundTripIsByteStable) {
  Unlearned u;
  const auto text = u.result.certificate.to_json();
  const auto back = UnlearnCertificate::from_json(text);
  EXPECT_EQ(back, u.result.certificate);
  EXPECT_EQ(back.to_json(), text);
  EXPECT_EQ(text.back(), '\n');

  UnlearnCertificate partial;
  partial.per_class_accuracy_before = {0.5, std::nullopt};
  EXPECT_EQ(UnlearnCertificate::from_json(partial.to_json()), partial);
}

TEST(Certificate, MalformedJson) {
  for (const std::string bad : {"", "{}", "[1,2]", R"({"client_id": 3})"}) {
    try {
      UnlearnCertificate::from_json(bad);
      FAIL() << bad;
    } catch (const UnlearnError& e) {
      EXPECT_EQ(e.code(), UnlearnErrc::MalformedCertificate);
    }
  }
  Unlearned u;
  auto text = u.result.certificate.to_json();
  const auto pos = text.find("\"pre_model_digest\": \"") + 21;
  text.erase(pos, 2);
  EXPECT_THROW(UnlearnCertificate::from_json(text), UnlearnError);
}

TEST(Audit, ReportsRequestAndCompletion) {
  Unlearned u;
  const auto chain = u.s.ledger.snapshot();
  const auto report = audit_unlearning(chain, "C1");
  EXPECT_TRUE(report.chain_ok);
  EXPECT_EQ(report.request.seq_no, u.result.certificate.request_seq);
  ASSERT_TRUE(report.complete.has_value());
  EXPECT_EQ(report.complete->seq_no, u.result.certificate.complete_seq);
  EXPECT_EQ(report.pre_model_digest, u.result.certificate.pre_model_digest);
  EXPECT_EQ(report.post_model_digest, u.result.certificate.post_model_digest);
  EXPECT_NE(report.to_json().find("\"client_id\""), std::string::npos);
}

TEST(Audit, OpenRequestHasNoCompletion) {
  Session s;
  s.enroll();
  s.start(4, 1);
  s.play_round();
  s.contract.request_unlearning("C0", s.tokens["C0"], 0);
  const auto report = audit_unlearning(s.ledger.snapshot(), "C0");
  EXPECT_FALSE(report.complete.has_value());
  EXPECT_FALSE(report.post_model_digest.has_value());
}

TEST(Audit, NoRequestFound) {
  Unlearned u;
  try {
    audit_unlearning(u.s.ledger.snapshot(), "C0");
    FAIL();
  } catch (const UnlearnError& e) {
    EXPECT_EQ(e.code(), UnlearnErrc::NoRequestFound);
  }
}

TEST(Audit, TamperedChainIsFlagged) {
  Unlearned u;
  auto blocks = u.s.ledger.snapshot().blocks();
  // The timestamp is outside the payload digest; only the block hash catches it.
  auto& tx = blocks[blocks.size() / 2].txs.front();
  tx.timestamp += 1;
  const auto tampered = ledger::Chain::from_blocks(blocks);
  const auto report = audit_unlearning(tampered, "C1");
  EXPECT_FALSE(report.chain_ok);
  EXPECT_FALSE(report.chain_reason.empty());
  const auto rv = revalidate_certificate(tampered, u.result.certificate);
  EXPECT_FALSE(rv.ok);
}

TEST(Revalidate, RejectsAlteredCertificates) {
  Unlearned u;
  const auto chain = u.s.ledger.snapshot();
  const auto& good = u.result.certificate;
  ASSERT_TRUE(revalidate_certificate(chain, good).ok);

  std::vector<std::pair<std::string, UnlearnCertificate>> bad;
  auto c = good;
  c.client_id = "C0";
  bad.emplace_back("client", c);
  c = good;
  c.post_model_digest = sha256(std::string_view("x"));
  bad.emplace_back("post", c);
  c = good;
  c.pre_model_digest = c.post_model_digest;
  bad.emplace_back("pre", c);
  c = good;
  c.rollback_round += 1;
  bad.emplace_back("rollback", c);
  c = good;
  c.request_seq = 0;
  bad.emplace_back("request_seq", c);
  c = good;
  c.complete_seq += 1;
  bad.emplace_back("complete_seq", c);
  c = good;
  c.chain_ok = false;
  bad.emplace_back("chain_ok", c);
  for (const auto& [name, cert] : bad) {
    const auto r = revalidate_certificate(chain, cert);
    EXPECT_FALSE(r.ok) << name;
    EXPECT_FALSE(r.reason.empty()) << name;
  }
}

TEST(Revalidate, ChainMissingTheCompletion) {
  Unlearned u;
  auto blocks = u.s.ledger.snapshot().blocks();
  blocks.pop_back();
  EXPECT_FALSE(revalidate_certificate(ledger::Chain::from_blocks(blocks), u.result.certificate).ok);
}

TEST(ExecutePlan, SecondUnlearningExcludesBoth) {
  Unlearned u("C1", 1);
  u.s.play_round();
  const auto plan = u.s.contract.request_unlearning("C0", u.s.tokens["C0"], 0);
  EXPECT_EQ(plan.excluded, (std::vector<std::string>{"C0", "C1"}));
  for (const auto& r : plan.schedule) EXPECT_EQ(r.participants, (std::vector<std::string>{"C2"}));
  const auto res = execute_plan(plan, u.s.contract, {"A", u.s.tokens["A"]}, {u.s.spec, u.clients, u.s.hyper(), nullptr}, 0);
  EXPECT_TRUE(revalidate_certificate(u.s.ledger.snapshot(), res.certificate).ok);
  EXPECT_EQ(contract::replay(u.s.ledger.snapshot()).encode(), u.s.contract.state().encode());
}
