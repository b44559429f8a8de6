#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "fedledger/harness/config.hpp"
#include "fedledger/harness/cost_model.hpp"
#include "fedledger/harness/experiment.hpp"
#include "fedledger/ledger/chain_io.hpp"
#include "fedledger/unlearn/unlearn.hpp"

namespace fh = fedledger::harness;
namespace fu = fedledger::unlearn;
namespace fl = fedledger::ledger;

namespace {

int cmd_run(const std::string& config_path, const std::string& out) {
  const auto config = fh::load_config(config_path);
  const auto result = fh::run_experiment(config, std::filesystem::path(out));
  const auto& last = result.metrics.rows.back();
  fmt::print("{}: {} aggregate rows, {} blocks, final test accuracy {:.4f}\n", config.name,
             result.metrics.rows.size(), result.chain.size(), last.test_accuracy);
  fmt::print("simulated time: {}s without chain, {}s with chain\n", last.time_without_chain, last.time_with_chain);
  if (result.certificate) {
    fmt::print("unlearned {} (rollback to round {}), certificate chain_ok={}\n", result.certificate->client_id,
               result.certificate->rollback_round, result.certificate->chain_ok);
  }
  return 0;
}

int cmd_unlearn(const std::string& session, const std::string& client) {
  const auto out = fh::unlearn_session(session, client);
  fmt::print("{}", out.certificate.to_json());
  return out.certificate.chain_ok ? 0 : 1;
}

int cmd_audit(const std::string& chain_path, const std::string& cert_path, const std::string& client) {
  const auto encodings = fl::read_chain_encodings(chain_path);
  const auto verification = fl::verify_encoded(encodings);
  fmt::print("chain: {} blocks, {}\n", encodings.size(),
             verification.ok ? std::string("verified")
                             : fmt::format("FAILED at height {}: {}", verification.first_bad_height.value_or(0),
                                           verification.reason));
  if (!verification.ok) return 1;
  const auto chain = fl::read_chain_bin(chain_path);

  int rc = 0;
  std::string subject = client;
  if (!cert_path.empty()) {
    std::ifstream in(cert_path);
    if (!in) throw std::runtime_error("cannot open " + cert_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto cert = fu::UnlearnCertificate::from_json(ss.str());
    const auto check = fu::revalidate_certificate(chain, cert);
    fmt::print("certificate: {}\n", check.ok ? std::string("valid") : "INVALID: " + check.reason);
    if (!check.ok) rc = 1;
    if (subject.empty()) subject = cert.client_id;
  }
  if (!subject.empty()) {
    const auto report = fu::audit_unlearning(chain, subject);
    fmt::print("{}", report.to_json());
    if (!report.chain_ok || !report.complete) rc = 1;
  }
  return rc;
}

int cmd_cost(std::optional<std::uint64_t> epochs, const fh::CostParams& params, bool table) {
  if (!epochs && !table) throw CLI::RequiredError("--epochs or --table");
  if (epochs) {
    const auto t = fh::estimate_time_cost(*epochs, params);
    fmt::print("epochs={} normal={} ours={} overhead={} overhead_ratio={:.6f}\n", *epochs, t.normal, t.ours,
               t.overhead(), t.overhead_ratio());
  }
  if (table) fmt::print("{}{}", epochs ? "\n" : "", fh::reference_report(params));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedledger: federated learning on an audited ledger with rollback unlearning"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory")->required();

  std::string session, client;
  auto* unl = app.add_subcommand("unlearn", "Unlearn a client from a saved session");
  unl->add_option("--session", session, "Session directory written by run")->required()->check(CLI::ExistingDirectory);
  unl->add_option("--client", client, "Client id")->required();

  std::string chain_path, cert_path, audit_client;
  auto* audit = app.add_subcommand("audit", "Verify a chain export and optionally a certificate");
  audit->add_option("--chain", chain_path, "chain.bin file")->required()->check(CLI::ExistingFile);
  audit->add_option("--cert", cert_path, "certificate.json file")->check(CLI::ExistingFile);
  audit->add_option("--client", audit_client, "Client whose unlearning to report");

  std::optional<std::uint64_t> epochs;
  fh::CostParams params;
  bool table = false;
  auto* cost = app.add_subcommand("cost-model", "Closed-form simulated time cost");
  cost->add_option("--epochs", epochs, "Number of epochs")->check(CLI::PositiveNumber);
  cost->add_option("--init", params.init_cost, "Network initialisation cost")->capture_default_str();
  cost->add_option("--consensus", params.consensus_cost, "Consensus cost")->capture_default_str();
  cost->add_option("--tx", params.tx_cost, "Cost per transaction")->capture_default_str();
  cost->add_option("--epoch-cost", params.epoch_cost, "Cost per training epoch")->capture_default_str();
  cost->add_option("--setup-txs", params.setup_txs, "Transactions outside the per-epoch stream")
      ->capture_default_str();
  cost->add_flag("--table", table, "Also compare against the reference timing table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir);
    if (*unl) return cmd_unlearn(session, client);
    if (*audit) return cmd_audit(chain_path, cert_path, audit_client);
    if (*cost) return cmd_cost(epochs, params, table);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
