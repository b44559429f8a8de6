#include "fedledger/harness/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <sstream>

#include "fedledger/contract/payloads.hpp"
#include "fedledger/fl/dataset.hpp"
#include "fedledger/fl/train.hpp"
#include "fedledger/ledger/blob_store.hpp"
#include "fedledger/ledger/chain_io.hpp"
#include "fedledger/ledger/ledger.hpp"
#include "json.hpp"

namespace fedledger::harness {

using auth::Role;
using nlohmann::ordered_json;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::size_t class_count(const fl::Dataset& a, const fl::Dataset& b) {
  std::uint32_t top = 0;
  for (auto y : a.labels) top = std::max(top, y);
  for (auto y : b.labels) top = std::max(top, y);
  return static_cast<std::size_t>(top) + 1;
}

struct Clock {
  std::uint64_t without_chain = 0;
  std::uint64_t with_chain = 0;
};

/// Owns one session's ledger, blob store and contract, and keeps the
/// simulated clocks in step with the ledger receipts.
class Runner {
 public:
  Runner(ExperimentConfig config, SessionData data, const std::optional<std::filesystem::path>& blob_dir,
         std::optional<ledger::Chain> existing = std::nullopt)
      : config_(std::move(config)),
        data_(std::move(data)),
        ledger_(ledger_config(config_), existing ? std::move(*existing) : ledger::Chain{}),
        blobs_(blob_dir ? ledger::BlobStore(*blob_dir) : ledger::BlobStore()),
        contract_(ledger_, blobs_, contract::ContractOptions{config_.seed, config_.token_ttl}),
        receipts_seen_(ledger_.receipts().size()) {
    table_.client_ids = data_.client_ids;
    table_.num_classes = data_.spec.num_classes;
  }

  void setup() {
    clock_.with_chain += config_.cost.init_cost;
    enroll(std::string(kAgentId), Role::Agent);
    for (const auto& id : data_.client_ids) {
      if (std::find(config_.exclude_clients.begin(), config_.exclude_clients.end(), id) ==
          config_.exclude_clients.end()) {
        enroll(id, Role::Client);
      }
    }
    contract_.upload_global_model(std::string(kAgentId), tokens_.at(std::string(kAgentId)),
                                  fl::init_params(data_.spec, derive_seed(config_.seed, "init", 0)),
                                  clock_.with_chain);
    charge_commits();
    contract::TrainingConfig tc;
    tc.epochs = config_.rounds * config_.k;
    tc.batch_size = config_.batch_size;
    tc.aggregation_interval = config_.k;
    tc.lr = config_.lr;
    tc.quorum = config_.quorum;
    tc.dp = config_.dp();
    contract_.configure_training(std::string(kAgentId), tokens_.at(std::string(kAgentId)), tc,
                                 clock_.with_chain);
    charge_commits();
  }

  void train_round(std::uint64_t round) {
    const auto state = contract_.state();
    const auto [lo, hi] = state.round_window(round);
    const auto global = contract_.global_model();
    const auto active = state.active_clients();

    std::vector<std::vector<fl::ParamVector>> grads(active.size());
    auto work = [&](std::size_t i) {
      const auto& d = dataset_of(active[i]);
      return fl::client_epoch_gradients(global, data_.spec, d, active[i], lo, hi - lo, hyper());
    };
    if (config_.parallel_clients && active.size() > 1) {
      std::vector<std::future<std::vector<fl::ParamVector>>> jobs;
      for (std::size_t i = 0; i < active.size(); ++i) jobs.push_back(std::async(std::launch::async, work, i));
      for (std::size_t i = 0; i < active.size(); ++i) grads[i] = jobs[i].get();
    } else {
      for (std::size_t i = 0; i < active.size(); ++i) grads[i] = work(i);
    }
    charge_epochs(hi - lo);

    for (std::size_t i = 0; i < active.size(); ++i) {
      const auto n = dataset_of(active[i]).size();
      for (std::uint64_t e = lo; e < hi; ++e) {
        contract_.submit_gradient(active[i], tokens_.at(active[i]), e, grads[i][e - lo], n, clock_.with_chain);
        charge_commits();
      }
    }
    contract_.aggregate(std::string(kAgentId), tokens_.at(std::string(kAgentId)), round, clock_.with_chain);
    charge_commits();
    table_.rows.push_back(record(round, RoundPhase::Train, contract_.global_model()));
  }

  UnlearnSessionResult unlearn(const std::string& client_id) {
    const auto plan = contract_.request_unlearning(client_id, tokens_.at(client_id), clock_.with_chain);
    charge_commits();

    const Clock base = clock_;
    std::uint64_t retrain_epochs = 0;
    for (const auto& rp : plan.schedule) retrain_epochs += rp.epochs;
    charge_epochs(retrain_epochs);

    const auto clients = data_.clients();
    unlearn::FlContext ctx{data_.spec, clients, hyper(), &data_.test};
    auto res = unlearn::execute_plan(plan, contract_, {std::string(kAgentId), tokens_.at(std::string(kAgentId))},
                                     ctx, clock_.with_chain);
    charge_commits();

    UnlearnSessionResult out{std::move(res.certificate), {}};
    std::uint64_t done = 0;
    for (std::size_t i = 0; i < plan.schedule.size(); ++i) {
      done += plan.schedule[i].epochs;
      auto row = record(plan.schedule[i].round, RoundPhase::Retrain, res.trajectory[i]);
      row.time_without_chain = base.without_chain + done * config_.cost.epoch_cost;
      row.time_with_chain = i + 1 == plan.schedule.size()
                                ? clock_.with_chain
                                : base.with_chain + done * config_.cost.epoch_cost;
      out.rows.push_back(row);
      table_.rows.push_back(std::move(row));
    }
    return out;
  }

  void flush() { ledger_.flush(); }

  void restore(std::map<std::string, auth::SessionToken> tokens, Clock clock) {
    tokens_ = std::move(tokens);
    clock_ = clock;
  }

  const MetricsTable& table() const { return table_; }
  const Clock& clock() const { return clock_; }
  const std::map<std::string, auth::SessionToken>& tokens() const { return tokens_; }
  contract::Contract& contract() { return contract_; }
  ledger::Ledger& ledger() { return ledger_; }

 private:
  static ledger::LedgerConfig ledger_config(const ExperimentConfig& c) {
    ledger::LedgerConfig lc;
    lc.n_endorsers = c.n_endorsers;
    lc.consensus.consensus_cost = c.cost.consensus_cost;
    lc.transitions_per_block = c.transitions_per_block;
    return lc;
  }

  fl::TrainingHyper hyper() const {
    return {config_.batch_size, config_.lr, derive_seed(config_.seed, "train", 0), config_.dp()};
  }

  const fl::Dataset& dataset_of(const std::string& id) const {
    const auto it = std::find(data_.client_ids.begin(), data_.client_ids.end(), id);
    return data_.client_data.at(static_cast<std::size_t>(it - data_.client_ids.begin()));
  }

  void enroll(const std::string& id, Role role) {
    tokens_[id] = contract_.register_identity(id, role, clock_.with_chain).token;
    charge_commits();
  }

  void charge_epochs(std::uint64_t epochs) {
    clock_.without_chain += epochs * config_.cost.epoch_cost;
    clock_.with_chain += epochs * config_.cost.epoch_cost;
  }

  void charge_commits() {
    const auto& receipts = ledger_.receipts();
    for (; receipts_seen_ < receipts.size(); ++receipts_seen_) {
      const auto& r = receipts[receipts_seen_];
      clock_.with_chain += r.latency_ticks + r.n_txs * config_.cost.tx_cost;
    }
  }

  MetricsRecord record(std::uint64_t round, RoundPhase phase, const fl::ParamVector& model) const {
    MetricsRecord r;
    r.round = round;
    r.phase = phase;
    const auto tr = fl::evaluate(model, data_.spec, data_.train);
    const auto te = fl::evaluate(model, data_.spec, data_.test);
    r.train_loss = tr.loss;
    r.train_accuracy = tr.overall_accuracy;
    r.test_loss = te.loss;
    r.test_accuracy = te.overall_accuracy;
    r.per_class_accuracy = te.per_class_accuracy;
    r.per_class_accuracy.resize(data_.spec.num_classes);
    for (const auto& d : data_.client_data) {
      if (d.empty()) {
        r.client_loss.emplace_back(std::nullopt);
        r.client_accuracy.emplace_back(std::nullopt);
        continue;
      }
      const auto e = fl::evaluate(model, data_.spec, d);
      r.client_loss.emplace_back(e.loss);
      r.client_accuracy.emplace_back(e.overall_accuracy);
    }
    r.time_without_chain = clock_.without_chain;
    r.time_with_chain = clock_.with_chain;
    return r;
  }

  ExperimentConfig config_;
  SessionData data_;
  ledger::Ledger ledger_;
  ledger::BlobStore blobs_;
  contract::Contract contract_;
  std::size_t receipts_seen_ = 0;
  std::map<std::string, auth::SessionToken> tokens_;
  Clock clock_;
  MetricsTable table_;
};

std::string tokens_json(const std::map<std::string, auth::SessionToken>& tokens) {
  ordered_json j = ordered_json::object();
  for (const auto& [id, t] : tokens) j[id] = auth::to_jwt(t);
  return j.dump(2) + "\n";
}

std::string session_json(const Clock& clock) {
  ordered_json j;
  j["time_without_chain"] = clock.without_chain;
  j["time_with_chain"] = clock.with_chain;
  return j.dump(2) + "\n";
}

void write_chain_exports(const std::filesystem::path& dir, const ledger::Chain& chain) {
  ledger::write_chain_bin(dir / "chain.bin", chain);
  ledger::write_chain_jsonl(dir / "chain.jsonl", chain, contract::payload_json);
}

}  // namespace

std::vector<fl::ClientData> SessionData::clients() const {
  std::vector<fl::ClientData> out;
  for (std::size_t i = 0; i < client_ids.size(); ++i) out.push_back({client_ids[i], &client_data[i]});
  return out;
}

SessionData prepare_data(const ExperimentConfig& config) {
  SessionData s;
  const auto& dc = config.dataset;
  switch (dc.kind) {
    case DatasetKind::Mnist:
      s.train = fl::load_idx(dc.dir / "train-images-idx3-ubyte", dc.dir / "train-labels-idx1-ubyte");
      s.test = fl::load_idx(dc.dir / "t10k-images-idx3-ubyte", dc.dir / "t10k-labels-idx1-ubyte");
      break;
    case DatasetKind::Csv:
      s.train = fl::load_csv(dc.train_file);
      s.test = fl::load_csv(dc.test_file);
      break;
    case DatasetKind::Blobs: {
      const auto all = fl::make_blobs(dc.train_per_class + dc.test_per_class, dc.num_classes, dc.dim, dc.spread,
                                      derive_seed(config.seed, "blobs", 0));
      s.train.input_dim = s.test.input_dim = all.input_dim;
      const std::size_t n_train = dc.train_per_class * dc.num_classes;
      for (std::size_t i = 0; i < all.size(); ++i) (i < n_train ? s.train : s.test).push(all.row(i), all.labels[i]);
      break;
    }
  }
  if (dc.kind != DatasetKind::Blobs) {
    if (dc.train_per_class > 0) s.train = fl::take_per_class(s.train, dc.train_per_class);
    if (dc.test_per_class > 0) s.test = fl::take_per_class(s.test, dc.test_per_class);
  }
  if (s.train.empty()) throw ConfigError("dataset", "training set is empty");
  if (s.test.input_dim != 0 && s.test.input_dim != s.train.input_dim) {
    throw ConfigError("dataset", "train and test widths differ");
  }

  const auto num_classes = class_count(s.train, s.test);
  s.spec = config.architecture == fl::Architecture::Mlp
               ? fl::ModelSpec::mlp(s.train.input_dim, config.hidden_sizes, num_classes)
               : fl::ModelSpec::logistic(s.train.input_dim, num_classes);

  const auto part_seed = derive_seed(config.seed, "partition", 0);
  s.client_data = config.partition.kind == PartitionKind::ClassSharded
                      ? fl::partition_class_sharded(s.train, config.n_clients, config.partition.holder,
                                                    config.partition.cls, part_seed)
                      : fl::partition_iid(s.train, config.n_clients, part_seed);
  s.client_ids = config.client_ids();
  for (std::size_t i = 0; i < s.client_data.size(); ++i) {
    s.client_data[i].owner = s.client_ids[i];
    if (s.client_data[i].empty()) throw ConfigError("partition", s.client_ids[i] + " received no data");
  }
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  std::optional<std::filesystem::path> blob_dir;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    blob_dir = *out_dir / "blobs";
    std::filesystem::remove_all(*blob_dir);
    std::filesystem::create_directories(*blob_dir);
  }
  auto runner = std::make_unique<Runner>(config, prepare_data(config), blob_dir);
  runner->setup();
  std::optional<unlearn::UnlearnCertificate> certificate;
  for (std::uint64_t r = 1; r <= config.rounds; ++r) {
    runner->train_round(r);
    if (config.unlearn_at && *config.unlearn_at == r) {
      certificate = runner->unlearn(*config.unlearn_target()).certificate;
    }
  }
  runner->flush();

  ExperimentResult result;
  result.metrics = runner->table();
  result.chain = runner->ledger().snapshot();
  result.state = runner->contract().state();
  result.final_model = runner->contract().global_model();
  result.certificate = certificate;

  if (out_dir) {
    write_text(*out_dir / "metrics.csv", metrics_csv(result.metrics));
    write_chain_exports(*out_dir, result.chain);
    write_text(*out_dir / "config.json", config_to_json(config));
    write_text(*out_dir / "tokens.json", tokens_json(runner->tokens()));
    write_text(*out_dir / "session.json", session_json(runner->clock()));
    const auto cert_path = *out_dir / "certificate.json";
    if (certificate) write_text(cert_path, certificate->to_json());
    else std::filesystem::remove(cert_path);
    emit_plots_data(result.metrics, config.cost, {1, 10, 200, 2000, config.rounds * config.k},
                    certificate ? &*certificate : nullptr, *out_dir / "plots");
  }
  return result;
}

UnlearnSessionResult unlearn_session(const std::filesystem::path& session_dir, const std::string& client_id) {
  const auto config = config_from_json(slurp(session_dir / "config.json"), session_dir);
  auto chain = ledger::read_chain_bin(session_dir / "chain.bin");

  std::map<std::string, auth::SessionToken> tokens;
  const auto token_json = ordered_json::parse(slurp(session_dir / "tokens.json"));
  for (const auto& [id, jwt] : token_json.items()) {
    tokens[id] = auth::from_jwt(jwt.get<std::string>());
  }
  if (!tokens.contains(client_id)) {
    throw contract::ContractError(contract::ContractErrc::UnknownClient, client_id + " is not registered");
  }
  const auto sj = ordered_json::parse(slurp(session_dir / "session.json"));
  Clock clock{sj.at("time_without_chain").get<std::uint64_t>(), sj.at("time_with_chain").get<std::uint64_t>()};

  const auto blob_dir = session_dir / "blobs";
  auto runner = std::make_unique<Runner>(config, prepare_data(config), blob_dir, std::move(chain));
  runner->contract().blobs().load_dir(blob_dir);
  runner->restore(std::move(tokens), clock);

  auto out = runner->unlearn(client_id);
  runner->flush();

  write_chain_exports(session_dir, runner->ledger().snapshot());
  std::string metrics = slurp(session_dir / "metrics.csv");
  for (const auto& row : out.rows) metrics += metrics_csv_row(runner->table(), row);
  write_text(session_dir / "metrics.csv", metrics);
  write_text(session_dir / "session.json", session_json(runner->clock()));
  write_text(session_dir / "certificate.json", out.certificate.to_json());
  return out;
}

}  // namespace fedledger::harness
