#include "fedledger/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

extern char** environ;

namespace fedledger::harness {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<std::string_view> known) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

std::uint64_t get_uint(const json& obj, const std::string& key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

double get_double(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute()) return p;
  return std::filesystem::weakly_canonical(base.empty() ? p : base / p);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::string ExperimentConfig::client_id(std::size_t index) { return fmt::format("C{}", index); }

std::vector<std::string> ExperimentConfig::client_ids() const {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n_clients; ++i) ids.push_back(client_id(i));
  return ids;
}

std::optional<std::string> ExperimentConfig::unlearn_target() const {
  if (!unlearn_at) return std::nullopt;
  if (unlearn_client) return unlearn_client;
  if (partition.kind == PartitionKind::ClassSharded) return client_id(partition.holder);
  return std::nullopt;
}

fl::DPParams ExperimentConfig::dp() const {
  return {clip_norm, noise_multiplier, derive_seed(seed, "dp", 0)};
}

void ExperimentConfig::validate() const {
  if (n_clients == 0) throw ConfigError("n_clients", "must be at least 1");
  if (rounds == 0) throw ConfigError("rounds", "must be at least 1");
  if (k == 0) throw ConfigError("k", "must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size", "must be at least 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be positive");
  if (!(quorum > 0.0 && quorum <= 1.0)) throw ConfigError("quorum", "must lie in (0, 1]");
  if (!(clip_norm > 0.0)) throw ConfigError("dp.clip_norm", "must be positive");
  if (!(noise_multiplier >= 0.0)) throw ConfigError("dp.noise_multiplier", "must be non-negative");
  if (token_ttl == 0) throw ConfigError("token_ttl", "must be positive");
  if (n_endorsers == 0) throw ConfigError("n_endorsers", "must be at least 1");
  if (transitions_per_block == 0) throw ConfigError("transitions_per_block", "must be at least 1");
  if (architecture == fl::Architecture::Mlp && hidden_sizes.empty()) {
    throw ConfigError("model.hidden", "an mlp needs at least one hidden layer");
  }
  if (std::any_of(hidden_sizes.begin(), hidden_sizes.end(), [](std::size_t h) { return h == 0; })) {
    throw ConfigError("model.hidden", "layer widths must be positive");
  }
  if (partition.kind == PartitionKind::ClassSharded) {
    if (n_clients < 2) throw ConfigError("partition", "class sharding needs two or more clients");
    if (partition.holder >= n_clients) throw ConfigError("partition.holder", "out of range");
  }
  switch (dataset.kind) {
    case DatasetKind::Mnist:
      if (dataset.dir.empty()) throw ConfigError("dataset.dir", "required for mnist");
      break;
    case DatasetKind::Csv:
      if (dataset.train_file.empty()) throw ConfigError("dataset.train", "required for csv");
      if (dataset.test_file.empty()) throw ConfigError("dataset.test", "required for csv");
      break;
    case DatasetKind::Blobs:
      if (dataset.train_per_class == 0) throw ConfigError("dataset.train_per_class", "must be positive");
      if (dataset.num_classes < 2) throw ConfigError("dataset.num_classes", "need two or more classes");
      if (dataset.dim == 0) throw ConfigError("dataset.dim", "must be positive");
      if (!(dataset.spread >= 0.0)) throw ConfigError("dataset.spread", "must be non-negative");
      break;
  }
  const auto ids = client_ids();
  for (const auto& c : exclude_clients) {
    if (std::find(ids.begin(), ids.end(), c) == ids.end()) throw ConfigError("exclude_clients", c + " is unknown");
  }
  if (exclude_clients.size() >= n_clients) throw ConfigError("exclude_clients", "no client would remain");
  if (unlearn_at) {
    if (*unlearn_at == 0 || *unlearn_at >= rounds) {
      throw ConfigError("unlearn_at", "must lie in [1, rounds)");
    }
    const auto target = unlearn_target();
    if (!target) throw ConfigError("unlearn_client", "required unless the partition is class-sharded");
    if (std::find(ids.begin(), ids.end(), *target) == ids.end()) {
      throw ConfigError("unlearn_client", *target + " is unknown");
    }
    if (std::find(exclude_clients.begin(), exclude_clients.end(), *target) != exclude_clients.end()) {
      throw ConfigError("unlearn_client", *target + " is excluded from the session");
    }
  } else if (unlearn_client) {
    throw ConfigError("unlearn_client", "set without unlearn_at");
  }
}

ExperimentConfig config_from_json(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  reject_unknown(j, "",
                 {"name", "seed", "n_clients", "dataset", "partition", "model", "rounds", "k", "batch_size", "lr",
                  "quorum", "dp", "cost", "unlearn_at", "unlearn_client", "token_ttl", "exclude_clients",
                  "n_endorsers", "transitions_per_block", "parallel_clients"});
  ExperimentConfig c;
  c.name = get_string(j, "name", c.name);
  c.seed = get_uint(j, "seed", c.seed);
  c.n_clients = get_uint(j, "n_clients", c.n_clients);
  c.rounds = get_uint(j, "rounds", c.rounds);
  c.k = get_uint(j, "k", c.k);
  c.batch_size = get_uint(j, "batch_size", c.batch_size);
  c.lr = get_double(j, "lr", c.lr);
  c.quorum = get_double(j, "quorum", c.quorum);
  c.token_ttl = get_uint(j, "token_ttl", c.token_ttl);
  c.n_endorsers = get_uint(j, "n_endorsers", c.n_endorsers);
  c.transitions_per_block = get_uint(j, "transitions_per_block", c.transitions_per_block);
  if (j.contains("parallel_clients")) {
    if (!j["parallel_clients"].is_boolean()) throw ConfigError("parallel_clients", "expected a boolean");
    c.parallel_clients = j["parallel_clients"].get<bool>();
  }
  if (j.contains("unlearn_at") && !j["unlearn_at"].is_null()) c.unlearn_at = get_uint(j, "unlearn_at", 0);
  if (j.contains("unlearn_client") && !j["unlearn_client"].is_null()) {
    c.unlearn_client = get_string(j, "unlearn_client", "");
  }
  if (j.contains("exclude_clients")) {
    if (!j["exclude_clients"].is_array()) throw ConfigError("exclude_clients", "expected an array");
    for (const auto& e : j["exclude_clients"]) {
      if (!e.is_string()) throw ConfigError("exclude_clients", "expected client ids");
      c.exclude_clients.push_back(e.get<std::string>());
    }
  }

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    if (!d.is_object()) throw ConfigError("dataset", "expected an object");
    reject_unknown(d, "dataset",
                   {"kind", "dir", "train", "test", "train_per_class", "test_per_class", "num_classes", "dim",
                    "spread"});
    const auto kind = get_string(d, "kind", "blobs");
    if (kind == "mnist") c.dataset.kind = DatasetKind::Mnist;
    else if (kind == "blobs") c.dataset.kind = DatasetKind::Blobs;
    else if (kind == "csv") c.dataset.kind = DatasetKind::Csv;
    else throw ConfigError("dataset.kind", "unknown dataset kind " + kind);
    c.dataset.dir = resolve(get_string(d, "dir", ""), base_dir);
    c.dataset.train_file = resolve(get_string(d, "train", ""), base_dir);
    c.dataset.test_file = resolve(get_string(d, "test", ""), base_dir);
    c.dataset.train_per_class = get_uint(d, "train_per_class", c.dataset.train_per_class);
    c.dataset.test_per_class = get_uint(d, "test_per_class", c.dataset.test_per_class);
    c.dataset.num_classes = get_uint(d, "num_classes", c.dataset.num_classes);
    c.dataset.dim = get_uint(d, "dim", c.dataset.dim);
    c.dataset.spread = get_double(d, "spread", c.dataset.spread);
  }
  if (j.contains("partition")) {
    const auto& p = j["partition"];
    if (!p.is_object()) throw ConfigError("partition", "expected an object");
    reject_unknown(p, "partition", {"kind", "holder", "class"});
    const auto kind = get_string(p, "kind", "iid");
    if (kind == "iid") c.partition.kind = PartitionKind::Iid;
    else if (kind == "class_sharded") c.partition.kind = PartitionKind::ClassSharded;
    else throw ConfigError("partition.kind", "unknown partition kind " + kind);
    c.partition.holder = get_uint(p, "holder", 0);
    c.partition.cls = static_cast<std::uint32_t>(get_uint(p, "class", 0));
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    if (!m.is_object()) throw ConfigError("model", "expected an object");
    reject_unknown(m, "model", {"architecture", "hidden"});
    const auto arch = get_string(m, "architecture", "logistic");
    if (arch == "logistic") c.architecture = fl::Architecture::MulticlassLogistic;
    else if (arch == "mlp") c.architecture = fl::Architecture::Mlp;
    else throw ConfigError("model.architecture", "unknown architecture " + arch);
    if (m.contains("hidden")) {
      for (const auto& h : m["hidden"]) {
        if (!h.is_number_unsigned()) throw ConfigError("model.hidden", "expected positive integers");
        c.hidden_sizes.push_back(h.get<std::size_t>());
      }
    }
  }
  if (j.contains("dp")) {
    const auto& d = j["dp"];
    reject_unknown(d, "dp", {"clip_norm", "noise_multiplier"});
    c.clip_norm = get_double(d, "clip_norm", c.clip_norm);
    c.noise_multiplier = get_double(d, "noise_multiplier", c.noise_multiplier);
  }
  if (j.contains("cost")) {
    const auto& d = j["cost"];
    reject_unknown(d, "cost", {"init", "consensus", "tx", "epoch", "setup_txs"});
    c.cost.init_cost = get_uint(d, "init", c.cost.init_cost);
    c.cost.consensus_cost = get_uint(d, "consensus", c.cost.consensus_cost);
    c.cost.tx_cost = get_uint(d, "tx", c.cost.tx_cost);
    c.cost.epoch_cost = get_uint(d, "epoch", c.cost.epoch_cost);
    c.cost.setup_txs = get_uint(d, "setup_txs", c.cost.setup_txs);
  }
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["n_clients"] = c.n_clients;
  ordered_json d;
  switch (c.dataset.kind) {
    case DatasetKind::Mnist:
      d["kind"] = "mnist";
      d["dir"] = c.dataset.dir.string();
      d["train_per_class"] = c.dataset.train_per_class;
      d["test_per_class"] = c.dataset.test_per_class;
      break;
    case DatasetKind::Csv:
      d["kind"] = "csv";
      d["train"] = c.dataset.train_file.string();
      d["test"] = c.dataset.test_file.string();
      d["train_per_class"] = c.dataset.train_per_class;
      d["test_per_class"] = c.dataset.test_per_class;
      break;
    case DatasetKind::Blobs:
      d["kind"] = "blobs";
      d["train_per_class"] = c.dataset.train_per_class;
      d["test_per_class"] = c.dataset.test_per_class;
      d["num_classes"] = c.dataset.num_classes;
      d["dim"] = c.dataset.dim;
      d["spread"] = c.dataset.spread;
      break;
  }
  j["dataset"] = d;
  if (c.partition.kind == PartitionKind::ClassSharded) {
    j["partition"] = {{"kind", "class_sharded"}, {"holder", c.partition.holder}, {"class", c.partition.cls}};
  } else {
    j["partition"] = {{"kind", "iid"}};
  }
  j["model"] = {{"architecture", c.architecture == fl::Architecture::Mlp ? "mlp" : "logistic"},
                {"hidden", c.hidden_sizes}};
  j["rounds"] = c.rounds;
  j["k"] = c.k;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["quorum"] = c.quorum;
  j["dp"] = {{"clip_norm", c.clip_norm}, {"noise_multiplier", c.noise_multiplier}};
  j["cost"] = {{"init", c.cost.init_cost},
               {"consensus", c.cost.consensus_cost},
               {"tx", c.cost.tx_cost},
               {"epoch", c.cost.epoch_cost},
               {"setup_txs", c.cost.setup_txs}};
  j["unlearn_at"] = c.unlearn_at ? ordered_json(*c.unlearn_at) : ordered_json(nullptr);
  j["unlearn_client"] = c.unlearn_client ? ordered_json(*c.unlearn_client) : ordered_json(nullptr);
  j["token_ttl"] = c.token_ttl;
  j["exclude_clients"] = c.exclude_clients;
  j["n_endorsers"] = c.n_endorsers;
  j["transitions_per_block"] = c.transitions_per_block;
  j["parallel_clients"] = c.parallel_clients;
  return j.dump(2) + "\n";
}

EnvList prefixed_environment() {
  EnvList out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view kv(*e);
    if (!kv.starts_with(kEnvPrefix)) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace_back(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string apply_env_overrides(std::string_view json_text, const EnvList& env) {
  json j = json::parse(json_text);
  for (const auto& [name, raw] : env) {
    if (!name.starts_with(kEnvPrefix) || name.size() == kEnvPrefix.size()) continue;
    std::string path = lower(name.substr(kEnvPrefix.size()));
    json* node = &j;
    std::size_t pos = 0;
    while (true) {
      const auto sep = path.find("__", pos);
      const std::string key = path.substr(pos, sep == std::string::npos ? std::string::npos : sep - pos);
      if (key.empty()) throw ConfigError(name, "malformed override name");
      if (sep == std::string::npos) {
        json value;
        try {
          value = json::parse(raw);
        } catch (const json::parse_error&) {
          value = raw;
        }
        (*node)[key] = std::move(value);
        break;
      }
      if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
      node = &(*node)[key];
      pos = sep + 2;
    }
  }
  return j.dump();
}

ExperimentConfig load_config(const std::filesystem::path& path, const EnvList& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  try {
    text = apply_env_overrides(text, env);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(text, std::filesystem::absolute(path).parent_path());
}

}  // namespace fedledger::harness
