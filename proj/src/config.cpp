#include "dtfl/config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

#include "dtfl/errors.hpp"

namespace dtfl {

using nlohmann::json;

RunMode RunMode::parse(const std::string& text) {
  if (text == "dynamic") return {Kind::Dynamic, 0};
  if (text == "fedavg") return {Kind::FedAvg, 0};
  if (text.rfind("static:", 0) == 0) {
    const std::string rest = text.substr(7);
    std::size_t used = 0;
    int tier = 0;
    try {
      tier = std::stoi(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == rest.size() && !rest.empty() && tier >= 1) return {Kind::Static, tier};
  }
  throw ConfigError("unknown mode '" + text + "' (expected dynamic, static:<m> or fedavg)");
}

std::string RunMode::str() const {
  switch (kind) {
    case Kind::Dynamic: return "dynamic";
    case Kind::FedAvg: return "fedavg";
    case Kind::Static: return "static:" + std::to_string(tier);
  }
  return "dynamic";
}

namespace {

// Reads an object field by field, rejecting keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Reader() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      const json& v = j_.at(key);
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ConfigError(where_ + "." + key + ": expected a non-negative integer");
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

bool positive_integer(const json& j) {
  return j.is_number_integer() && j.get<std::int64_t>() > 0;
}

std::vector<std::vector<std::size_t>> parse_blocks(const json& j) {
  if (!j.is_array()) throw ConfigError("model.blocks: expected an array");
  std::vector<std::vector<std::size_t>> out;
  for (const auto& b : j) {
    if (positive_integer(b)) {
      out.push_back({b.get<std::size_t>()});
    } else if (b.is_array()) {
      std::vector<std::size_t> widths;
      for (const auto& w : b) {
        if (!positive_integer(w)) throw ConfigError("model.blocks: widths must be positive integers");
        widths.push_back(w.get<std::size_t>());
      }
      out.push_back(std::move(widths));
    } else {
      throw ConfigError("model.blocks: each block is a width or a list of widths");
    }
  }
  return out;
}

std::string policy_name(AggregationPolicy p) {
  return p == AggregationPolicy::Uniform ? "uniform" : "data_weighted";
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader top(j, "config");
  top.get("seed", c.seed);
  if (const json* m = top.child("model")) {
    Reader r(*m, "model");
    if (const json* b = r.child("blocks")) c.blocks = parse_blocks(*b);
    r.finish();
  }
  if (const json* t = top.child("tiers")) {
    Reader r(*t, "tiers");
    r.get("count", c.tiers);
    r.get("cuts", c.cuts);
    r.finish();
  }
  top.get("clients", c.clients);
  top.get("rounds", c.rounds);
  top.get("participation", c.participation);
  std::string policy = policy_name(c.aggregation);
  top.get("aggregation", policy);
  if (policy == "uniform")
    c.aggregation = AggregationPolicy::Uniform;
  else if (policy == "data_weighted")
    c.aggregation = AggregationPolicy::DataWeighted;
  else
    throw ConfigError("aggregation: expected 'uniform' or 'data_weighted'");
  if (const json* o = top.child("optimizer")) {
    Reader r(*o, "optimizer");
    std::string kind = c.optimizer.kind == OptimKind::SGD ? "sgd" : "adam";
    r.get("kind", kind);
    if (kind == "sgd")
      c.optimizer.kind = OptimKind::SGD;
    else if (kind == "adam")
      c.optimizer.kind = OptimKind::Adam;
    else
      throw ConfigError("optimizer.kind: expected 'sgd' or 'adam'");
    r.get("learning_rate", c.optimizer.learning_rate);
    r.get("beta1", c.optimizer.beta1);
    r.get("beta2", c.optimizer.beta2);
    r.get("epsilon", c.optimizer.epsilon);
    r.finish();
  }
  top.get("batch_size", c.batch_size);
  top.get("local_epochs", c.local_epochs);
  if (const json* d = top.child("dataset")) {
    Reader r(*d, "dataset");
    r.get("kind", c.dataset.kind);
    r.get("classes", c.dataset.classes);
    r.get("dim", c.dataset.dim);
    r.get("samples", c.dataset.samples);
    r.get("test_samples", c.dataset.test_samples);
    r.get("separation", c.dataset.separation);
    r.get("path", c.dataset.path);
    r.get("test_path", c.dataset.test_path);
    r.get("label_column", c.dataset.label_column);
    r.get("test_fraction", c.dataset.test_fraction);
    r.finish();
  }
  if (const json* p = top.child("partition")) {
    Reader r(*p, "partition");
    r.get("kind", c.partition.kind);
    r.get("beta", c.partition.beta);
    r.finish();
  }
  if (const json* p = top.child("profiles")) {
    Reader r(*p, "profiles");
    if (const json* pool = r.child("pool")) {
      if (!pool->is_array()) throw ConfigError("profiles.pool: expected an array");
      c.profiles.pool.clear();
      for (const auto& entry : *pool) {
        Reader e(entry, "profiles.pool[]");
        double cpu = 0.0;
        double mbps = 0.0;
        e.get("cpu", cpu);
        e.get("mbps", mbps);
        e.finish();
        c.profiles.pool.push_back({cpu, mbps_to_bytes(mbps)});
      }
    }
    r.get("assignment", c.profiles.assignment);
    if (const json* ch = r.child("churn")) {
      Reader cr(*ch, "profiles.churn");
      cr.get("period", c.profiles.churn_period);
      cr.get("fraction", c.profiles.churn_fraction);
      cr.finish();
    }
    r.finish();
  }
  if (const json* cm = top.child("cost_model")) {
    Reader r(*cm, "cost_model");
    r.get("client_flops_per_s", c.cost.client_flops_per_s);
    r.get("server_flops_per_s", c.cost.server_flops_per_s);
    r.get("value_bytes", c.cost.value_bytes);
    r.get("label_bytes", c.cost.label_bytes);
    r.finish();
  }
  if (const json* s = top.child("scheduler")) {
    Reader r(*s, "scheduler");
    std::string mode = c.scheduler.mode.str();
    r.get("mode", mode);
    c.scheduler.mode = RunMode::parse(mode);
    r.get("ema_alpha", c.scheduler.ema_alpha);
    r.get("noise_sigma", c.scheduler.noise_sigma);
    r.get("cold_start", c.scheduler.cold_start);
    r.finish();
  }
  if (const json* p = top.child("privacy")) {
    Reader r(*p, "privacy");
    r.get("alpha", c.privacy.alpha);
    r.get("patch_shuffle", c.privacy.patch_shuffle);
    r.get("patch_size", c.privacy.patch_size);
    if (const json* ca = r.child("client_alpha")) {
      if (!ca->is_object()) throw ConfigError("privacy.client_alpha: expected an object of id -> alpha");
      for (const auto& [key, value] : ca->items()) {
        try {
          c.privacy.client_alpha[std::stoi(key)] = value.get<double>();
        } catch (const std::exception&) {
          throw ConfigError("privacy.client_alpha: bad entry '" + key + "'");
        }
      }
    }
    r.finish();
  }
  top.get("train", c.train);
  top.get("target_accuracy", c.target_accuracy);
  top.get("jobs", c.jobs);
  top.get("output_dir", c.output_dir);
  top.finish();
  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.blocks) blocks.push_back(b);
  json pool = json::array();
  for (const auto& p : c.profiles.pool) pool.push_back({{"cpu", p.cpu_factor}, {"mbps", p.bandwidth / 125'000.0}});
  json client_alpha = json::object();
  for (const auto& [id, a] : c.privacy.client_alpha) client_alpha[std::to_string(id)] = a;
  return json{
      {"seed", c.seed},
      {"model", {{"blocks", blocks}}},
      {"tiers", {{"count", c.tiers}, {"cuts", c.cuts}}},
      {"clients", c.clients},
      {"rounds", c.rounds},
      {"participation", c.participation},
      {"aggregation", policy_name(c.aggregation)},
      {"optimizer",
       {{"kind", c.optimizer.kind == OptimKind::SGD ? "sgd" : "adam"},
        {"learning_rate", c.optimizer.learning_rate},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon}}},
      {"batch_size", c.batch_size},
      {"local_epochs", c.local_epochs},
      {"dataset",
       {{"kind", c.dataset.kind},
        {"classes", c.dataset.classes},
        {"dim", c.dataset.dim},
        {"samples", c.dataset.samples},
        {"test_samples", c.dataset.test_samples},
        {"separation", c.dataset.separation},
        {"path", c.dataset.path},
        {"test_path", c.dataset.test_path},
        {"label_column", c.dataset.label_column},
        {"test_fraction", c.dataset.test_fraction}}},
      {"partition", {{"kind", c.partition.kind}, {"beta", c.partition.beta}}},
      {"profiles",
       {{"pool", pool},
        {"assignment", c.profiles.assignment},
        {"churn", {{"period", c.profiles.churn_period}, {"fraction", c.profiles.churn_fraction}}}}},
      {"cost_model",
       {{"client_flops_per_s", c.cost.client_flops_per_s},
        {"server_flops_per_s", c.cost.server_flops_per_s},
        {"value_bytes", c.cost.value_bytes},
        {"label_bytes", c.cost.label_bytes}}},
      {"scheduler",
       {{"mode", c.scheduler.mode.str()},
        {"ema_alpha", c.scheduler.ema_alpha},
        {"noise_sigma", c.scheduler.noise_sigma},
        {"cold_start", c.scheduler.cold_start}}},
      {"privacy",
       {{"alpha", c.privacy.alpha},
        {"patch_shuffle", c.privacy.patch_shuffle},
        {"patch_size", c.privacy.patch_size},
        {"client_alpha", client_alpha}}},
      {"train", c.train},
      {"target_accuracy", c.target_accuracy},
      {"jobs", c.jobs},
      {"output_dir", c.output_dir},
  };
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (blocks.empty()) fail("model.blocks must list at least one block");
  for (const auto& b : blocks) {
    if (b.empty()) fail("model.blocks: empty block");
    for (std::size_t w : b)
      if (w == 0) fail("model.blocks: widths must be positive");
  }
  if (tiers < 1) fail("tiers.count must be >= 1");
  if (static_cast<std::size_t>(tiers) > blocks.size()) fail("tiers.count exceeds the number of blocks");
  if (!cuts.empty() && cuts.size() != static_cast<std::size_t>(tiers)) fail("tiers.cuts needs one entry per tier");
  if (clients < 1) fail("clients must be >= 1");
  if (rounds < 0) fail("rounds must be >= 0");
  if (!(participation > 0.0 && participation <= 1.0)) fail("participation must lie in (0, 1]");
  if (!(optimizer.learning_rate >= 0.0)) fail("optimizer.learning_rate must be >= 0");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (local_epochs < 1) fail("local_epochs must be >= 1");
  if (dataset.kind == "blobs") {
    if (dataset.classes < 2) fail("dataset.classes must be >= 2");
    if (dataset.dim < 1) fail("dataset.dim must be >= 1");
    if (dataset.samples < static_cast<std::size_t>(clients)) fail("dataset.samples must be >= clients");
  } else if (dataset.kind == "csv") {
    if (dataset.path.empty()) fail("dataset.path is required for csv datasets");
    if (!(dataset.test_fraction >= 0.0 && dataset.test_fraction < 1.0)) fail("dataset.test_fraction must lie in [0, 1)");
  } else {
    fail("dataset.kind: expected 'blobs' or 'csv'");
  }
  if (partition.kind != "iid" && partition.kind != "dirichlet") fail("partition.kind: expected 'iid' or 'dirichlet'");
  if (partition.kind == "dirichlet" && !(partition.beta > 0.0)) fail("partition.beta must be > 0");
  if (profiles.pool.empty()) fail("profiles.pool must not be empty");
  for (const auto& p : profiles.pool)
    if (!(p.cpu_factor > 0.0 && p.bandwidth > 0.0)) fail("profiles.pool entries need cpu > 0 and mbps > 0");
  if (profiles.assignment != "round_robin" && profiles.assignment != "random")
    fail("profiles.assignment: expected 'round_robin' or 'random'");
  if (profiles.churn_period < 1) fail("profiles.churn.period must be >= 1");
  if (!(profiles.churn_fraction >= 0.0 && profiles.churn_fraction <= 1.0)) fail("profiles.churn.fraction must lie in [0, 1]");
  if (!(cost.client_flops_per_s > 0.0 && cost.server_flops_per_s > 0.0 && cost.value_bytes > 0.0 &&
        cost.label_bytes >= 0.0))
    fail("cost_model: rates and sizes must be positive");
  if (scheduler.mode.kind == RunMode::Kind::Static && scheduler.mode.tier > tiers)
    fail("scheduler.mode: static tier exceeds tiers.count");
  if (!(scheduler.ema_alpha > 0.0 && scheduler.ema_alpha <= 1.0)) fail("scheduler.ema_alpha must lie in (0, 1]");
  if (!(scheduler.noise_sigma >= 0.0)) fail("scheduler.noise_sigma must be >= 0");
  if (scheduler.cold_start != "probe" && scheduler.cold_start != "reference")
    fail("scheduler.cold_start: expected 'probe' or 'reference'");
  try {
    privacy.validate();
  } catch (const InputError& e) {
    fail(std::string("privacy: ") + e.what());
  }
  if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) fail("target_accuracy must lie in [0, 1]");
  if (jobs < 1) fail("jobs must be >= 1");
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace dtfl
