#include "dtfl/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtfl/errors.hpp"
#include "dtfl/rng.hpp"

namespace dtfl {

namespace {

Dataset take_rows(const Dataset& d, std::span<const std::size_t> rows) {
  Dataset out;
  out.features = gather_rows(d.features, rows);
  out.classes = d.classes;
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(d.labels[r]);
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> build_datasets(const RunConfig& cfg) {
  const auto& dc = cfg.dataset;
  Dataset train;
  Dataset test;
  if (dc.kind == "blobs") {
    Dataset all = synth_blobs(dc.classes, dc.dim, dc.samples + dc.test_samples, dc.separation,
                              derive_seed(cfg.seed, {0xda7a}));
    std::vector<std::size_t> head(dc.samples);
    std::iota(head.begin(), head.end(), std::size_t{0});
    std::vector<std::size_t> tail(dc.test_samples);
    std::iota(tail.begin(), tail.end(), dc.samples);
    train = take_rows(all, head);
    test = take_rows(all, tail);
  } else {
    train = load_csv(dc.path, dc.label_column);
    if (!dc.test_path.empty()) {
      test = load_csv(dc.test_path, dc.label_column);
      const int classes = std::max(train.classes, test.classes);
      train.classes = test.classes = classes;
      if (test.dim() != train.dim()) throw ConfigError("dataset.test_path: feature count differs from dataset.path");
    } else {
      Dataset all = std::move(train);
      std::vector<std::size_t> order(all.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng = make_rng(cfg.seed, {0x7e57});
      std::shuffle(order.begin(), order.end(), rng);
      const auto n_test = static_cast<std::size_t>(std::llround(dc.test_fraction * static_cast<double>(all.size())));
      std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
      std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
      std::sort(test_rows.begin(), test_rows.end());
      std::sort(train_rows.begin(), train_rows.end());
      train = take_rows(all, train_rows);
      test = take_rows(all, test_rows);
    }
  }
  if (train.size() < static_cast<std::size_t>(cfg.clients))
    throw ConfigError("dataset has fewer training rows than clients");
  const Standardizer s = Standardizer::fit(train.features);
  s.apply(train.features);
  if (test.size() > 0) s.apply(test.features);
  return {std::move(train), std::move(test)};
}

Partition build_partition(const RunConfig& cfg, const Dataset& train) {
  const auto k = static_cast<std::size_t>(cfg.clients);
  const std::uint64_t seed = derive_seed(cfg.seed, {0x9a47});
  if (cfg.partition.kind == "dirichlet")
    return partition_dirichlet(train.labels, train.classes, k, cfg.partition.beta, seed);
  return partition_iid(train.size(), k, seed);
}

BlockStack build_global_model(const RunConfig& cfg, std::size_t input_dim, int classes) {
  ModelSpec spec{input_dim, cfg.blocks, static_cast<std::size_t>(classes)};
  Rng rng = make_rng(cfg.seed, {0x30de1});
  return BlockStack::create(spec, rng);
}

TierLayout build_layout(const RunConfig& cfg) {
  if (cfg.cuts.empty()) return TierLayout::uniform(cfg.tiers, cfg.blocks.size());
  return TierLayout(cfg.cuts, cfg.blocks.size());
}

std::vector<ResourceProfile> initial_profiles(const RunConfig& cfg) {
  const auto& pool = cfg.profiles.pool;
  std::vector<ResourceProfile> out;
  Rng rng = make_rng(cfg.seed, {0x9f0});
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int k = 0; k < cfg.clients; ++k) {
    if (cfg.profiles.assignment == "random")
      out.push_back(pool[pick(rng)]);
    else
      out.push_back(pool[static_cast<std::size_t>(k) % pool.size()]);
  }
  return out;
}

namespace {

RunConfig validated(RunConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Experiment::Experiment(RunConfig cfg, RunMode mode)
    : cfg_(validated(std::move(cfg))),
      mode_(mode),
      sim_(initial_profiles(cfg_),
           ChurnPolicy{cfg_.profiles.churn_period, cfg_.profiles.churn_fraction, cfg_.profiles.pool},
           cfg_.scheduler.noise_sigma, derive_seed(cfg_.seed, {0x51a})) {
  if (mode_.kind == RunMode::Kind::Static && (mode_.tier < 1 || mode_.tier > cfg_.tiers))
    throw ConfigError("static tier " + std::to_string(mode_.tier) + " outside 1.." + std::to_string(cfg_.tiers));
  auto [train, test] = build_datasets(cfg_);
  train_ = std::move(train);
  test_ = std::move(test);
  partition_ = build_partition(cfg_, train_);
  TierLayout layout = build_layout(cfg_);
  BlockStack global = build_global_model(cfg_, train_.dim(), train_.classes);
  table_ = profile_tiers(global, layout, cfg_.batch_size, cfg_.cost);
  state_.emplace(GlobalModelState{TieredModel(std::move(global), std::move(layout), derive_seed(cfg_.seed, {0xa0c})), 0});

  for (int k = 0; k < cfg_.clients; ++k) {
    ClientHistory h;
    h.client_id = k;
    h.bandwidth = sim_.profile(k).bandwidth;
    h.batches = batches_per_round(partition_.clients[static_cast<std::size_t>(k)].size(), cfg_.batch_size,
                                  cfg_.local_epochs);
    if (mode_.kind == RunMode::Kind::Dynamic && cfg_.scheduler.cold_start == "probe")
      seed_from_probe(h, 1, sim_.probe_batch_seconds(k, 1, table_), h.bandwidth, h.batches);
    histories_.push_back(std::move(h));
  }
}

std::vector<int> Experiment::participants(int round) const {
  std::vector<int> ids(static_cast<std::size_t>(cfg_.clients));
  std::iota(ids.begin(), ids.end(), 0);
  const auto n = std::max<long long>(1, std::llround(cfg_.participation * cfg_.clients));
  if (static_cast<std::size_t>(n) >= ids.size()) return ids;
  Rng rng = make_rng(cfg_.seed, {0x9a27, static_cast<std::uint64_t>(round)});
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(n));
  std::sort(ids.begin(), ids.end());
  return ids;
}

RoundContext Experiment::context() {
  RoundContext ctx;
  ctx.train = &train_;
  ctx.test = &test_;
  ctx.partition = &partition_;
  ctx.profile = &table_;
  ctx.batch_size = cfg_.batch_size;
  ctx.epochs = cfg_.local_epochs;
  ctx.optim = cfg_.optimizer;
  ctx.privacy = cfg_.privacy;
  ctx.policy = cfg_.aggregation;
  ctx.seed = cfg_.seed;
  ctx.train_model = cfg_.train;
  ctx.jobs = cfg_.jobs;
  return ctx;
}

RoundReport Experiment::step() {
  if (done()) throw StateError("experiment already ran all rounds");
  const std::vector<int> ids = participants(state_->round);
  const RoundContext ctx = context();
  RoundReport report;
  switch (mode_.kind) {
    case RunMode::Kind::FedAvg:
      report = fedavg_baseline_round(*state_, ids, sim_, ctx);
      break;
    case RunMode::Kind::Static: {
      std::map<int, int> assignment;
      for (int id : ids) assignment[id] = mode_.tier;
      report = run_round(*state_, assignment, sim_, ctx);
      break;
    }
    case RunMode::Kind::Dynamic: {
      const Assignment a = schedule(histories_, table_, ids);
      report = run_round(*state_, a.tiers, sim_, ctx);
      report.t_max = a.t_max;
      const SchedulerConfig sc{cfg_.scheduler.ema_alpha};
      for (const auto& c : report.clients) {
        // The server sees when the client's upload finished, and the link speed it ran at.
        const double bw = sim_.profile(c.client_id).bandwidth;
        auto& h = histories_[static_cast<std::size_t>(c.client_id)];
        if (record_observation(h, c.tier, c.compute + c.comm, bw, c.batches, table_, sc))
          report.events.push_back("client " + std::to_string(c.client_id) + ": net compute clamped");
      }
      break;
    }
  }
  reports_.push_back(report);
  return report;
}

void Experiment::run() {
  while (!done()) step();
}

ExperimentSummary Experiment::summary() const {
  ExperimentSummary s;
  s.mode = mode_.str();
  s.rounds_run = rounds_run();
  s.trained = cfg_.train;
  for (const auto& r : reports_) {
    for (const auto& c : r.clients) ++s.tier_occupancy[c.tier];
    if (r.trained && !s.time_to_target && r.test_accuracy >= cfg_.target_accuracy) {
      s.time_to_target = r.cumulative_seconds;
      s.round_to_target = r.round;
    }
  }
  if (!reports_.empty()) {
    const auto& last = reports_.back();
    s.cumulative_seconds = last.cumulative_seconds;
    s.final_train_loss = last.train_loss;
    s.final_train_accuracy = last.train_accuracy;
    s.final_test_accuracy = last.test_accuracy;
  }
  return s;
}

}  // namespace dtfl
