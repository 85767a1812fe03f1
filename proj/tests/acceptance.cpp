// Acceptance gate: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>

#include "dtfl/engine.hpp"
#include "dtfl/layers.hpp"
#include "dtfl/privacy.hpp"
#include "dtfl/protocol.hpp"
#include "dtfl/scheduler.hpp"
#include "dtfl/simulator.hpp"
#include "dtfl/split_model.hpp"
#include "support.hpp"

#ifndef DTFL_BINARY
#define DTFL_BINARY "dtfl"
#endif

using namespace dtfl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& run) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("criterion %d [%s]: %s (%s; %.2fs of %.0fs)\n", id, name, pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
              limit_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 7 hidden blocks and a classifier; the calibrated shape used for timing runs.
ModelSpec eight_block_spec(std::size_t input_dim = 32) {
  return {input_dim, {{384}, {32}, {192}, {192}, {128}, {128}, {64}}, 10};
}

void randomize_biases(BlockStack& g, Rng& rng) {
  for (auto& b : g.blocks())
    for (auto& l : b.layers) l.bias = testing::random_vector(l.out_dim(), rng, 0.5);
  g.classifier().bias = testing::random_vector(g.classes(), rng, 0.5);
}

Outcome split_equivalence() {
  Rng rng(101);
  TieredModel tm(BlockStack::create(eight_block_spec(), rng), TierLayout::uniform(7, 7), 7);
  const Tensor x = testing::random_matrix(100, 32, rng);
  const Tensor direct = tm.global().forward(x);
  double worst = 0.0;
  for (int m = 1; m <= 7; ++m) {
    const TierSplit s = tm.split(m);
    worst = std::max(worst, max_abs_diff(forward_server(s, forward_client(s, x)), direct));
  }
  return {worst < 1e-10, fmt("max |server(client(x)) - global(x)| = %.3g over 7 tiers", worst)};
}

Outcome gradient_checks() {
  using testing::numeric_grad;
  using testing::rel_err;
  Rng rng(102);
  double dense = 0.0, aux = 0.0, client = 0.0, server = 0.0, dc = 0.0;
  const int instances = 20;
  for (int i = 0; i < instances; ++i) {
    // Dense layers, both activations.
    for (Activation act : {Activation::ReLU, Activation::Identity}) {
      DenseLayer l{testing::random_matrix(4, 5, rng), testing::random_vector(4, rng), act};
      Tensor x = testing::random_matrix(6, 5, rng);
      const Tensor probe = testing::random_matrix(6, 4, rng);
      auto f = [&] { return testing::dot(dense_forward(l, x), probe); };
      DenseCache c;
      dense_forward(l, x, &c);
      const DenseGrads g = dense_backward(l, c, probe);
      dense = std::max({dense, rel_err(g.input, numeric_grad(f, x)), rel_err(g.weights, numeric_grad(f, l.weights)),
                        rel_err(g.bias, numeric_grad(f, l.bias))});
    }
    // Split paths on a narrow 8-block model.
    BlockStack g = BlockStack::create({6, {{10}, {9}, {8}, {8}, {7}, {7}, {6}}, 3}, rng);
    randomize_biases(g, rng);
    TieredModel tm(g, TierLayout::uniform(7, 7), static_cast<std::uint64_t>(i));
    TierSplit s = tm.split(1 + i % 7);
    const Tensor x = testing::random_matrix(5, 6, rng);
    const std::vector<int> y{0, 1, 2, 1, 0};
    auto aux_loss = [&] { return softmax_xent(forward_aux(s, forward_client(s, x)), y).loss; };
    ClientCache cc;
    const Tensor z = forward_client(s, x, &cc);
    DenseCache ac;
    const LossAndGrad lg = softmax_xent(forward_aux(s, z, &ac), y);
    const DenseGrads ag = dense_backward(s.aux_head, ac, lg.grad);
    aux = std::max({aux, rel_err(ag.weights, numeric_grad(aux_loss, s.aux_head.weights)),
                    rel_err(ag.bias, numeric_grad(aux_loss, s.aux_head.bias))});
    const std::vector<Tensor> cg = backward_client(s, cc, ag.input);
    const auto cp = s.client_parameters();
    for (std::size_t k = 0; k < cp.size(); ++k) client = std::max(client, rel_err(cg[k], numeric_grad(aux_loss, *cp[k])));

    Tensor zs = z;
    auto server_loss = [&] { return softmax_xent(forward_server(s, zs), y).loss; };
    ServerCache sc;
    const LossAndGrad sl = softmax_xent(forward_server(s, zs, &sc), y);
    Tensor gz;
    const std::vector<Tensor> sg = backward_server(s, sc, sl.grad, &gz);
    const auto sp = s.server_parameters();
    for (std::size_t k = 0; k < sp.size(); ++k) server = std::max(server, rel_err(sg[k], numeric_grad(server_loss, *sp[k])));
    server = std::max(server, rel_err(gz, numeric_grad(server_loss, zs)));

    // Distance correlation.
    const Tensor dx = testing::random_matrix(8, 3, rng);
    Tensor dz = testing::random_matrix(8, 4, rng);
    for (std::size_t r = 0; r < 8; ++r) dz(r, 0) += dx(r, 0);
    dc = std::max(dc, rel_err(dcor_backward(dx, dz), numeric_grad([&] { return dcor(dx, dz); }, dz)));
  }
  const double worst = std::max({dense, aux, client, server, dc});
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d instances; max rel err dense %.2g, aux %.2g, client %.2g, server %.2g, dcor %.2g",
                instances, dense, aux, client, server, dc);
  return {worst < 1e-4, buf};
}

double brute_force(const std::vector<std::vector<double>>& est) {
  const std::size_t k = est.size(), m = est.front().size();
  std::vector<std::size_t> pick(k, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, est[i][pick[i]]);
    best = std::min(best, worst);
    std::size_t i = 0;
    while (i < k && ++pick[i] == m) pick[i++] = 0;
    if (i == k) return best;
  }
}

Outcome scheduler_oracle() {
  Rng rng(103);
  std::uniform_int_distribution<int> nk(1, 6), nm(1, 4);
  std::uniform_real_distribution<double> t(0.1, 10.0);
  int mismatched = 0, infeasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = static_cast<std::size_t>(nk(rng));
    const auto m = static_cast<std::size_t>(nm(rng));
    std::vector<int> ids(k);
    for (std::size_t i = 0; i < k; ++i) ids[i] = static_cast<int>(i);
    std::vector<std::vector<double>> est(k, std::vector<double>(m));
    for (auto& row : est)
      for (double& v : row) v = t(rng);
    const Assignment a = assign_tiers(ids, est);
    double makespan = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double v = est[i][static_cast<std::size_t>(a.tiers.at(static_cast<int>(i)) - 1)];
      if (!(v <= a.t_max)) ++infeasible;
      makespan = std::max(makespan, v);
    }
    if (makespan != brute_force(est)) ++mismatched;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "1000 instances; %d makespan mismatches, %d tiers above T_max", mismatched, infeasible);
  return {mismatched == 0 && infeasible == 0, buf};
}

RunConfig timing_config() {
  RunConfig c;
  c.seed = 2024;
  const ModelSpec spec = eight_block_spec();
  c.blocks = spec.blocks;
  c.tiers = 7;
  c.clients = 10;
  c.rounds = 100;
  c.dataset.classes = 10;
  c.dataset.dim = 32;
  c.dataset.samples = 5000;  // 500 per client: 5 batches of 100
  c.dataset.test_samples = 0;
  c.cost = {1e9, 3e9, 4.0, 8.0};
  c.profiles.churn_period = 20;
  c.profiles.churn_fraction = 0.3;
  c.scheduler.noise_sigma = 0.0;
  c.train = false;
  return c;
}

Outcome dynamic_vs_static() {
  const RunConfig c = timing_config();
  auto total = [&](RunMode mode) {
    Experiment e(c, mode);
    e.run();
    return e.summary().cumulative_seconds;
  };
  const double dynamic = total(RunMode{});
  const double fedavg = total({RunMode::Kind::FedAvg, 0});
  std::vector<double> statics;
  for (int m = 1; m <= c.tiers; ++m) statics.push_back(total({RunMode::Kind::Static, m}));
  const auto best = std::min_element(statics.begin(), statics.end());
  const int best_tier = static_cast<int>(best - statics.begin()) + 1;
  std::ostringstream d;
  d << "dynamic " << dynamic << "s, best static tier " << best_tier << " " << *best << "s, fedavg " << fedavg
    << "s; static:";
  for (double s : statics) d << ' ' << s;
  const bool pass = dynamic <= *best && dynamic <= fedavg && best_tier != 1 && best_tier != c.tiers;
  return {pass, d.str()};
}

Outcome ratio_invariance() {
  Rng rng(105);
  const BlockStack g = BlockStack::create(eight_block_spec(), rng);
  const TierProfileTable table = profile_tiers(g, TierLayout::uniform(7, 7), 100, {1e9, 3e9, 4.0, 8.0});
  const double cpus[] = {0.2, 1.0, 4.0};

  // Noiseless: exact agreement.
  double exact = 0.0;
  std::vector<double> reference;
  for (double cpu : cpus) {
    Rng noise(1);
    const double t1 = simulate_client_compute(table, 1, 5, cpu, 0.0, noise);
    for (int m = 1; m <= 7; ++m) {
      const double r = simulate_client_compute(table, m, 5, cpu, 0.0, noise) / t1;
      if (reference.size() < 7)
        reference.push_back(r);
      else
        exact = std::max(exact, std::abs(r - reference[static_cast<std::size_t>(m - 1)]));
    }
  }

  // Noisy: per tier, the mean normalized time of every cpu lies within three
  // (per-measurement) relative standard deviations of the others.
  const int samples = 400;
  double worst_z = 0.0;
  for (int m = 2; m <= 7; ++m) {
    std::vector<double> means, sds;
    for (double cpu : cpus) {
      Rng noise = make_rng(5, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(cpu * 10)});
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < samples; ++i) {
        const double r = simulate_client_compute(table, m, 5, cpu, 0.05, noise) /
                         simulate_client_compute(table, 1, 5, cpu, 0.05, noise);
        sum += r;
        sq += r * r;
      }
      const double mean = sum / samples;
      means.push_back(mean);
      sds.push_back(std::sqrt(std::max(0.0, sq / samples - mean * mean)));
    }
    for (std::size_t a = 0; a < means.size(); ++a)
      for (std::size_t b = a + 1; b < means.size(); ++b)
        worst_z = std::max(worst_z, std::abs(means[a] - means[b]) / std::max(sds[a], sds[b]));
  }
  return {exact <= 1e-12 && worst_z <= 3.0,
          fmt("noiseless max diff %.3g; noisy max |mean diff| = %.3g sd (400 samples per tier and cpu)", exact, worst_z)};
}

RunConfig convergence_config() {
  RunConfig c;
  c.seed = 7;
  c.clients = 10;
  c.tiers = 4;
  c.blocks = {{64}, {48}, {32}, {16}};
  c.dataset.classes = 3;
  c.dataset.dim = 20;
  c.dataset.samples = 6000;
  c.dataset.test_samples = 1200;
  c.optimizer = {OptimKind::Adam, 0.001};
  c.batch_size = 100;
  c.local_epochs = 1;
  return c;
}

// First round (1-based count) at which train accuracy reaches `target`, or -1.
int rounds_to_train_accuracy(RunConfig c, double target, int max_rounds, double* best) {
  c.rounds = max_rounds;
  Experiment e(c, RunMode{});
  *best = 0.0;
  while (!e.done()) {
    const RoundReport r = e.step();
    *best = std::max(*best, r.train_accuracy);
    if (r.train_accuracy >= target) return r.round + 1;
  }
  return -1;
}

Outcome convergence() {
  double best_iid = 0.0, best_dir = 0.0;
  const int iid = rounds_to_train_accuracy(convergence_config(), 0.95, 50, &best_iid);
  RunConfig dir = convergence_config();
  dir.partition = {"dirichlet", 0.5};
  const int dirichlet = rounds_to_train_accuracy(dir, 0.85, 100, &best_dir);
  std::ostringstream d;
  d << "IID reached 95% train acc at round " << iid << " (best " << best_iid << "); Dirichlet 0.5 reached 85% at round "
    << dirichlet << " (best " << best_dir << ")";
  return {iid > 0 && dirichlet > 0, d.str()};
}

double final_test_accuracy(RunConfig c) {
  c.rounds = 50;
  Experiment e(c, RunMode{});
  e.run();
  return e.summary().final_test_accuracy;
}

Outcome privacy_tradeoff() {
  double acc[3];
  const double alphas[] = {0.0, 0.25, 0.75};
  for (int i = 0; i < 3; ++i) {
    RunConfig c = convergence_config();
    c.privacy.alpha = alphas[i];
    acc[i] = final_test_accuracy(c);
  }
  RunConfig shuffled = convergence_config();
  shuffled.privacy.patch_shuffle = true;
  shuffled.privacy.patch_size = 4;
  const double acc_shuffle = final_test_accuracy(shuffled);
  const bool monotone = acc[0] >= acc[1] && acc[1] >= acc[2];
  const bool close = acc[0] - acc[1] <= 0.03;
  const bool shuffle_ok = std::abs(acc_shuffle - acc[0]) <= 0.03;
  char buf[256];
  std::snprintf(buf, sizeof buf, "test acc alpha 0 / 0.25 / 0.75 = %.4f / %.4f / %.4f; patch shuffle %.4f", acc[0], acc[1],
                acc[2], acc_shuffle);
  return {monotone && close && shuffle_ok, buf};
}

Outcome aggregation_algebra() {
  Rng rng(108);
  const BlockStack m = BlockStack::create({5, {{7}, {6}}, 3}, rng);
  const std::vector<BlockStack> same(5, m);
  const std::vector<double> counts{1, 2, 3, 4, 5};
  bool identity = true;
  for (auto policy : {AggregationPolicy::Uniform, AggregationPolicy::DataWeighted}) {
    const BlockStack a = aggregate(same, counts, policy);
    const auto pa = a.parameters();
    const auto pm = m.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) identity = identity && *pa[i] == *pm[i];
  }

  DenseLayer zero{Tensor::from_rows({{0}}), Tensor({1}, std::vector<double>{0.0}), Activation::Identity};
  DenseLayer four = zero;
  four.weights[0] = 4.0;
  const std::vector<double> n13{1, 3};
  const double weighted = aggregate(std::vector<DenseLayer>{zero, four}, n13, AggregationPolicy::DataWeighted).weights[0];

  std::vector<BlockStack> models;
  for (int k = 0; k < 4; ++k) models.push_back(BlockStack::create({5, {{7}, {6}}, 3}, rng));
  const std::vector<double> n{3, 1, 4, 2};
  double shift_err = 0.0;
  for (auto policy : {AggregationPolicy::Uniform, AggregationPolicy::DataWeighted}) {
    const BlockStack base = aggregate(models, n, policy);
    std::vector<BlockStack> moved = models;
    for (auto& mdl : moved)
      for (Tensor* t : mdl.parameters())
        for (double& v : t->data()) v += 1.25;
    const BlockStack shifted = aggregate(moved, n, policy);
    const auto pb = base.parameters();
    const auto ps = shifted.parameters();
    for (std::size_t i = 0; i < pb.size(); ++i)
      for (std::size_t e = 0; e < pb[i]->size(); ++e) shift_err = std::max(shift_err, std::abs((*ps[i])[e] - 1.25 - (*pb[i])[e]));
  }
  return {identity && weighted == 3.0 && shift_err < 1e-12,
          fmt("identity %.0f, data-weighted (1,3) on (0,4) = %.17g, shift error %.3g", identity ? 1.0 : 0.0, weighted,
              shift_err)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "dtfl_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"seed": 11, "rounds": 10, "clients": 10, "participation": 0.7,
               "profiles": {"churn": {"period": 3, "fraction": 0.3}},
               "scheduler": {"noise_sigma": 0.05},
               "privacy": {"alpha": 0.25, "patch_shuffle": true, "patch_size": 4}})";
  }
  auto run = [&](const std::string& out, int jobs) {
    const std::string cmd = std::string("\"") + DTFL_BINARY + "\" run --config \"" + (dir / "config.json").string() +
                            "\" --out \"" + (dir / out).string() + "\" --jobs " + std::to_string(jobs) + " > /dev/null";
    return std::system(cmd.c_str());
  };
  if (run("a", 1) != 0 || run("b", 1) != 0 || run("c", 4) != 0) return {false, "dtfl run failed"};
  int differing = 0;
  for (const char* f : {"rounds.csv", "assignments.jsonl", "summary.json"}) {
    const std::string a = slurp(dir / "a" / f);
    if (a.empty() || a != slurp(dir / "b" / f) || a != slurp(dir / "c" / f)) ++differing;
  }
  return {differing == 0, std::to_string(differing) + " of 3 output files differ across two serial runs and a --jobs 4 run"};
}

}  // namespace

int main() {
  report(1, "split equivalence", 1, split_equivalence);
  report(2, "gradient checks", 30, gradient_checks);
  report(3, "scheduler vs brute force", 5, scheduler_oracle);
  report(4, "dynamic vs static and fedavg", 120, dynamic_vs_static);
  report(5, "tier ratio invariance", 10, ratio_invariance);
  report(6, "convergence", 180, convergence);
  report(7, "privacy trade-off", 300, privacy_tradeoff);
  report(8, "aggregation algebra", 1, aggregation_algebra);
  report(9, "determinism", 60, determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
