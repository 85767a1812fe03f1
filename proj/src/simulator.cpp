#include "dtfl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtfl/errors.hpp"
#include "dtfl/scheduler.hpp"

namespace dtfl {

void ResourceProfile::validate() const {
  if (!(cpu_factor > 0.0) || !(bandwidth > 0.0)) throw InputError("resource profile needs cpu_factor > 0 and bandwidth > 0");
}

std::vector<ResourceProfile> default_profile_pool() {
  return {{4.0, mbps_to_bytes(100)},
          {2.0, mbps_to_bytes(30)},
          {1.0, mbps_to_bytes(30)},
          {0.2, mbps_to_bytes(30)},
          {0.1, mbps_to_bytes(10)}};
}

void ChurnPolicy::validate() const {
  if (period < 1) throw InputError("churn period must be >= 1");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InputError("churn fraction must lie in [0, 1]");
  if (fraction > 0.0 && pool.empty()) throw InputError("churn needs a non-empty profile pool");
  for (const auto& p : pool) p.validate();
}

double simulate_client_compute(const TierProfileTable& profile, int tier, std::size_t batches, double cpu_factor,
                               double sigma, Rng& noise) {
  if (!(cpu_factor > 0.0)) throw InputError("cpu_factor must be positive");
  const double base = profile.at(tier).client_seconds_per_batch * static_cast<double>(batches) / cpu_factor;
  if (sigma <= 0.0) return base;
  std::normal_distribution<double> normal(0.0, sigma);
  return base * std::exp(normal(noise));
}

double simulate_comm(double transfer_bytes_per_batch, std::size_t batches, double model_bytes, double bandwidth) {
  if (!(bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  return (transfer_bytes_per_batch * static_cast<double>(batches) + 2.0 * model_bytes) / bandwidth;
}

Simulator::Simulator(std::vector<ResourceProfile> profiles, ChurnPolicy churn, double noise_sigma, std::uint64_t seed)
    : profiles_(std::move(profiles)), churn_(std::move(churn)), sigma_(noise_sigma),
      noise_(make_rng(seed, {0x5e1})), churn_rng_(make_rng(seed, {0xc4a})), probe_rng_(make_rng(seed, {0x9b0})) {
  if (profiles_.empty()) throw InputError("simulator needs at least one client");
  for (const auto& p : profiles_) p.validate();
  churn_.validate();
  if (sigma_ < 0.0) throw InputError("noise sigma must be non-negative");
}

void Simulator::apply_churn() {
  if (churn_.fraction <= 0.0) return;
  const auto count = static_cast<std::size_t>(std::llround(churn_.fraction * static_cast<double>(profiles_.size())));
  std::vector<std::size_t> ids(profiles_.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::shuffle(ids.begin(), ids.end(), churn_rng_);
  std::uniform_int_distribution<std::size_t> pick(0, churn_.pool.size() - 1);
  for (std::size_t i = 0; i < count; ++i) profiles_[ids[i]] = churn_.pool[pick(churn_rng_)];
}

RoundReport Simulator::finish(RoundReport report) {
  for (const auto& c : report.clients) report.makespan = std::max(report.makespan, c.total);
  cumulative_ += report.makespan;
  report.cumulative_seconds = cumulative_;
  ++round_;
  return report;
}

RoundReport Simulator::advance_round(const std::map<int, int>& assignment, const std::map<int, std::size_t>& batches,
                                     const TierProfileTable& table) {
  if (round_ > 0 && round_ % churn_.period == 0) apply_churn();
  RoundReport report;
  report.round = round_;
  for (const auto& [id, tier] : assignment) {
    const auto& res = profile(id);
    const std::size_t n = batches.at(id);
    const auto& tp = table.at(tier);
    ClientTiming t;
    t.client_id = id;
    t.tier = tier;
    t.batches = n;
    t.compute = simulate_client_compute(table, tier, n, res.cpu_factor, sigma_, noise_);
    t.comm = simulate_comm(tp.transfer_bytes_per_batch, n, tp.client_model_bytes, res.bandwidth);
    t.server = tp.server_seconds_per_batch * static_cast<double>(n);
    t.total = round_time(t.compute, t.comm, t.server);
    report.clients.push_back(t);
  }
  return finish(std::move(report));
}

RoundReport Simulator::advance_fedavg_round(const std::map<int, std::size_t>& batches, const TierProfileTable& table) {
  if (round_ > 0 && round_ % churn_.period == 0) apply_churn();
  RoundReport report;
  report.round = round_;
  for (const auto& [id, n] : batches) {
    const auto& res = profile(id);
    ClientTiming t;
    t.client_id = id;
    t.batches = n;
    double compute = table.full_seconds_per_batch * static_cast<double>(n) / res.cpu_factor;
    if (sigma_ > 0.0) compute *= std::exp(std::normal_distribution<double>(0.0, sigma_)(noise_));
    t.compute = compute;
    t.comm = simulate_comm(0.0, n, table.full_model_bytes, res.bandwidth);
    t.total = round_time(t.compute, t.comm, t.server);
    report.clients.push_back(t);
  }
  return finish(std::move(report));
}

double Simulator::probe_batch_seconds(int client, int tier, const TierProfileTable& table) {
  return simulate_client_compute(table, tier, 1, profile(client).cpu_factor, sigma_, probe_rng_);
}

}  // namespace dtfl
