#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtfl/errors.hpp"
#include "dtfl/scheduler.hpp"
#include "dtfl/tier_profile.hpp"
#include "support.hpp"

using namespace dtfl;

namespace {

// Normalized client/server times per tier as reported for ResNet-56.
constexpr double kClientRatio[] = {1.00, 1.63, 2.16, 2.68, 3.30, 3.81};
constexpr double kServerRatio[] = {1.00, 0.82, 0.65, 0.51, 0.33, 0.20};

TierProfileTable ratio_table(double transfer = 1e6, double model = 1e5) {
  TierProfileTable t;
  t.batch_size = 100;
  for (int m = 1; m <= 6; ++m)
    t.tiers.push_back({m, transfer * m, model * m, 0.1 * kClientRatio[m - 1], 0.05 * kServerRatio[m - 1]});
  t.full_model_bytes = 1e6;
  t.full_seconds_per_batch = 0.5;
  return t;
}

TierProfileTable one_tier(double transfer, double model) {
  TierProfileTable t;
  t.batch_size = 100;
  t.tiers.push_back({1, transfer, model, 1.0, 1.0});
  return t;
}

// Makespan of the best assignment, by enumerating every combination.
double brute_force_makespan(const std::vector<std::vector<double>>& est) {
  const std::size_t k = est.size();
  const std::size_t m = est.front().size();
  std::vector<std::size_t> pick(k, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, est[i][pick[i]]);
    best = std::min(best, worst);
    std::size_t i = 0;
    while (i < k && ++pick[i] == m) pick[i++] = 0;
    if (i == k) break;
  }
  return best;
}

BlockStack seven_tier_model() {
  Rng rng(3);
  return BlockStack::create({32, {{384}, {32}, {192}, {192}, {128}, {128}, {64}}, 10}, rng);
}

}  // namespace

TEST_CASE("communication estimate") {
  // 10 MB per batch, 5 batches, 10 MB/s.
  CHECK(comm_seconds(one_tier(10e6, 0.0), 1, 5, 10e6) == 5.0);
  // The client model moves down and back up once per round.
  CHECK(comm_seconds(one_tier(10e6, 5e6), 1, 5, 10e6) == 6.0);
  CHECK_THROWS_AS(comm_seconds(one_tier(1.0, 0.0), 1, 1, 0.0), InputError);
}

TEST_CASE("record_observation") {
  // 6 s measured, 2 s of it transfer.
  const TierProfileTable t = one_tier(2e6, 0.0);
  ClientHistory h;
  CHECK_FALSE(record_observation(h, 1, 6.0, 1e6, 1, t));
  CHECK(h.observations[1] == std::vector<double>{4.0});
  CHECK(h.ema[1] == 4.0);
  CHECK(h.last_tier == 1);

  ClientHistory seq;
  const TierProfileTable free = one_tier(0.0, 0.0);
  record_observation(seq, 1, 4.0, 1.0, 1, free);
  record_observation(seq, 1, 6.0, 1.0, 1, free);
  CHECK(seq.ema[1] == 5.0);

  Rng rng(4);
  std::uniform_real_distribution<double> u(0.5, 9.0);
  for (double alpha : {0.2, 0.5, 0.9}) {
    ClientHistory r;
    double ema = 0.0;
    for (int i = 0; i < 30; ++i) {
      const double v = u(rng);
      record_observation(r, 1, v, 1.0, 1, free, {alpha});
      ema = i == 0 ? v : alpha * v + (1 - alpha) * ema;
      CHECK(r.ema[1] == doctest::Approx(ema).epsilon(1e-14));
    }
  }

  ClientHistory c;
  CHECK(record_observation(c, 1, 1.0, 1e6, 1, t));  // transfer alone takes 2 s
  CHECK(c.ema[1] == SchedulerConfig{}.min_net_seconds);
}

TEST_CASE("cross-tier estimate uses the profile ratio") {
  const TierProfileTable t = ratio_table();
  ClientHistory h;
  h.ema[1] = 2.0;
  h.last_tier = 1;
  h.bandwidth = 1e6;
  h.batches = 4;
  CHECK(estimate_times(h, t, 6).compute == doctest::Approx(7.62).epsilon(1e-12));
  CHECK(estimate_times(h, t, 1).compute == 2.0);

  // Anchor on the most recently observed tier.
  h.ema[3] = 10.0;
  h.last_tier = 3;
  CHECK(estimate_times(h, t, 6).compute == doctest::Approx(10.0 * 3.81 / 2.16).epsilon(1e-12));

  ClientHistory cold;
  cold.bandwidth = 1e6;
  cold.batches = 4;
  CHECK(estimate_times(cold, t, 2).compute == doctest::Approx(4 * 0.1 * 1.63).epsilon(1e-14));
}

TEST_CASE("round time") {
  CHECK(round_time(3.0, 2.0, 4.0) == 6.0);
  CHECK(round_time(5.0, 1.0, 4.0) == 6.0);
  const TierProfileTable t = ratio_table();
  ClientHistory h{0, {}, {{2, 1.7}}, 2, 3e6, 7};
  for (int m = 1; m <= 6; ++m) {
    const TimeEstimate e = estimate_times(h, t, m);
    CHECK(e.total == std::max(e.compute + e.comm, e.server + e.comm));
  }
}

TEST_CASE("assign_tiers small cases") {
  const std::vector<int> ids{0, 1};
  const std::vector<std::vector<double>> est{{5, 8}, {4, 6}};
  const Assignment a = assign_tiers(ids, est);
  CHECK(a.t_max == 5.0);
  CHECK(a.tiers.at(0) == 1);
  CHECK(a.tiers.at(1) == 1);
  CHECK(brute_force_makespan(est) == 5.0);

  const std::vector<int> one{7};
  const Assignment single = assign_tiers(one, {{4, 3, 3, 5}});
  CHECK(single.t_max == 3.0);
  CHECK(single.tiers.at(7) == 3);

  const Assignment flat = assign_tiers(ids, {{2, 2, 2}, {2, 2, 2}});
  CHECK(flat.tiers.at(0) == 3);
  CHECK(flat.tiers.at(1) == 3);

  CHECK_THROWS_AS(assign_tiers(std::vector<int>{}, {}), InputError);
  CHECK_THROWS_AS(assign_tiers(ids, {{1.0}}), DimensionError);
}

TEST_CASE("assign_tiers matches the brute-force optimum") {
  Rng rng(5);
  std::uniform_int_distribution<int> nk(1, 6), nm(1, 4);
  std::uniform_real_distribution<double> t(0.1, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = nk(rng), m = nm(rng);
    std::vector<int> ids(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) ids[static_cast<std::size_t>(i)] = 10 + i;
    std::vector<std::vector<double>> est(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(m)));
    for (auto& row : est)
      for (double& v : row) v = t(rng);
    const Assignment a = assign_tiers(ids, est);
    double makespan = 0.0;
    for (int i = 0; i < k; ++i) {
      const double v = est[static_cast<std::size_t>(i)][static_cast<std::size_t>(a.tiers.at(10 + i) - 1)];
      CHECK(v <= a.t_max);
      makespan = std::max(makespan, v);
    }
    CHECK(makespan == brute_force_makespan(est));
    CHECK(a.t_max == makespan);
  }
}

TEST_CASE("schedule is pure and responds monotonically to bandwidth") {
  const TierProfileTable t = ratio_table();
  Rng rng(6);
  std::uniform_real_distribution<double> u(0.5, 5.0);
  std::uniform_real_distribution<double> bw(1e6, 5e7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ClientHistory> hs;
    for (int k = 0; k < 5; ++k) {
      ClientHistory h;
      h.client_id = k;
      h.bandwidth = bw(rng);
      h.batches = 5;
      const int tier = 1 + k % 6;
      h.ema[tier] = u(rng);
      h.last_tier = tier;
      hs.push_back(h);
    }
    const std::vector<int> ids{0, 1, 2, 3, 4};
    const Assignment a = schedule(hs, t, ids);
    const Assignment b = schedule(hs, t, ids);
    CHECK(a.tiers == b.tiers);
    CHECK(a.t_max == b.t_max);
    hs[static_cast<std::size_t>(trial % 5)].bandwidth *= 1.5;
    CHECK(schedule(hs, t, ids).t_max <= a.t_max);
  }
  std::vector<ClientHistory> none;
  const std::vector<int> ids{0};
  CHECK_THROWS_AS(schedule(none, t, ids), InputError);
}

TEST_CASE("probe cold start") {
  const TierProfileTable t = ratio_table();
  ClientHistory h;
  seed_from_probe(h, 1, 0.25, 2e6, 8);
  CHECK(h.ema.at(1) == 2.0);
  CHECK(h.last_tier == 1);
  CHECK(estimate_times(h, t, 6).compute == doctest::Approx(7.62).epsilon(1e-12));
  CHECK_THROWS_AS(seed_from_probe(h, 1, 0.0, 2e6, 8), InputError);
}

TEST_CASE("profile_tiers follows the closed-form cost") {
  const BlockStack g = seven_tier_model();
  const TierLayout layout = TierLayout::uniform(7, 7);
  const CostModel cost{1e9, 3e9, 4.0, 8.0};
  const TierProfileTable t = profile_tiers(g, layout, 100, cost);
  REQUIRE(t.tier_count() == 7);

  const std::size_t widths[] = {32, 384, 32, 192, 192, 128, 128, 64};
  auto layer = [](std::size_t a, std::size_t b) { return 6.0 * 100 * static_cast<double>(a * b); };
  for (int m = 1; m <= 7; ++m) {
    double client = layer(widths[m], 10);
    double client_params = static_cast<double>(widths[m] * 10 + 10);
    double server = layer(64, 10);
    for (int b = 0; b < 7; ++b) {
      if (b < m) {
        client += layer(widths[b], widths[b + 1]);
        client_params += static_cast<double>(widths[b] * widths[b + 1] + widths[b + 1]);
      } else {
        server += layer(widths[b], widths[b + 1]);
      }
    }
    const TierProfile& p = t.at(m);
    CHECK(p.client_seconds_per_batch == doctest::Approx(client / 1e9).epsilon(1e-14));
    CHECK(p.server_seconds_per_batch == doctest::Approx(server / 3e9).epsilon(1e-14));
    CHECK(p.client_model_bytes == client_params * 4.0);
    CHECK(p.transfer_bytes_per_batch == 100.0 * static_cast<double>(widths[m]) * 4.0 + 100.0 * 8.0);
    if (m > 1) {
      CHECK(p.client_seconds_per_batch > t.at(m - 1).client_seconds_per_batch);
      CHECK(p.server_seconds_per_batch < t.at(m - 1).server_seconds_per_batch);
    }
  }
  CHECK(t.full_model_bytes == static_cast<double>(g.parameter_count()) * 4.0);

  // Client-side ratios grow and server-side ratios shrink, as in the measured ResNet table.
  const TierProfileTable single = profile_tiers(g, TierLayout::uniform(1, 7), 100, cost);
  CHECK(single.tier_count() == 1);
  CHECK_THROWS_AS(t.at(8), InputError);
}

TEST_CASE("profile table validation") {
  TierProfileTable t = ratio_table();
  t.validate();
  std::swap(t.tiers[1].client_seconds_per_batch, t.tiers[2].client_seconds_per_batch);
  CHECK_THROWS_AS(t.validate(), InputError);
}
