#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dtfl/tier_profile.hpp"

namespace dtfl {

/// What the server knows about one client's speed.
struct ClientHistory {
  int client_id = 0;
  std::map<int, std::vector<double>> observations;  // tier -> net client compute seconds
  std::map<int, double> ema;                        // tier -> smoothed compute seconds
  std::optional<int> last_tier;                     // most recently observed tier
  double bandwidth = 0.0;                           // bytes / second, last measured
  std::size_t batches = 0;                          // batches per round
};

struct SchedulerConfig {
  double ema_alpha = 0.5;
  double min_net_seconds = 1e-6;
};

/// Communication seconds for one round at `tier`: per-batch transfer for every
/// batch plus the client model going down and back up once.
double comm_seconds(const TierProfileTable& profile, int tier, std::size_t batches, double bandwidth);

/// Adds the net compute time (measured minus communication) for `tier` and
/// refreshes that tier's EMA. A non-positive net time is clamped to
/// config.min_net_seconds. Returns true when clamping happened.
bool record_observation(ClientHistory& hist, int tier, double measured_seconds, double bandwidth, std::size_t batches,
                        const TierProfileTable& profile, const SchedulerConfig& config = {});

struct TimeEstimate {
  double compute = 0.0;
  double comm = 0.0;
  double server = 0.0;
  double total = 0.0;  // max(compute + comm, server + comm)
};

/// Round time of one client, max(T^c + T^com, T^s + T^com).
double round_time(double compute, double comm, double server);

/// Estimated times if the client ran `candidate`. Compute time is the EMA at
/// the anchor tier (the most recently observed one) scaled by the ratio of
/// reference client times. Without any history the reference time itself is
/// used (cpu factor 1). Throws InputError when bandwidth <= 0.
TimeEstimate estimate_times(const ClientHistory& hist, const TierProfileTable& profile, int candidate);

struct Assignment {
  std::map<int, int> tiers;  // client id -> tier
  double t_max = 0.0;
};

/// Min-max tier assignment over a client x tier matrix of estimated round
/// times (tiers are column index + 1): T_max is the largest per-client
/// minimum, and each client gets the largest tier whose estimate is <= T_max.
Assignment assign_tiers(std::span<const int> client_ids, const std::vector<std::vector<double>>& estimates);

/// Estimates every tier for every participant and runs assign_tiers.
Assignment schedule(std::span<const ClientHistory> histories, const TierProfileTable& profile,
                    std::span<const int> participants);

}  // namespace dtfl

namespace dtfl {

/// Cold start from a client-side probe: the client trained one standard batch
/// at `tier` in `seconds_per_batch`; the EMA for that tier starts at the
/// extrapolated per-round time.
void seed_from_probe(ClientHistory& hist, int tier, double seconds_per_batch, double bandwidth, std::size_t batches);

}  // namespace dtfl
