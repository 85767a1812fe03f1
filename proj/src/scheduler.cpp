#include "dtfl/scheduler.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "dtfl/errors.hpp"

namespace dtfl {

double comm_seconds(const TierProfileTable& profile, int tier, std::size_t batches, double bandwidth) {
  if (!(bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  const auto& p = profile.at(tier);
  return (p.transfer_bytes_per_batch * static_cast<double>(batches) + 2.0 * p.client_model_bytes) / bandwidth;
}

bool record_observation(ClientHistory& hist, int tier, double measured_seconds, double bandwidth, std::size_t batches,
                        const TierProfileTable& profile, const SchedulerConfig& config) {
  if (!(config.ema_alpha > 0.0 && config.ema_alpha <= 1.0)) throw InputError("ema_alpha must lie in (0, 1]");
  double net = measured_seconds - comm_seconds(profile, tier, batches, bandwidth);
  const bool clamped = !(net > 0.0);
  if (clamped) net = config.min_net_seconds;

  hist.observations[tier].push_back(net);
  auto it = hist.ema.find(tier);
  if (it == hist.ema.end())
    hist.ema.emplace(tier, net);
  else
    it->second = config.ema_alpha * net + (1.0 - config.ema_alpha) * it->second;
  hist.last_tier = tier;
  hist.bandwidth = bandwidth;
  hist.batches = batches;
  return clamped;
}

double round_time(double compute, double comm, double server) {
  return std::max(compute + comm, server + comm);
}

TimeEstimate estimate_times(const ClientHistory& hist, const TierProfileTable& profile, int candidate) {
  const auto& target = profile.at(candidate);
  const double batches = static_cast<double>(hist.batches);
  TimeEstimate e;
  e.comm = comm_seconds(profile, candidate, hist.batches, hist.bandwidth);
  if (hist.last_tier && hist.ema.contains(*hist.last_tier)) {
    const int anchor = *hist.last_tier;
    e.compute = target.client_seconds_per_batch / profile.at(anchor).client_seconds_per_batch * hist.ema.at(anchor);
  } else {
    e.compute = target.client_seconds_per_batch * batches;
  }
  e.server = target.server_seconds_per_batch * batches;
  e.total = round_time(e.compute, e.comm, e.server);
  return e;
}

Assignment assign_tiers(std::span<const int> client_ids, const std::vector<std::vector<double>>& estimates) {
  if (client_ids.empty()) throw InputError("schedule: no participating clients");
  if (estimates.size() != client_ids.size()) throw DimensionError("schedule: one estimate row per client");

  Assignment a;
  a.t_max = -std::numeric_limits<double>::infinity();
  for (const auto& row : estimates) {
    if (row.empty()) throw DimensionError("schedule: no tiers to choose from");
    a.t_max = std::max(a.t_max, *std::min_element(row.begin(), row.end()));
  }
  for (std::size_t k = 0; k < client_ids.size(); ++k) {
    const auto& row = estimates[k];
    int chosen = 0;
    for (std::size_t m = row.size(); m-- > 0;) {
      if (row[m] <= a.t_max) {
        chosen = static_cast<int>(m) + 1;
        break;
      }
    }
    a.tiers[client_ids[k]] = chosen;  // chosen >= 1: the row minimum is <= t_max
  }
  return a;
}

Assignment schedule(std::span<const ClientHistory> histories, const TierProfileTable& profile,
                    std::span<const int> participants) {
  if (participants.empty()) throw InputError("schedule: no participating clients");
  std::vector<std::vector<double>> estimates;
  for (int id : participants) {
    auto it = std::find_if(histories.begin(), histories.end(), [id](const auto& h) { return h.client_id == id; });
    if (it == histories.end()) throw InputError("schedule: no history for client " + std::to_string(id));
    std::vector<double> row;
    for (int m = 1; m <= profile.tier_count(); ++m) row.push_back(estimate_times(*it, profile, m).total);
    estimates.push_back(std::move(row));
  }
  return assign_tiers(participants, estimates);
}

}  // namespace dtfl

namespace dtfl {

void seed_from_probe(ClientHistory& hist, int tier, double seconds_per_batch, double bandwidth, std::size_t batches) {
  if (!(seconds_per_batch > 0.0)) throw InputError("probe time must be positive");
  if (!(bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  const double t = seconds_per_batch * static_cast<double>(batches);
  hist.ema[tier] = t;
  hist.last_tier = tier;
  hist.bandwidth = bandwidth;
  hist.batches = batches;
}

}  // namespace dtfl
