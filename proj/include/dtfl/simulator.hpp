#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dtfl/rng.hpp"
#include "dtfl/tier_profile.hpp"

namespace dtfl {

/// Megabits per second to bytes per second (1 Mbps = 125,000 B/s).
constexpr double mbps_to_bytes(double mbps) { return mbps * 125'000.0; }

struct ResourceProfile {
  double cpu_factor = 1.0;  // relative to the reference client
  double bandwidth = 0.0;   // bytes / second

  void validate() const;
  friend bool operator==(const ResourceProfile&, const ResourceProfile&) = default;
};

/// The five profiles (4 CPU/100 Mbps, 2/30, 1/30, 0.2/30, 0.1/10).
std::vector<ResourceProfile> default_profile_pool();

struct ChurnPolicy {
  int period = 1;         // rounds between reshuffles
  double fraction = 0.0;  // share of clients re-profiled each time
  std::vector<ResourceProfile> pool;

  void validate() const;
};

/// Per-client timing of one round.
struct ClientTiming {
  int client_id = 0;
  int tier = 0;  // 0 for the FedAvg baseline
  std::size_t batches = 0;
  double compute = 0.0;
  double comm = 0.0;
  double server = 0.0;
  double total = 0.0;
};

struct RoundReport {
  int round = 0;
  std::vector<ClientTiming> clients;  // sorted by client id
  double makespan = 0.0;
  double cumulative_seconds = 0.0;
  double t_max = 0.0;  // scheduler bound (dynamic mode only)
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool trained = false;  // metrics are meaningful
  std::vector<std::string> events;  // warnings raised during the round
};

/// Client compute seconds: T^{c_p}(m) * batches / cpu_factor, times a
/// lognormal(0, sigma) factor when sigma > 0.
double simulate_client_compute(const TierProfileTable& profile, int tier, std::size_t batches, double cpu_factor,
                               double sigma, Rng& noise);

/// (transfer_bytes_per_batch * batches + 2 * model_bytes) / bandwidth.
double simulate_comm(double transfer_bytes_per_batch, std::size_t batches, double model_bytes, double bandwidth);

/// Virtual clock over a population of simulated clients.
class Simulator {
 public:
  Simulator(std::vector<ResourceProfile> profiles, ChurnPolicy churn, double noise_sigma, std::uint64_t seed);

  const std::vector<ResourceProfile>& profiles() const noexcept { return profiles_; }
  const ResourceProfile& profile(int client) const { return profiles_.at(static_cast<std::size_t>(client)); }
  double cumulative_seconds() const noexcept { return cumulative_; }
  int next_round() const noexcept { return round_; }

  /// Times round r for the given assignment (client id -> tier, and its batch
  /// count). Churn is applied first when r > 0 and r % period == 0.
  RoundReport advance_round(const std::map<int, int>& assignment, const std::map<int, std::size_t>& batches,
                            const TierProfileTable& table);

  /// Same clock, but every listed client trains the whole model locally and
  /// ships it both ways; the server does no training.
  RoundReport advance_fedavg_round(const std::map<int, std::size_t>& batches, const TierProfileTable& table);

  /// One standard batch at `tier` on the client's current hardware (noisy).
  double probe_batch_seconds(int client, int tier, const TierProfileTable& table);

 private:
  void apply_churn();
  RoundReport finish(RoundReport report);

  std::vector<ResourceProfile> profiles_;
  ChurnPolicy churn_;
  double sigma_;
  Rng noise_;
  Rng churn_rng_;
  Rng probe_rng_;
  int round_ = 0;
  double cumulative_ = 0.0;
};

}  // namespace dtfl
