#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtfl/config.hpp"
#include "dtfl/data.hpp"
#include "dtfl/protocol.hpp"
#include "dtfl/scheduler.hpp"
#include "dtfl/simulator.hpp"
#include "dtfl/split_model.hpp"
#include "dtfl/tier_profile.hpp"

namespace dtfl {

struct ExperimentSummary {
  std::string mode;
  int rounds_run = 0;
  double cumulative_seconds = 0.0;
  std::optional<double> time_to_target;  // cum seconds of the first round with test_acc >= target
  std::optional<int> round_to_target;
  bool trained = false;
  double final_train_loss = 0.0;
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
  std::map<int, std::size_t> tier_occupancy;  // tier -> client-rounds
};

/// Train and test sets built from the dataset section, standardized with
/// statistics of the training rows.
std::pair<Dataset, Dataset> build_datasets(const RunConfig& cfg);

Partition build_partition(const RunConfig& cfg, const Dataset& train);

BlockStack build_global_model(const RunConfig& cfg, std::size_t input_dim, int classes);

TierLayout build_layout(const RunConfig& cfg);

/// Initial hardware per client, round-robin over the pool or drawn at random.
std::vector<ResourceProfile> initial_profiles(const RunConfig& cfg);

/// One experiment: data, model, virtual clock and scheduler state, advanced a
/// round at a time.
class Experiment {
 public:
  Experiment(RunConfig cfg, RunMode mode);

  const RunConfig& config() const noexcept { return cfg_; }
  const RunMode& mode() const noexcept { return mode_; }
  const Dataset& train_set() const noexcept { return train_; }
  const Dataset& test_set() const noexcept { return test_; }
  const Partition& partition() const noexcept { return partition_; }
  const TierProfileTable& profile() const noexcept { return table_; }
  const Simulator& simulator() const noexcept { return sim_; }
  const std::vector<ClientHistory>& histories() const noexcept { return histories_; }
  const GlobalModelState& state() const { return *state_; }
  const std::vector<RoundReport>& reports() const noexcept { return reports_; }

  int rounds_run() const noexcept { return static_cast<int>(reports_.size()); }
  bool done() const noexcept { return rounds_run() >= cfg_.rounds; }

  /// Clients taking part in `round`, sorted.
  std::vector<int> participants(int round) const;

  RoundReport step();
  void run();

  ExperimentSummary summary() const;

 private:
  RoundContext context();

  RunConfig cfg_;
  RunMode mode_;
  Dataset train_;
  Dataset test_;
  Partition partition_;
  TierProfileTable table_;
  Simulator sim_;
  std::optional<GlobalModelState> state_;  // built once the data fixes the input width
  std::vector<ClientHistory> histories_;
  std::vector<RoundReport> reports_;
};

}  // namespace dtfl
