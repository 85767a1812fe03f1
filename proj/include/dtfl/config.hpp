#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtfl/optim.hpp"
#include "dtfl/privacy.hpp"
#include "dtfl/protocol.hpp"
#include "dtfl/simulator.hpp"
#include "dtfl/tier_profile.hpp"

namespace dtfl {

/// Which tier policy a run uses.
struct RunMode {
  enum class Kind { Dynamic, Static, FedAvg };
  Kind kind = Kind::Dynamic;
  int tier = 0;  // Static only

  /// "dynamic", "static:<m>" or "fedavg"; throws ConfigError otherwise.
  static RunMode parse(const std::string& text);
  std::string str() const;
  friend bool operator==(const RunMode&, const RunMode&) = default;
};

struct DatasetConfig {
  std::string kind = "blobs";  // blobs | csv
  int classes = 3;
  std::size_t dim = 20;
  std::size_t samples = 6000;
  std::size_t test_samples = 1200;
  double separation = 4.0;
  std::string path;
  std::string test_path;
  std::string label_column = "label";
  double test_fraction = 0.2;
};

struct PartitionConfig {
  std::string kind = "iid";  // iid | dirichlet
  double beta = 0.5;
};

struct ProfilesConfig {
  std::vector<ResourceProfile> pool = default_profile_pool();
  std::string assignment = "round_robin";  // round_robin | random
  int churn_period = 50;
  double churn_fraction = 0.0;
};

struct SchedulerSettings {
  RunMode mode;
  double ema_alpha = 0.5;
  double noise_sigma = 0.05;
  std::string cold_start = "probe";  // probe | reference
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::vector<std::vector<std::size_t>> blocks{{64}, {48}, {32}, {16}};
  int tiers = 4;
  std::vector<std::size_t> cuts;  // empty: cut(m) = m
  int clients = 10;
  int rounds = 50;
  double participation = 1.0;
  AggregationPolicy aggregation = AggregationPolicy::DataWeighted;
  OptimConfig optimizer;
  std::size_t batch_size = 100;
  int local_epochs = 1;
  DatasetConfig dataset;
  PartitionConfig partition;
  ProfilesConfig profiles;
  CostModel cost;
  SchedulerSettings scheduler;
  PrivacyConfig privacy;
  bool train = true;
  double target_accuracy = 0.9;
  int jobs = 1;
  std::string output_dir = "out";

  /// Throws ConfigError on any invalid field.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);

/// Throws IoError if unreadable, ConfigError if malformed.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace dtfl
