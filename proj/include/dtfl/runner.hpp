#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "dtfl/config.hpp"
#include "dtfl/engine.hpp"

namespace dtfl {

struct CliOptions {
  std::string command;  // profile | run | sweep | partition
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  std::optional<std::string> mode;
  bool print_config = false;
};

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

/// Loads the config file (or defaults when no path is given) and applies the
/// command-line overrides.
RunConfig resolve_config(const CliOptions& opts);

nlohmann::json profile_to_json(const TierProfileTable& table);
std::string rounds_csv_header();
std::string rounds_csv_row(const RoundReport& r);
nlohmann::json assignment_record(const RoundReport& r, bool with_t_max);
nlohmann::json summary_to_json(const ExperimentSummary& s, double target);

/// Each writes its files under cfg.output_dir and returns an exit code;
/// errors propagate as exceptions.
int cmd_profile(const RunConfig& cfg, std::ostream& log);
int cmd_run(const RunConfig& cfg, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log);
int cmd_partition(const RunConfig& cfg, std::ostream& log);

/// Dispatches and maps failures to exit codes, printing the message to `err`.
int run_cli(const CliOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace dtfl
