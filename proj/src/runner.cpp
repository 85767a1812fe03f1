#include "dtfl/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "dtfl/errors.hpp"

namespace dtfl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path prepare_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

class OutFile {
 public:
  explicit OutFile(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  std::ostream& stream() { return out_; }
  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
  OutFile f(path);
  f.stream() << j.dump(2) << '\n';
  f.close();
}

std::string tier_histogram(const RoundReport& r) {
  std::map<int, int> counts;
  for (const auto& c : r.clients) ++counts[c.tier];
  std::string out;
  for (const auto& [tier, n] : counts) {
    if (!out.empty()) out += ';';
    out += std::to_string(tier) + ':' + std::to_string(n);
  }
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RunConfig resolve_config(const CliOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.jobs) cfg.jobs = *opts.jobs;
  if (opts.out) cfg.output_dir = *opts.out;
  if (opts.mode) cfg.scheduler.mode = RunMode::parse(*opts.mode);
  cfg.validate();
  return cfg;
}

json profile_to_json(const TierProfileTable& table) {
  json tiers = json::array();
  for (const auto& t : table.tiers)
    tiers.push_back({{"tier", t.tier},
                     {"transfer_bytes_per_batch", t.transfer_bytes_per_batch},
                     {"client_model_bytes", t.client_model_bytes},
                     {"client_seconds_per_batch", t.client_seconds_per_batch},
                     {"server_seconds_per_batch", t.server_seconds_per_batch}});
  return {{"batch_size", table.batch_size},
          {"tiers", tiers},
          {"full_model_bytes", table.full_model_bytes},
          {"full_seconds_per_batch", table.full_seconds_per_batch}};
}

std::string rounds_csv_header() { return "round,makespan_s,cum_virtual_s,train_loss,test_acc,tier_histogram\n"; }

std::string rounds_csv_row(const RoundReport& r) {
  const double nan = std::nan("");
  std::string row = std::to_string(r.round);
  row += ',' + num(r.makespan);
  row += ',' + num(r.cumulative_seconds);
  row += ',' + num(r.trained ? r.train_loss : nan);
  row += ',' + num(r.trained ? r.test_accuracy : nan);
  row += ',' + tier_histogram(r) + '\n';
  return row;
}

json assignment_record(const RoundReport& r, bool with_t_max) {
  json clients = json::array();
  for (const auto& c : r.clients)
    clients.push_back({{"client", c.client_id},
                       {"tier", c.tier},
                       {"batches", c.batches},
                       {"compute_s", c.compute},
                       {"comm_s", c.comm},
                       {"server_s", c.server},
                       {"total_s", c.total}});
  json rec = {{"round", r.round},
              {"t_max", with_t_max ? json(r.t_max) : json(nullptr)},
              {"makespan_s", r.makespan},
              {"clients", clients}};
  if (!r.events.empty()) rec["events"] = r.events;
  return rec;
}

json summary_to_json(const ExperimentSummary& s, double target) {
  json occupancy = json::object();
  for (const auto& [tier, n] : s.tier_occupancy) occupancy[std::to_string(tier)] = n;
  return {{"mode", s.mode},
          {"rounds_run", s.rounds_run},
          {"cum_virtual_s", s.cumulative_seconds},
          {"target_accuracy", target},
          {"time_to_target_s", optional_number(s.time_to_target)},
          {"round_to_target", s.round_to_target ? json(*s.round_to_target) : json(nullptr)},
          {"trained", s.trained},
          {"final_train_loss", s.trained ? json(s.final_train_loss) : json(nullptr)},
          {"final_train_acc", s.trained ? json(s.final_train_accuracy) : json(nullptr)},
          {"final_test_acc", s.trained ? json(s.final_test_accuracy) : json(nullptr)},
          {"tier_occupancy", occupancy}};
}

int cmd_profile(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_dir(cfg);
  const Experiment exp(cfg, RunMode{});
  write_json(dir / "profile.json", profile_to_json(exp.profile()));
  log << "wrote " << (dir / "profile.json").string() << '\n';
  return kExitOk;
}

int cmd_run(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_dir(cfg);
  Experiment exp(cfg, cfg.scheduler.mode);
  OutFile rounds(dir / "rounds.csv");
  OutFile assignments(dir / "assignments.jsonl");
  rounds.stream() << rounds_csv_header();
  const bool dynamic = cfg.scheduler.mode.kind == RunMode::Kind::Dynamic;
  while (!exp.done()) {
    const RoundReport r = exp.step();
    rounds.stream() << rounds_csv_row(r);
    assignments.stream() << assignment_record(r, dynamic).dump() << '\n';
  }
  rounds.close();
  assignments.close();
  const ExperimentSummary s = exp.summary();
  write_json(dir / "summary.json", summary_to_json(s, cfg.target_accuracy));
  log << s.mode << ": " << s.rounds_run << " rounds, " << num(s.cumulative_seconds) << " virtual seconds\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_dir(cfg);
  std::vector<RunMode> modes{RunMode{}};
  for (int m = 1; m <= cfg.tiers; ++m) modes.push_back({RunMode::Kind::Static, m});
  modes.push_back({RunMode::Kind::FedAvg, 0});

  OutFile sweep(dir / "sweep.csv");
  sweep.stream() << "mode,cum_virtual_s,rounds_run,final_test_acc,time_to_target_s\n";
  for (const auto& mode : modes) {
    Experiment exp(cfg, mode);
    exp.run();
    const ExperimentSummary s = exp.summary();
    sweep.stream() << s.mode << ',' << num(s.cumulative_seconds) << ',' << s.rounds_run << ','
                   << num(s.trained && s.rounds_run > 0 ? s.final_test_accuracy : std::nan("")) << ','
                   << num(s.time_to_target ? *s.time_to_target : std::nan("")) << '\n';
    log << s.mode << ": " << num(s.cumulative_seconds) << " virtual seconds\n";
  }
  sweep.close();
  return kExitOk;
}

int cmd_partition(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_dir(cfg);
  auto [train, test] = build_datasets(cfg);
  const Partition p = build_partition(cfg, train);
  const auto hist = label_histograms(p, train.labels, train.classes);
  json clients = json::array();
  for (std::size_t k = 0; k < p.client_count(); ++k)
    clients.push_back({{"client", k}, {"samples", p.clients[k].size()}, {"label_histogram", hist[k]}});
  write_json(dir / "partition.json", {{"kind", cfg.partition.kind},
                                      {"beta", cfg.partition.beta},
                                      {"total", p.total()},
                                      {"clients", clients}});
  log << "wrote " << (dir / "partition.json").string() << '\n';
  return kExitOk;
}

int run_cli(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = resolve_config(opts);
    if (opts.print_config) {
      out << config_to_json(cfg).dump(2) << '\n';
      return kExitOk;
    }
    if (opts.command == "profile") return cmd_profile(cfg, out);
    if (opts.command == "run") return cmd_run(cfg, out);
    if (opts.command == "sweep") return cmd_sweep(cfg, out);
    if (opts.command == "partition") return cmd_partition(cfg, out);
    err << "error: unknown command '" << opts.command << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    // Shape or range problems in an otherwise well-formed config.
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace dtfl
