#include <iostream>

#include <CLI11.hpp>

#include "dtfl/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Dynamic tiered federated learning simulator"};
  app.require_subcommand(1);
  dtfl::CliOptions opts;

  auto add_common = [&opts](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON config file (defaults when omitted)");
    sub->add_option("--seed", opts.seed, "Override the base seed");
    sub->add_option("--jobs", opts.jobs, "Worker threads for client updates")->check(CLI::PositiveNumber);
    sub->add_option("--out", opts.out, "Output directory");
    sub->add_option("--mode", opts.mode, "dynamic | static:<m> | fedavg");
  };
  for (const char* name : {"profile", "run", "sweep", "partition"}) {
    CLI::App* sub = app.add_subcommand(name);
    add_common(sub);
    if (std::string(name) == "run") sub->add_flag("--print-config", opts.print_config, "Print the effective config and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dtfl::kExitConfig;
  }
  opts.command = app.get_subcommands().front()->get_name();
  return dtfl::run_cli(opts, std::cout, std::cerr);
}
