// Command-line surface for the scenario runner.
//
// Exit codes: 0 success, 1 invariant failure, 2 config error, 3 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fuzzy/scenario.hpp"
#include "fuzzy/version.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invariant_failure = 1;
constexpr int exit_config_error = 2;
constexpr int exit_io_error = 3;

void print_report(const fuzzy::scenario::RunReport& report, bool quiet) {
  if (quiet) return;
  for (const auto& check : report.checks) {
    std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << report.scenario << ": " << check.name
              << "  value=" << check.value << " bound " << check.comparator << " " << check.bound;
    if (!check.note.empty()) std::cout << "  (" << check.note << ")";
    std::cout << "\n";
  }
  std::cout << report.scenario << ": " << (report.all_pass() ? "all checks passed" : "CHECKS FAILED")
            << " in " << report.wall_time_s << " s; outputs:";
  for (const auto& name : report.outputs) std::cout << " " << name;
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fuzzymech: 1D fuzzy-state evolution and interference analysis"};
  app.require_subcommand(1);

  std::vector<std::string> run_configs, validate_configs;
  std::string output_dir, json_report;
  std::uint64_t seed = 0;
  bool quiet = false;

  CLI::App* run = app.add_subcommand("run", "execute scenario configs and write outputs");
  run->add_option("configs", run_configs, "JSON scenario config files")->required();
  CLI::Option* output_opt = run->add_option("--output-dir", output_dir, "output directory override");
  CLI::Option* seed_opt = run->add_option("--seed", seed, "seed override");
  CLI::Option* report_opt =
      run->add_option("--json-report", json_report, "report path override (single config only)");
  run->add_flag("--quiet", quiet, "suppress per-check output");

  CLI::App* validate = app.add_subcommand("validate", "parse and validate configs without running");
  validate->add_option("configs", validate_configs, "JSON scenario config files")->required();

  CLI::App* list = app.add_subcommand("list-scenarios", "list the available scenario names");
  CLI::App* version = app.add_subcommand("version", "print the version string");

  CLI11_PARSE(app, argc, argv);

  if (version->parsed()) {
    std::cout << "fuzzymech " << fuzzy::version_string << "\n";
    return exit_ok;
  }
  if (list->parsed()) {
    for (const auto& name : fuzzy::scenario::scenario_names()) std::cout << name << "\n";
    return exit_ok;
  }

  try {
    if (validate->parsed()) {
      for (const auto& path : validate_configs) {
        fuzzy::scenario::parse_config(path);
        std::cout << path << ": valid\n";
      }
      return exit_ok;
    }

    if (report_opt->count() > 0 && run_configs.size() != 1) {
      std::cerr << "error: --json-report requires exactly one config\n";
      return exit_config_error;
    }
    bool any_failed = false;
    for (const auto& path : run_configs) {
      const fuzzy::scenario::ScenarioConfig config = fuzzy::scenario::parse_config(path);
      fuzzy::scenario::RunOptions options;
      if (output_opt->count() > 0) options.output_dir = output_dir;
      if (seed_opt->count() > 0) options.seed = seed;
      if (report_opt->count() > 0) options.json_report_path = json_report;
      options.quiet = quiet;
      const fuzzy::scenario::RunReport report = fuzzy::scenario::run_scenario(config, options);
      print_report(report, quiet);
      any_failed = any_failed || !report.all_pass();
    }
    return any_failed ? exit_invariant_failure : exit_ok;
  } catch (const fuzzy::scenario::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const fuzzy::scenario::io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return exit_io_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_io_error;
  }
}
