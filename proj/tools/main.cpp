#include "opmps/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <iostream>
#include <thread>

using namespace opmps;

namespace {

struct Options {
  std::string config;
  std::string out;
  unsigned threads = 0;
  std::optional<double> tolerance;
};

fs::path output_dir(const Options& o, const RunConfig& cfg) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("OPMPS_OUT"); env != nullptr && *env != '\0') return env;
  return cfg.out_dir;
}

int run(const std::string& command, const Options& o) {
  const RunConfig cfg = load_config(o.config);
  const fs::path out = output_dir(o, cfg);
  const unsigned threads = o.threads > 0 ? o.threads : std::max(1u, std::thread::hardware_concurrency());

  if (command == "thermal") {
    const auto r = run_thermal(cfg, out);
    fmt::print("thermal: {} snapshots in {}\n", r.manifest.snapshots.size(), thermal_dir(out).string());
  } else if (command == "heisenberg") {
    for (const auto& r : run_heisenberg(cfg, out))
      fmt::print("heisenberg '{}': {} snapshots in {}\n", r.manifest.label, r.manifest.snapshots.size(),
                 heisenberg_dir(out, r.manifest.label).string());
  } else if (command == "correlate") {
    for (const auto& g : run_correlate(cfg, out, threads))
      fmt::print("correlate '{}': {}x{} grid in {}\n", g.label, g.beta_axis.size(), g.t_axis.size(),
                 grid_path(out, g.label).string());
  } else if (command == "validate") {
    const auto report = run_validate(cfg, out, o.tolerance, threads);
    fmt::print("{}", report.text());
    return report.passed() ? exit_ok : exit_check_failed;
  } else if (command == "report") {
    for (const auto& p : run_report(cfg, out)) fmt::print("{}\n", p.string());
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-temperature real-time correlations with operator-space MPS"};
  app.require_subcommand(1, 1);
  Options o;
  std::string command;
  for (const char* name : {"thermal", "heisenberg", "correlate", "validate", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides OPMPS_OUT and the config)");
    sub->add_option("--threads", o.threads, "worker threads for grid evaluation");
    if (std::string(name) == "validate")
      sub->add_option("--tolerance-override", o.tolerance, "absolute tolerance per grid cell");
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    return run(command, o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config;
  } catch (const EvolutionAbort& e) {
    std::cerr << "aborted: " << e.what() << " (partial outputs are flagged in the manifest)\n";
    return exit_abort;
  } catch (const OracleCapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_oracle_cap;
  } catch (const IncompatibleInputs& e) {
    std::cerr << "incompatible inputs: " << e.what() << "\n";
    return exit_incompatible;
  } catch (const SnapshotFormatError& e) {
    std::cerr << "incompatible inputs: " << e.what() << "\n";
    return exit_incompatible;
  } catch (const BasisMismatch& e) {
    std::cerr << "incompatible inputs: " << e.what() << "\n";
    return exit_incompatible;
  } catch (const ShapeError& e) {
    std::cerr << "incompatible inputs: " << e.what() << "\n";
    return exit_incompatible;
  } catch (const StampMismatch& e) {
    std::cerr << "incompatible inputs: " << e.what() << "\n";
    return exit_incompatible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_check_failed;
  }
}
