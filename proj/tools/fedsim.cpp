// fedsim: runs federated-learning experiments and sweeps described by a flat
// key = value config file, writing metric CSVs.
//
//   fedsim --config sweep.cfg --out results --set rule=krum,fang --set seed=1,2,3

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "robustfl/error.hpp"
#include "robustfl/simulation.hpp"
#include "robustfl/sweep.hpp"

namespace {

constexpr const char* kOutDirEnv = "FEDSIM_OUT_DIR";

std::string default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env != nullptr && *env != '\0' ? env : "results";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust federated learning simulator"};
  std::string config_path;
  std::string out_dir = default_out_dir();
  std::vector<std::string> overrides;
  std::string dataset_dump;
  bool dry_run = false;

  app.add_option("--config", config_path, "Flat key = value config file (defaults if omitted)");
  app.add_option("--out", out_dir, std::string("Output directory (env ") + kOutDirEnv + ", default results)");
  app.add_option("--set", overrides, "Override a config key, key=value (repeatable)")->take_all();
  app.add_option("--dump-dataset", dataset_dump, "Write the first run point's dataset as CSV and exit");
  app.add_flag("--dry-run", dry_run, "Validate the config and list the run points without running");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : robustfl::kExitConfigError;
  }

  robustfl::SweepSpec spec;
  try {
    spec = config_path.empty() ? robustfl::parse_config_text("", overrides)
                               : robustfl::parse_config(config_path, overrides);
  } catch (const robustfl::ConfigError& e) {
    std::cerr << "fedsim: configuration error: " << e.what() << '\n';
    return robustfl::kExitConfigError;
  }

  const std::vector<robustfl::SweepPoint> points = robustfl::expand(spec);
  if (dry_run) {
    for (const auto& p : points) {
      std::cout << p.run_id << ' ' << robustfl::to_string(p.config.rule) << ' '
                << robustfl::to_string(p.config.attack.kind) << " p=" << p.config.compromised_fraction
                << " alpha=" << p.config.alpha << " beta=" << p.config.effective_beta() << " seed=" << p.config.seed
                << (p.runnable() ? "" : "  SKIP: " + p.skip_reason) << '\n';
    }
    return robustfl::kExitOk;
  }

  if (!dataset_dump.empty()) {
    for (const auto& p : points) {
      if (!p.runnable()) continue;
      const robustfl::Simulation sim(p.config);
      std::ofstream out(dataset_dump);
      if (!out) {
        std::cerr << "fedsim: cannot write " << dataset_dump << '\n';
        return robustfl::kExitConfigError;
      }
      robustfl::write_dataset_csv(out, sim.dataset());
      return robustfl::kExitOk;
    }
  }

  for (const auto& p : points) {
    if (!p.runnable()) std::cerr << "fedsim: skipping point " << p.ordinal << ": " << p.skip_reason << '\n';
  }
  try {
    const int status = robustfl::run_sweep(spec, out_dir);
    std::cerr << "fedsim: wrote " << out_dir << "/summary.csv (" << points.size() << " points)\n";
    return status;
  } catch (const robustfl::ConfigError& e) {
    std::cerr << "fedsim: configuration error: " << e.what() << '\n';
    return robustfl::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "fedsim: " << e.what() << '\n';
    return robustfl::kExitPartialFailure;
  }
}
