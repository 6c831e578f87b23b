#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ldsim/experiment.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int replicas = 0;
  bool serial = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("-o,--out", args.out_dir,
                  "output directory (default $LDSIM_OUTPUT_DIR or ./out)");
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&](const std::string&) { args.seed_set = true; });
  cmd->add_option("--replicas", args.replicas, "override the replica count");
  cmd->add_flag("--serial", args.serial, "run replicas on the serial reference path");
}

int run_command(const CommonArgs& args, const std::string& expected_mode) {
  ldsim::Experiment exp = ldsim::load_experiment(args.config_path);
  if (!expected_mode.empty()) {
    if (expected_mode == "simulate") {
      if (exp.mode != "direct" && exp.mode != "lookdown" && exp.mode != "multitype")
        throw std::invalid_argument("config: simulate expects mode direct|lookdown|multitype, got " +
                                    exp.mode);
    } else if (exp.mode != expected_mode) {
      throw std::invalid_argument("config: subcommand expects mode " + expected_mode + ", got " +
                                  exp.mode);
    }
  }
  if (args.seed_set) exp.seed = args.seed;
  if (args.replicas > 0) exp.replicas = args.replicas;

  std::filesystem::path out = args.out_dir;
  if (out.empty()) {
    if (const char* env = std::getenv("LDSIM_OUTPUT_DIR")) out = env;
    else out = "out";
  }
  const ldsim::ExperimentResult result = ldsim::run_experiment(
      exp, out, args.serial ? ldsim::Exec::serial : ldsim::Exec::openmp);
  for (const auto& entry : result.report.stats) {
    std::cout << entry.name << " = " << ldsim::format_double(entry.estimate);
    if (entry.se > 0.0) std::cout << " +- " << ldsim::format_double(entry.se);
    if (entry.pass) std::cout << (*entry.pass ? "  [pass]" : "  [FAIL]");
    std::cout << "\n";
  }
  for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
  return result.pass && result.report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lookdown particle-system simulator for a two-type interacting branching "
               "diffusion: trajectories, genealogies, and statistical checks"};
  app.require_subcommand(1);

  CommonArgs args;
  const char* subcommands[] = {"simulate", "validate", "mgtest", "project", "export-tree",
                               "fragments"};
  const char* descriptions[] = {
      "run direct/lookdown/multitype trajectories",
      "run the engine invariant suite",
      "estimate martingale residuals for the built-in test functions",
      "compare projected lookdown moments against the direct integrator",
      "export resampled genealogies as Newick trees",
      "compute fragment masses of the event partition"};
  const char* modes[] = {"simulate", "validate", "mgtest", "project-compare", "export-tree",
                         "fragments"};
  for (int k = 0; k < 6; ++k) {
    CLI::App* cmd = app.add_subcommand(subcommands[k], descriptions[k]);
    add_common(cmd, args);
    const std::string mode = modes[k];
    cmd->callback([&args, mode]() {
      const int rc = run_command(args, mode);
      if (rc != 0) std::exit(rc);
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
