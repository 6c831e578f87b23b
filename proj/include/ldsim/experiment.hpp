#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ldsim/lookdown.hpp"
#include "ldsim/multitype.hpp"
#include "ldsim/parallel.hpp"

namespace ldsim {

// Experiment configuration, one JSON file per run.  Level indices in config
// files and in every output file are 1-based.
struct DirectSection {
  double xa0 = 1.0, xb0 = 1.0;
  double b = 0.0, c = 0.0;
  double dt_t = 1e-3;
  double horizon_t = 1.0;
  double diffusion_scale = 1.0;
  std::vector<double> probe_t;

  bool operator==(const DirectSection&) const = default;
};

struct LookdownSection {
  int n_levels = 64;
  double b = 0.0, c = 0.0;
  double M = 10.0;
  double dt_s = 1e-3;
  double horizon_s = 1.0;
  double v0 = 1.0;
  double mu_a0 = 0.5;
  double diffusion_scale = 1.0;
  std::vector<double> probe_s;
  std::vector<std::array<int, 2>> track_pairs;  // 1-based level pairs

  bool operator==(const LookdownSection&) const = default;
  RunConfig to_run_config(std::uint64_t seed) const;
};

struct MgtestSection {
  std::vector<std::string> functions;  // ids from the built-in library
  double delta_s = 0.01;

  bool operator==(const MgtestSection&) const = default;
};

struct ProjectSection {
  double T = 0.5;
  std::vector<int> n_levels;  // lookdown sizes, e.g. {64,128,256}
  double tolerance_sigmas = 3.0;

  bool operator==(const ProjectSection&) const = default;
};

struct ExportTreeSection {
  int sample_k = 8;
  int samples = 1;

  bool operator==(const ExportTreeSection&) const = default;
};

struct FragmentsSection {
  std::vector<double> probe_s;

  bool operator==(const FragmentsSection&) const = default;
};

struct OutputOptions {
  bool trajectory = true;
  bool snapshots = false;  // full-state JSON snapshots of replica 1
  bool events = false;     // event-trace CSV of replica 1

  bool operator==(const OutputOptions&) const = default;
};

struct Experiment {
  std::string mode;  // direct | lookdown | multitype | project-compare |
                     // mgtest | export-tree | fragments | validate
  std::uint64_t seed = 1;
  int replicas = 1;
  OutputOptions output;
  std::optional<DirectSection> direct;
  std::optional<LookdownSection> lookdown;
  std::optional<std::string> multitype_model_file;
  std::optional<std::string> multitype_model_inline;  // JSON text
  std::optional<MgtestSection> mgtest;
  std::optional<ProjectSection> project;
  std::optional<ExportTreeSection> export_tree;
  std::optional<FragmentsSection> fragments;

  bool operator==(const Experiment&) const = default;
};

Experiment experiment_from_json(const std::string& json_text);
std::string experiment_to_json(const Experiment& e);
Experiment load_experiment(const std::filesystem::path& config_path);

struct StatEntry {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  std::optional<double> target;
  std::optional<bool> pass;
};

struct StatReport {
  std::vector<StatEntry> stats;
  bool all_pass() const;
  std::string to_json() const;
};

struct ExperimentResult {
  StatReport report;
  std::vector<std::filesystem::path> files;
  bool pass = true;
};

// Executes the experiment, writing all outputs under out_dir (created if
// missing).  Replica-level work runs under `exec`; results are identical
// for both policies.
ExperimentResult run_experiment(const Experiment& e, const std::filesystem::path& out_dir,
                                Exec exec = Exec::openmp);

// 17-significant-digit decimal formatting used by every data file.
std::string format_double(double x);

}  // namespace ldsim
