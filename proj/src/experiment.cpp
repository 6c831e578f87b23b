#include "ldsim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ldsim/engine.hpp"
#include "ldsim/genealogy.hpp"
#include "ldsim/mgcheck.hpp"
#include "ldsim/rng.hpp"
#include "ldsim/stats.hpp"

namespace ldsim {

using nlohmann::json;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

RunConfig LookdownSection::to_run_config(std::uint64_t seed) const {
  RunConfig cfg;
  cfg.n_levels = n_levels;
  cfg.b = b;
  cfg.c = c;
  cfg.M = M;
  cfg.dt_s = dt_s;
  cfg.horizon_s = horizon_s;
  cfg.seed = seed;
  cfg.v0 = v0;
  cfg.mu_a0 = mu_a0;
  cfg.diffusion_scale = diffusion_scale;
  for (const auto& [a, b2] : track_pairs) cfg.track_pairs.emplace_back(a - 1, b2 - 1);
  return cfg;
}

namespace {

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const char* where) {
  std::string bad;
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; }) == allowed.end()) {
      if (!bad.empty()) bad += ", ";
      bad += key;
    }
  }
  if (!bad.empty())
    throw std::invalid_argument(std::string("config: unknown keys in ") + where + ": " + bad);
}

DirectSection direct_from_json(const json& j) {
  require_keys(j, {"xa0", "xb0", "b", "c", "dt_t", "horizon_t", "diffusion_scale", "probe_t"},
               "direct");
  DirectSection s;
  s.xa0 = j.value("xa0", s.xa0);
  s.xb0 = j.value("xb0", s.xb0);
  s.b = j.value("b", s.b);
  s.c = j.value("c", s.c);
  s.dt_t = j.value("dt_t", s.dt_t);
  s.horizon_t = j.value("horizon_t", s.horizon_t);
  s.diffusion_scale = j.value("diffusion_scale", s.diffusion_scale);
  if (j.contains("probe_t")) s.probe_t = j.at("probe_t").get<std::vector<double>>();
  return s;
}

json direct_to_json(const DirectSection& s) {
  json j;
  j["xa0"] = s.xa0;
  j["xb0"] = s.xb0;
  j["b"] = s.b;
  j["c"] = s.c;
  j["dt_t"] = s.dt_t;
  j["horizon_t"] = s.horizon_t;
  j["diffusion_scale"] = s.diffusion_scale;
  j["probe_t"] = s.probe_t;
  return j;
}

LookdownSection lookdown_from_json(const json& j) {
  require_keys(j,
               {"n_levels", "b", "c", "M", "dt_s", "horizon_s", "v0", "mu_a0",
                "diffusion_scale", "probe_s", "track_pairs"},
               "lookdown");
  LookdownSection s;
  s.n_levels = j.value("n_levels", s.n_levels);
  s.b = j.value("b", s.b);
  s.c = j.value("c", s.c);
  s.M = j.value("M", s.M);
  s.dt_s = j.value("dt_s", s.dt_s);
  s.horizon_s = j.value("horizon_s", s.horizon_s);
  s.v0 = j.value("v0", s.v0);
  s.mu_a0 = j.value("mu_a0", s.mu_a0);
  s.diffusion_scale = j.value("diffusion_scale", s.diffusion_scale);
  if (j.contains("probe_s")) s.probe_s = j.at("probe_s").get<std::vector<double>>();
  if (j.contains("track_pairs")) {
    for (const auto& p : j.at("track_pairs")) {
      if (!p.is_array() || p.size() != 2)
        throw std::invalid_argument("config: track_pairs entries must be [i, j]");
      s.track_pairs.push_back({p[0].get<int>(), p[1].get<int>()});
    }
  }
  return s;
}

json lookdown_to_json(const LookdownSection& s) {
  json j;
  j["n_levels"] = s.n_levels;
  j["b"] = s.b;
  j["c"] = s.c;
  j["M"] = s.M;
  j["dt_s"] = s.dt_s;
  j["horizon_s"] = s.horizon_s;
  j["v0"] = s.v0;
  j["mu_a0"] = s.mu_a0;
  j["diffusion_scale"] = s.diffusion_scale;
  j["probe_s"] = s.probe_s;
  json pairs = json::array();
  for (const auto& [a, b2] : s.track_pairs) pairs.push_back(json::array({a, b2}));
  j["track_pairs"] = pairs;
  return j;
}

}  // namespace

Experiment experiment_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  require_keys(j,
               {"mode", "seed", "replicas", "output", "direct", "lookdown", "multitype_model",
                "multitype_model_file", "mgtest", "project", "export_tree", "fragments"},
               "top level");
  Experiment e;
  e.mode = j.at("mode").get<std::string>();
  static const char* kModes[] = {"direct",  "lookdown",    "multitype", "project-compare",
                                 "mgtest",  "export-tree", "fragments", "validate"};
  if (std::find_if(std::begin(kModes), std::end(kModes),
                   [&](const char* m) { return e.mode == m; }) == std::end(kModes))
    throw std::invalid_argument("config: unknown mode " + e.mode);
  e.seed = j.value("seed", std::uint64_t{1});
  e.replicas = j.value("replicas", 1);
  if (e.replicas < 1) throw std::invalid_argument("config: replicas must be >= 1");
  if (j.contains("output")) {
    const json& o = j.at("output");
    require_keys(o, {"trajectory", "snapshots", "events"}, "output");
    e.output.trajectory = o.value("trajectory", true);
    e.output.snapshots = o.value("snapshots", false);
    e.output.events = o.value("events", false);
  }
  if (j.contains("direct")) e.direct = direct_from_json(j.at("direct"));
  if (j.contains("lookdown")) e.lookdown = lookdown_from_json(j.at("lookdown"));
  if (j.contains("multitype_model_file"))
    e.multitype_model_file = j.at("multitype_model_file").get<std::string>();
  if (j.contains("multitype_model")) e.multitype_model_inline = j.at("multitype_model").dump();
  if (j.contains("mgtest")) {
    const json& m = j.at("mgtest");
    require_keys(m, {"functions", "delta_s"}, "mgtest");
    MgtestSection s;
    if (m.contains("functions")) s.functions = m.at("functions").get<std::vector<std::string>>();
    s.delta_s = m.value("delta_s", s.delta_s);
    e.mgtest = s;
  }
  if (j.contains("project")) {
    const json& p = j.at("project");
    require_keys(p, {"T", "n_levels", "tolerance_sigmas"}, "project");
    ProjectSection s;
    s.T = p.value("T", s.T);
    if (p.contains("n_levels")) s.n_levels = p.at("n_levels").get<std::vector<int>>();
    s.tolerance_sigmas = p.value("tolerance_sigmas", s.tolerance_sigmas);
    e.project = s;
  }
  if (j.contains("export_tree")) {
    const json& t = j.at("export_tree");
    require_keys(t, {"sample_k", "samples"}, "export_tree");
    ExportTreeSection s;
    s.sample_k = t.value("sample_k", s.sample_k);
    s.samples = t.value("samples", s.samples);
    e.export_tree = s;
  }
  if (j.contains("fragments")) {
    const json& f = j.at("fragments");
    require_keys(f, {"probe_s"}, "fragments");
    FragmentsSection s;
    if (f.contains("probe_s")) s.probe_s = f.at("probe_s").get<std::vector<double>>();
    e.fragments = s;
  }
  return e;
}

std::string experiment_to_json(const Experiment& e) {
  json j;
  j["mode"] = e.mode;
  j["seed"] = e.seed;
  j["replicas"] = e.replicas;
  j["output"] = {{"trajectory", e.output.trajectory},
                 {"snapshots", e.output.snapshots},
                 {"events", e.output.events}};
  if (e.direct) j["direct"] = direct_to_json(*e.direct);
  if (e.lookdown) j["lookdown"] = lookdown_to_json(*e.lookdown);
  if (e.multitype_model_file) j["multitype_model_file"] = *e.multitype_model_file;
  if (e.multitype_model_inline) j["multitype_model"] = json::parse(*e.multitype_model_inline);
  if (e.mgtest)
    j["mgtest"] = {{"functions", e.mgtest->functions}, {"delta_s", e.mgtest->delta_s}};
  if (e.project)
    j["project"] = {{"T", e.project->T},
                    {"n_levels", e.project->n_levels},
                    {"tolerance_sigmas", e.project->tolerance_sigmas}};
  if (e.export_tree)
    j["export_tree"] = {{"sample_k", e.export_tree->sample_k},
                        {"samples", e.export_tree->samples}};
  if (e.fragments) j["fragments"] = {{"probe_s", e.fragments->probe_s}};
  return j.dump(2);
}

Experiment load_experiment(const std::filesystem::path& config_path) {
  std::ifstream in(config_path);
  if (!in) throw std::invalid_argument("config: cannot open " + config_path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return experiment_from_json(ss.str());
}

bool StatReport::all_pass() const {
  for (const auto& s : stats)
    if (s.pass && !*s.pass) return false;
  return true;
}

std::string StatReport::to_json() const {
  json j;
  j["stats"] = json::array();
  for (const auto& s : stats) {
    json e;
    e["name"] = s.name;
    e["estimate"] = s.estimate;
    e["se"] = s.se;
    if (s.target) e["target"] = *s.target;
    if (s.pass) e["pass"] = *s.pass;
    j["stats"].push_back(e);
  }
  j["pass"] = all_pass();
  return j.dump(2);
}

namespace {

std::filesystem::path write_text(const std::filesystem::path& dir, const std::string& name,
                                 const std::string& content) {
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  return path;
}

MultitypeModel resolve_model(const Experiment& e) {
  if (e.multitype_model_inline) return multitype_model_from_json(*e.multitype_model_inline);
  if (e.multitype_model_file) {
    std::ifstream in(*e.multitype_model_file);
    if (!in)
      throw std::invalid_argument("config: cannot open model file " + *e.multitype_model_file);
    std::stringstream ss;
    ss << in.rdbuf();
    return multitype_model_from_json(ss.str());
  }
  throw std::invalid_argument("config: multitype mode needs multitype_model or _file");
}

const LookdownSection& need_lookdown(const Experiment& e) {
  if (!e.lookdown) throw std::invalid_argument("config: mode " + e.mode + " needs a lookdown section");
  return *e.lookdown;
}

std::string snapshots_json(const std::vector<std::pair<double, LookdownState>>& snaps,
                           const std::vector<std::string>* type_names) {
  json arr = json::array();
  for (const auto& [s, st] : snaps) {
    json one;
    one["s"] = s;
    one["zeta"] = st.zeta;
    one["t"] = st.t_accum;
    one["stop"] = stop_name(st.stop);
    json g = json::array();
    for (auto t : st.types)
      g.push_back(type_names ? (*type_names)[t] : (t == 0 ? "A" : "B"));
    one["G"] = g;
    json r = json::array();
    for (int a = 0; a < st.n(); ++a)
      for (int b2 = a + 1; b2 < st.n(); ++b2) r.push_back(st.r.at(a, b2));
    one["R"] = r;
    arr.push_back(one);
  }
  return arr.dump(2);
}

// --- direct mode ---------------------------------------------------------

ExperimentResult run_direct(const Experiment& e, const std::filesystem::path& out_dir,
                            Exec exec) {
  if (!e.direct) throw std::invalid_argument("config: direct mode needs a direct section");
  const DirectSection& d = *e.direct;
  DirectConfig cfg;
  cfg.xa0 = d.xa0;
  cfg.xb0 = d.xb0;
  cfg.b = d.b;
  cfg.c = d.c;
  cfg.dt_t = d.dt_t;
  cfg.horizon_t = d.horizon_t;
  cfg.diffusion_scale = d.diffusion_scale;

  std::vector<DirectPath> paths(e.replicas);
  parallel_for(e.replicas, exec, [&](std::size_t rep) {
    paths[rep] = simulate_direct(cfg, derive_seed(e.seed, seed_tag::kReplica, rep));
  });

  ExperimentResult out;
  if (e.output.trajectory) {
    std::string csv = "replica,t,xi_a,xi_b\n";
    for (int rep = 0; rep < e.replicas; ++rep) {
      const DirectPath& p = paths[rep];
      if (d.probe_t.empty()) {
        for (std::size_t k = 0; k < p.times_t.size(); ++k)
          csv += std::to_string(rep + 1) + "," + format_double(p.times_t[k]) + "," +
                 format_double(p.xi_a[k]) + "," + format_double(p.xi_b[k]) + "\n";
      } else {
        for (double t : d.probe_t) {
          const auto it =
              std::lower_bound(p.times_t.begin(), p.times_t.end(), t - 1e-12);
          const std::size_t k =
              std::min<std::size_t>(it - p.times_t.begin(), p.times_t.size() - 1);
          csv += std::to_string(rep + 1) + "," + format_double(p.times_t[k]) + "," +
                 format_double(p.xi_a[k]) + "," + format_double(p.xi_b[k]) + "\n";
        }
      }
    }
    out.files.push_back(write_text(out_dir, "trajectory.csv", csv));
  }

  Accumulator xa, xb, extinct_b;
  for (const auto& p : paths) {
    xa.add(p.xi_a.back());
    xb.add(p.xi_b.back());
    extinct_b.add(p.xi_b.back() == 0.0 ? 1.0 : 0.0);
  }
  const bool have_se = e.replicas >= 2;
  out.report.stats.push_back(
      {"xi_a_final_mean", xa.mean(), have_se ? xa.standard_error() : 0.0, {}, {}});
  out.report.stats.push_back(
      {"xi_b_final_mean", xb.mean(), have_se ? xb.standard_error() : 0.0, {}, {}});
  out.report.stats.push_back({"xi_b_extinct_fraction", extinct_b.mean(),
                              have_se ? extinct_b.standard_error() : 0.0, {}, {}});
  return out;
}

// --- lookdown / multitype trajectories -----------------------------------

template <class Model>
ExperimentResult run_particle_mode(const Experiment& e, const std::filesystem::path& out_dir,
                                   Exec exec, const Model& model,
                                   const std::vector<std::string>* type_names) {
  const LookdownSection& sec = need_lookdown(e);
  std::vector<double> probes = sec.probe_s;
  if (probes.empty()) probes.push_back(sec.horizon_s);

  std::vector<std::vector<Snapshot>> trajectories(e.replicas);
  std::vector<std::pair<double, LookdownState>> full_snaps;
  parallel_for(e.replicas, exec, [&](std::size_t rep) {
    RunConfig cfg = sec.to_run_config(derive_seed(e.seed, seed_tag::kReplica, rep));
    Engine<Model> engine(cfg, model);
    EngineHooks hooks;
    if (rep == 0 && e.output.snapshots) {
      hooks.on_probe = [&](const LookdownState& st) { full_snaps.emplace_back(st.s, st); };
    }
    engine.run(probes, &hooks);
    trajectories[rep] = engine.snapshots();
  });

  ExperimentResult out;
  const int num_types = model.num_types();
  if (e.output.trajectory) {
    std::string csv;
    if (num_types == 2) {
      csv = "replica,s,t,zeta,mu_a,xi_a,xi_b,stop";
    } else {
      csv = "replica,s,t,zeta";
      for (int h = 0; h < num_types; ++h)
        csv += ",freq_" + (type_names ? (*type_names)[h] : std::to_string(h));
      csv += ",stop";
    }
    for (const auto& [a, b2] : sec.track_pairs)
      csv += ",r_" + std::to_string(a) + "_" + std::to_string(b2);
    csv += "\n";
    for (int rep = 0; rep < e.replicas; ++rep) {
      for (const Snapshot& s : trajectories[rep]) {
        csv += std::to_string(rep + 1) + "," + format_double(s.s) + "," + format_double(s.t) +
               "," + format_double(s.zeta);
        if (num_types == 2) {
          csv += "," + format_double(s.mu_a()) + "," + format_double(s.zeta * s.type_freqs[0]) +
                 "," + format_double(s.zeta * (1.0 - s.type_freqs[0]));
        } else {
          for (int h = 0; h < num_types; ++h) csv += "," + format_double(s.type_freqs[h]);
        }
        csv += std::string(",") + stop_name(s.stop);
        for (double r : s.tracked) csv += "," + format_double(r);
        csv += "\n";
      }
    }
    out.files.push_back(write_text(out_dir, "trajectory.csv", csv));
  }
  if (e.output.snapshots)
    out.files.push_back(
        write_text(out_dir, "snapshots.json", snapshots_json(full_snaps, type_names)));
  if (e.output.events) {
    const std::uint64_t rep0 = derive_seed(e.seed, seed_tag::kReplica, 0);
    EventStream ev = gen_neutral_events(sec.n_levels, sec.horizon_s, rep0);
    const double cap = model.rate_cap(sec.M);
    if (cap > 0.0)
      ev = merge_streams(
          ev, gen_potential_events(sec.n_levels, sec.horizon_s, cap, model.marks(), rep0));
    std::ostringstream ss;
    write_event_csv(ss, ev);
    out.files.push_back(write_text(out_dir, "events.csv", ss.str()));
  }

  // Final-probe summary statistics.
  Accumulator zeta_acc, stopped;
  std::vector<Accumulator> freq_acc(num_types);
  for (int rep = 0; rep < e.replicas; ++rep) {
    const Snapshot& last = trajectories[rep].back();
    zeta_acc.add(last.zeta);
    stopped.add(last.stop == StopStatus::none ? 0.0 : 1.0);
    for (int h = 0; h < num_types; ++h) freq_acc[h].add(last.type_freqs[h]);
  }
  const bool have_se = e.replicas >= 2;
  out.report.stats.push_back(
      {"zeta_final_mean", zeta_acc.mean(), have_se ? zeta_acc.standard_error() : 0.0, {}, {}});
  for (int h = 0; h < num_types; ++h) {
    const std::string name =
        "freq_" + (type_names ? (*type_names)[h] : std::string(h == 0 ? "A" : "B")) +
        "_final_mean";
    out.report.stats.push_back(
        {name, freq_acc[h].mean(), have_se ? freq_acc[h].standard_error() : 0.0, {}, {}});
  }
  out.report.stats.push_back(
      {"stopped_fraction", stopped.mean(), have_se ? stopped.standard_error() : 0.0, {}, {}});
  return out;
}

// --- project-compare ------------------------------------------------------

struct ProjectedMoments {
  Accumulator ea, eb, eab;
};

ProjectedMoments lookdown_moments_at_t(const LookdownSection& sec, int n_levels, double T,
                                       std::uint64_t seed, int replicas, Exec exec) {
  std::vector<std::array<double, 2>> masses(replicas);
  parallel_for(replicas, exec, [&](std::size_t rep) {
    LookdownSection s2 = sec;
    s2.n_levels = n_levels;
    RunConfig cfg = s2.to_run_config(derive_seed(seed, seed_tag::kReplica, rep));
    // s-horizon long enough to reach t = T: t grows at rate zeta > 1/M.
    cfg.horizon_s = T * sec.M * 1.05;
    Engine<TwoTypeModel> engine(cfg, TwoTypeModel{sec.b, sec.c});
    engine.run_until_t(T);
    const auto [xa, xb] = project_masses(engine.state());
    masses[rep] = {xa, xb};
  });
  ProjectedMoments out;
  for (const auto& [xa, xb] : masses) {
    out.ea.add(xa);
    out.eb.add(xb);
    out.eab.add(xa * xb);
  }
  return out;
}

ExperimentResult run_project_compare(const Experiment& e, const std::filesystem::path& out_dir,
                                     Exec exec) {
  if (!e.direct || !e.project)
    throw std::invalid_argument("config: project-compare needs direct and project sections");
  if (e.replicas < 2)
    throw std::invalid_argument("config: project-compare needs replicas >= 2");
  const LookdownSection& sec = need_lookdown(e);
  const ProjectSection& pr = *e.project;
  const double T = pr.T;

  DirectConfig dc;
  dc.xa0 = e.direct->xa0;
  dc.xb0 = e.direct->xb0;
  dc.b = e.direct->b;
  dc.c = e.direct->c;
  dc.dt_t = e.direct->dt_t;
  dc.horizon_t = T;
  dc.diffusion_scale = e.direct->diffusion_scale;
  std::vector<std::array<double, 2>> direct_masses(e.replicas);
  parallel_for(e.replicas, exec, [&](std::size_t rep) {
    const DirectPath p = simulate_direct(dc, derive_seed(e.seed, seed_tag::kReplica, rep));
    direct_masses[rep] = {p.xi_a.back(), p.xi_b.back()};
  });
  ProjectedMoments direct_m;
  for (const auto& [xa, xb] : direct_masses) {
    direct_m.ea.add(xa);
    direct_m.eb.add(xb);
    direct_m.eab.add(xa * xb);
  }

  ExperimentResult out;
  std::string csv = "engine,n_levels,moment,estimate,se\n";
  auto emit = [&](const std::string& engine, int n, const char* name, const Accumulator& acc) {
    csv += engine + "," + std::to_string(n) + "," + name + "," + format_double(acc.mean()) +
           "," + format_double(acc.standard_error()) + "\n";
  };
  emit("direct", 0, "E[xi_a]", direct_m.ea);
  emit("direct", 0, "E[xi_b]", direct_m.eb);
  emit("direct", 0, "E[xi_a*xi_b]", direct_m.eab);

  std::vector<int> sizes = pr.n_levels;
  if (sizes.empty()) sizes.push_back(sec.n_levels);
  for (int n : sizes) {
    const ProjectedMoments ld = lookdown_moments_at_t(sec, n, T, e.seed, e.replicas, exec);
    emit("lookdown", n, "E[xi_a]", ld.ea);
    emit("lookdown", n, "E[xi_b]", ld.eb);
    emit("lookdown", n, "E[xi_a*xi_b]", ld.eab);
    auto compare = [&](const char* name, const Accumulator& a, const Accumulator& b2) {
      const double se = std::sqrt(a.standard_error() * a.standard_error() +
                                  b2.standard_error() * b2.standard_error());
      const double gap = std::abs(a.mean() - b2.mean());
      StatEntry entry;
      entry.name = std::string(name) + "_n" + std::to_string(n);
      entry.estimate = a.mean() - b2.mean();
      entry.se = se;
      entry.target = 0.0;
      entry.pass = gap <= pr.tolerance_sigmas * se;
      out.report.stats.push_back(entry);
    };
    compare("E[xi_a]_lookdown_minus_direct", ld.ea, direct_m.ea);
    compare("E[xi_b]_lookdown_minus_direct", ld.eb, direct_m.eb);
    compare("E[xi_a*xi_b]_lookdown_minus_direct", ld.eab, direct_m.eab);
  }
  out.files.push_back(write_text(out_dir, "moments.csv", csv));
  out.pass = out.report.all_pass();
  return out;
}

// --- mgtest ----------------------------------------------------------------

ExperimentResult run_mgtest(const Experiment& e, const std::filesystem::path& out_dir,
                            Exec exec) {
  if (!e.mgtest) throw std::invalid_argument("config: mgtest mode needs a mgtest section");
  const LookdownSection& sec = need_lookdown(e);
  RunConfig cfg = sec.to_run_config(e.seed);

  std::vector<std::string> ids = e.mgtest->functions;
  if (ids.empty()) ids = {"bump_v1", "bump_softcap_r12", "bump_ind_a"};
  ExperimentResult out;
  std::string all = "[\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& id = ids[i];
    std::unique_ptr<ProductTestFunction> f;
    if (id == "bump_v1") f = std::make_unique<ProductTestFunction>(make_bump_v(sec.M, 1));
    else if (id == "bump_v2") f = std::make_unique<ProductTestFunction>(make_bump_v(sec.M, 2));
    else if (id == "bump_softcap_r12")
      f = std::make_unique<ProductTestFunction>(make_bump_softcap_r12(sec.M));
    else if (id == "bump_ind_a")
      f = std::make_unique<ProductTestFunction>(make_bump_indicator_a(sec.M));
    else if (id == "bump_ind_a1a2")
      f = std::make_unique<ProductTestFunction>(make_bump_indicator_aa(sec.M));
    else
      throw std::invalid_argument("config: unknown test function " + id);
    const ResidualReport report =
        martingale_residual(cfg, *f, e.mgtest->delta_s, e.replicas, exec);
    all += "  " + residual_report_json(report);
    all += (i + 1 < ids.size()) ? ",\n" : "\n";
    StatEntry entry;
    entry.name = "residual_" + id;
    entry.estimate = report.mean;
    entry.se = report.se;
    entry.target = 0.0;
    entry.pass = report.pass;
    out.report.stats.push_back(entry);
  }
  all += "]\n";
  out.files.push_back(write_text(out_dir, "residuals.json", all));
  out.pass = out.report.all_pass();
  return out;
}

// --- export-tree ------------------------------------------------------------

ExperimentResult run_export_tree(const Experiment& e, const std::filesystem::path& out_dir,
                                 Exec /*exec*/) {
  if (!e.export_tree)
    throw std::invalid_argument("config: export-tree mode needs an export_tree section");
  const LookdownSection& sec = need_lookdown(e);
  RunConfig cfg = sec.to_run_config(derive_seed(e.seed, seed_tag::kReplica, 0));
  Engine<TwoTypeModel> engine(cfg, TwoTypeModel{sec.b, sec.c});
  engine.run();
  const auto samples = sample_marked_matrices(engine.state(), e.export_tree->sample_k,
                                              e.export_tree->samples, e.seed);
  std::string nwk;
  json sample_dump = json::array();
  for (const auto& s : samples) {
    const GenealogyTree tree = ultrametric_to_tree(s.dist, s.k);
    std::vector<int> labels(s.levels.size());
    for (std::size_t i = 0; i < s.levels.size(); ++i) labels[i] = s.levels[i] + 1;
    nwk += to_newick(tree, labels) + "\n";
    json one;
    one["levels"] = labels;
    json types = json::array();
    for (auto t : s.types) types.push_back(t == 0 ? "A" : "B");
    one["types"] = types;
    json rows = json::array();
    for (int a = 0; a < s.k; ++a) {
      json row = json::array();
      for (int b2 = 0; b2 < s.k; ++b2) row.push_back(s.dist[std::size_t(a) * s.k + b2]);
      rows.push_back(row);
    }
    one["d"] = rows;
    sample_dump.push_back(one);
  }
  ExperimentResult out;
  out.files.push_back(write_text(out_dir, "trees.nwk", nwk));
  out.files.push_back(write_text(out_dir, "samples.json", sample_dump.dump(2)));
  out.report.stats.push_back(
      {"trees_exported", static_cast<double>(samples.size()), 0.0, {}, {}});
  return out;
}

// --- fragments ---------------------------------------------------------------

ExperimentResult run_fragments(const Experiment& e, const std::filesystem::path& out_dir,
                               Exec /*exec*/) {
  if (!e.fragments)
    throw std::invalid_argument("config: fragments mode needs a fragments section");
  const LookdownSection& sec = need_lookdown(e);
  const std::uint64_t seed = derive_seed(e.seed, seed_tag::kReplica, 0);
  EventStream neutral = gen_neutral_events(sec.n_levels, sec.horizon_s, seed);
  const double cap = std::max(sec.b, sec.c) * sec.M * sec.M;
  EventStream potential =
      cap > 0.0
          ? gen_potential_events(sec.n_levels, sec.horizon_s, cap, MarkSet::beta_delta(), seed)
          : EventStream{sec.n_levels, sec.horizon_s, 0.0, {}};
  std::vector<double> probes = e.fragments->probe_s;
  if (probes.empty()) probes = {sec.horizon_s};
  const FragmentMasses fm = fragment_masses(potential, neutral, sec.horizon_s, probes);

  std::string csv = "probe_s,root_time,root_level,mass\n";
  ExperimentResult out;
  for (std::size_t p = 0; p < fm.probe_times.size(); ++p) {
    double total = 0.0;
    for (std::size_t r = 0; r < fm.roots.size(); ++r) {
      if (fm.mass[p][r] == 0.0) continue;
      total += fm.mass[p][r];
      csv += format_double(fm.probe_times[p]) + "," + format_double(fm.roots[r].time_s) + "," +
             std::to_string(fm.roots[r].level + 1) + "," + format_double(fm.mass[p][r]) + "\n";
    }
    StatEntry entry;
    entry.name = "mass_total_probe_" + std::to_string(p);
    entry.estimate = total;
    entry.se = 0.0;
    entry.target = 1.0;
    entry.pass = std::abs(total - 1.0) <= 1e-12;
    out.report.stats.push_back(entry);
  }
  out.files.push_back(write_text(out_dir, "fragments.csv", csv));
  out.pass = out.report.all_pass();
  return out;
}

// --- validate -----------------------------------------------------------------

ExperimentResult run_validate(const Experiment& e, const std::filesystem::path& out_dir,
                              Exec exec) {
  const LookdownSection& sec = need_lookdown(e);
  const int replicas = std::max(e.replicas, 2);

  std::vector<int> ultra_fail(replicas, 0);
  std::vector<int> parent_fail(replicas, 0);
  std::vector<int> event_count(replicas, 0);
  std::vector<double> clock_gap(replicas, 0.0);
  parallel_for(replicas, exec, [&](std::size_t rep) {
    RunConfig cfg = sec.to_run_config(derive_seed(e.seed, seed_tag::kReplica, rep));
    Engine<TwoTypeModel> engine(cfg, TwoTypeModel{sec.b, sec.c});
    EngineHooks hooks;
    hooks.on_applied_event = [&](const LookdownState& st, const EventAtom& atom, int parent) {
      ++event_count[rep];
      const auto dense = st.r.dense();
      const double tol = 1e-9 * st.r.max_entry();
      if (!check_ultrametric(dense, st.n(), tol).pass) ++ultra_fail[rep];
      if (atom.kind == AtomKind::potential && parent >= 0 &&
          st.r.at(atom.level, parent) != 0.0)
        ++parent_fail[rep];
    };
    // Clock consistency against an independent trapezoid over probe nodes.
    const int grid = 64;
    std::vector<double> probes(grid);
    for (int k = 0; k < grid; ++k)
      probes[k] = sec.horizon_s * static_cast<double>(k + 1) / grid;
    engine.run(probes, &hooks);
    MassPath mp;
    mp.times_s = {0.0};
    mp.zeta = {cfg.v0};
    for (const Snapshot& s : engine.snapshots()) {
      if (s.stop != StopStatus::none) break;
      mp.times_s.push_back(s.s);
      mp.zeta.push_back(s.zeta);
    }
    time_change(mp);
    double t_probe = 0.0;
    for (const Snapshot& s : engine.snapshots()) {
      if (s.stop != StopStatus::none) break;
      t_probe = s.t;
    }
    clock_gap[rep] = std::abs(mp.times_t.back() - t_probe) /
                     std::max(1e-12, std::abs(t_probe));
  });

  ExperimentResult out;
  int events = 0, ultra = 0, parent = 0;
  double worst_clock = 0.0;
  for (int rep = 0; rep < replicas; ++rep) {
    events += event_count[rep];
    ultra += ultra_fail[rep];
    parent += parent_fail[rep];
    worst_clock = std::max(worst_clock, clock_gap[rep]);
  }
  auto push = [&](const std::string& name, double value, double target, bool pass) {
    StatEntry entry;
    entry.name = name;
    entry.estimate = value;
    entry.se = 0.0;
    entry.target = target;
    entry.pass = pass;
    out.report.stats.push_back(entry);
  };
  push("applied_events", events, events, true);
  push("ultrametric_violations", ultra, 0.0, ultra == 0);
  push("parent_distance_nonzero", parent, 0.0, parent == 0);
  push("clock_relative_gap_max", worst_clock, 0.0, worst_clock <= 2e-2);

  // Determinism: replica 1 run twice must agree bit for bit.
  {
    RunConfig cfg = sec.to_run_config(derive_seed(e.seed, seed_tag::kReplica, 0));
    Engine<TwoTypeModel> a(cfg, TwoTypeModel{sec.b, sec.c});
    Engine<TwoTypeModel> b2(cfg, TwoTypeModel{sec.b, sec.c});
    a.run();
    b2.run();
    const bool same = a.state().zeta == b2.state().zeta &&
                      a.state().types == b2.state().types &&
                      a.state().r.dense() == b2.state().r.dense();
    push("determinism_rerun_identical", same ? 1.0 : 0.0, 1.0, same);
  }
  out.files.push_back(write_text(out_dir, "report.json", out.report.to_json()));
  out.pass = out.report.all_pass();
  return out;
}

}  // namespace

ExperimentResult run_experiment(const Experiment& e, const std::filesystem::path& out_dir,
                                Exec exec) {
  ExperimentResult result;
  if (e.mode == "direct") {
    result = run_direct(e, out_dir, exec);
  } else if (e.mode == "lookdown") {
    const LookdownSection& sec = need_lookdown(e);
    result = run_particle_mode(e, out_dir, exec, TwoTypeModel{sec.b, sec.c}, nullptr);
  } else if (e.mode == "multitype") {
    const MultitypeModel model = resolve_model(e);
    model.validate();
    result = run_particle_mode(e, out_dir, exec, model, &model.type_names);
  } else if (e.mode == "project-compare") {
    result = run_project_compare(e, out_dir, exec);
  } else if (e.mode == "mgtest") {
    result = run_mgtest(e, out_dir, exec);
  } else if (e.mode == "export-tree") {
    result = run_export_tree(e, out_dir, exec);
  } else if (e.mode == "fragments") {
    result = run_fragments(e, out_dir, exec);
  } else if (e.mode == "validate") {
    result = run_validate(e, out_dir, exec);
  } else {
    throw std::invalid_argument("config: unknown mode " + e.mode);
  }
  if (e.mode != "validate")
    result.files.push_back(write_text(out_dir, "report.json", result.report.to_json()));
  return result;
}

}  // namespace ldsim
