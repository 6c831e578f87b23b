// Benchmark of the OpenMP replica loop and the triple-scan ultrametric
// check against their serial reference paths.  Both must agree bit for bit;
// this tool reports wall times and verifies the agreement on the way.

#include <chrono>
#include <cstdio>
#include <vector>

#include "ldsim/engine.hpp"
#include "ldsim/genealogy.hpp"
#include "ldsim/parallel.hpp"
#include "ldsim/rng.hpp"

using namespace ldsim;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<double> run_ensemble(int replicas, Exec exec) {
  RunConfig cfg;
  cfg.n_levels = 64;
  cfg.b = 0.5;
  cfg.c = 0.5;
  cfg.M = 10.0;
  cfg.horizon_s = 0.5;
  cfg.v0 = 1.0;
  std::vector<double> final_zeta(replicas);
  parallel_for(replicas, exec, [&](std::size_t rep) {
    RunConfig rcfg = cfg;
    rcfg.seed = derive_seed(42, seed_tag::kReplica, rep);
    Engine<TwoTypeModel> engine(rcfg, TwoTypeModel{cfg.b, cfg.c});
    engine.run();
    final_zeta[rep] = engine.state().zeta;
  });
  return final_zeta;
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", max_threads());

  const int replicas = 64;
  double t0 = now_s();
  const auto serial = run_ensemble(replicas, Exec::serial);
  const double t_serial = now_s() - t0;
  t0 = now_s();
  const auto parallel = run_ensemble(replicas, Exec::openmp);
  const double t_parallel = now_s() - t0;
  std::printf("ensemble  %d replicas  serial %.3fs  openmp %.3fs  speedup %.2fx  %s\n",
              replicas, t_serial, t_parallel, t_serial / t_parallel,
              serial == parallel ? "identical" : "MISMATCH");

  const int n = 192;
  std::vector<double> dense(static_cast<std::size_t>(n) * n, 0.0);
  Rng rng(7);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 1.0 + rng.uniform01();
      dense[std::size_t(i) * n + j] = v;
      dense[std::size_t(j) * n + i] = v;
    }
  t0 = now_s();
  UltrametricCheck cs;
  for (int rep = 0; rep < 20; ++rep) cs = check_ultrametric(dense, n, 1e-9, Exec::serial);
  const double u_serial = now_s() - t0;
  t0 = now_s();
  UltrametricCheck cp;
  for (int rep = 0; rep < 20; ++rep) cp = check_ultrametric(dense, n, 1e-9, Exec::openmp);
  const double u_parallel = now_s() - t0;
  const bool same = cs.pass == cp.pass && cs.i == cp.i && cs.j == cp.j && cs.k == cp.k &&
                    cs.violation == cp.violation;
  std::printf("ultrametric scan n=%d x20  serial %.3fs  openmp %.3fs  speedup %.2fx  %s\n", n,
              u_serial, u_parallel, u_serial / u_parallel, same ? "identical" : "MISMATCH");
  return 0;
}
