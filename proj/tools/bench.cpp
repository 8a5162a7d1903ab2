// Timing comparison between the serial reference kernels and the OpenMP
// entry points: cost-matrix batches, multi-start fitting, and a small
// Monte Carlo sweep. Also asserts that both paths agree bit for bit.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "otsep/bcd.hpp"
#include "otsep/dynamics.hpp"
#include "otsep/eval.hpp"
#include "otsep/parallel.hpp"
#include "otsep/synth.hpp"

using namespace otsep;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-22s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   %s\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads available: %d (OpenMP %s)\n", max_threads(),
              openmp_enabled() ? "on" : "off");

  {
    SimConfig cfg;
    cfg.N = {120, 120, 120};
    cfg.seed = 11;
    const SimInstance inst = sample_instance(cfg);
    const ObservationSequence& seq = inst.seq;
    const std::vector<AffineModel>& models = seq.truth_models;

    std::vector<CostMatrix> ser, par;
    auto batch = [&](std::vector<CostMatrix>& out, bool serial) {
      out.clear();
      for (const AffineModel& m : models)
        for (int t = 0; t + 1 < seq.T(); ++t)
          out.push_back(serial ? cost_matrix_serial(m, seq.measures[t], seq.measures[t + 1])
                               : cost_matrix(m, seq.measures[t], seq.measures[t + 1]));
    };
    const double s = time_ms([&] { batch(ser, true); }, 5);
    const double p = time_ms([&] { batch(par, false); }, 5);
    bool same = ser.size() == par.size();
    for (size_t i = 0; same && i < ser.size(); ++i) same = ser[i] == par[i];
    report("cost-matrix batch", s, p, same);
  }

  {
    SimConfig cfg;
    cfg.N = {6, 6};
    cfg.K = 2;
    cfg.T = 4;
    cfg.seed = 12;
    const SimInstance inst = sample_instance(cfg);
    BcdOptions opts;
    opts.restarts = 8;
    opts.max_iters = 40;
    opts.seed = 5;

    set_max_threads(1);
    SeparationSolution a;
    const double s = time_ms([&] { a = multi_start(inst.seq, 2, ModelKind::kAffine, opts); }, 1);
    set_max_threads(0);
    SeparationSolution b;
    const double p = time_ms([&] { b = multi_start(inst.seq, 2, ModelKind::kAffine, opts); }, 1);
    const bool same = a.objective() == b.objective() && a.labels == b.labels &&
                      a.restart_index == b.restart_index;
    report("multi-start (8 inits)", s, p, same);
  }

  {
    SweepConfig cfg;
    cfg.base.N = {5, 5};
    cfg.base.K = 2;
    cfg.base.T = 3;
    cfg.base.seed = 13;
    cfg.sigma2_grid = {1e-3, 1e-2};
    cfg.trials = 2;
    cfg.bcd.restarts = 3;
    cfg.bcd.max_iters = 30;
    cfg.kmeans_restarts = 20;

    set_max_threads(1);
    std::vector<SweepRecord> a;
    const double s = time_ms([&] { a = monte_carlo_sweep(cfg); }, 1);
    set_max_threads(0);
    std::vector<SweepRecord> b;
    const double p = time_ms([&] { b = monte_carlo_sweep(cfg); }, 1);
    bool same = a.size() == b.size();
    for (size_t i = 0; same && i < a.size(); ++i)
      same = a[i].param_sq_error == b[i].param_sq_error &&
             a[i].classification_accuracy == b[i].classification_accuracy &&
             a[i].objective == b[i].objective;
    report("sweep (12 fits)", s, p, same);
  }
  return 0;
}
