// Release gate: one line per criterion, exit code = number of failures.
// The default run keeps the Monte Carlo criterion to a short smoke sweep;
// pass --full for the long protocol.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "otsep/bcd.hpp"
#include "otsep/dynamics.hpp"
#include "otsep/error.hpp"
#include "otsep/eval.hpp"
#include "otsep/measures.hpp"
#include "otsep/synth.hpp"
#include "otsep/transport.hpp"
#include "test_support.hpp"

using namespace otsep;
using namespace otsep::test;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Criterion {
  bool pass = true;
  std::ostringstream detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

// 1. The shipped two-mixture demo recovers the crossing shifts quickly.
Criterion mixture_demo() {
  Criterion c;
  const std::string prefix = temp_path("acc_gmm");
  const auto t0 = Clock::now();
  const CommandResult res = run_cli("example-gmm --out-prefix " + prefix);
  const double elapsed = seconds_since(t0);
  c.expect(res.exit_code == 0, "exit code " + std::to_string(res.exit_code));
  if (!c.pass) return c;

  const SeparationSolution sol = load_solution(prefix + "_solution.json");
  const ObservationSequence seq = load_dataset(prefix + "_data.csv");
  std::vector<double> shifts = {sol.models[0].b[0], sol.models[1].b[0]};
  std::sort(shifts.begin(), shifts.end());
  c.expect(std::abs(shifts[0] + 4.0) <= 0.05 && std::abs(shifts[1] - 4.0) <= 0.05,
           "shifts " + fmt(shifts[0]) + ", " + fmt(shifts[1]));
  const double bound = 1e-3 * seq.measures[0].total_mass() * 16.0;
  c.expect(sol.objective() <= bound,
           "objective " + fmt(sol.objective()) + " above " + fmt(bound));
  c.expect(elapsed <= 60.0, fmt(elapsed) + "s over the 60s budget");
  return c;
}

// 2. Seeded from the truth on clean data, one descent pass is exact.
Criterion truth_seeded_recovery() {
  Criterion c;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20 && c.pass; ++seed) {
    SimConfig cfg;
    cfg.sigma2 = 0.0;
    cfg.seed = seed;
    const SimInstance inst = sample_instance(cfg);
    const auto t0 = Clock::now();
    const SeparationSolution sol =
        bcd_fit(inst.seq, 3, ModelKind::kAffine, inst.seq.truth_models, BcdOptions{});
    worst = std::max(worst, seconds_since(t0));
    c.expect(sol.objective_trace.front() <= 1e-8,
             "seed " + std::to_string(seed) + ": first objective " +
                 fmt(sol.objective_trace.front()));
    const PermMatch match = match_permutation(sol.models, inst.seq.truth_models);
    const double acc =
        classification_accuracy(sol.labels, inst.seq.truth_labels, match.permutation);
    c.expect(acc == 1.0, "seed " + std::to_string(seed) + ": accuracy " + fmt(acc));
  }
  c.expect(worst <= 5.0, "slowest instance " + fmt(worst) + "s");
  if (c.pass) c.detail << "slowest instance " << fmt(worst) << "s";
  return c;
}

// 3. Objective traces never increase, whatever the start.
Criterion monotone_traces() {
  Criterion c;
  Rng rng(303);
  const double noise[] = {0.0, 1e-3, 1e-1};
  for (int trial = 0; trial < 50 && c.pass; ++trial) {
    SimConfig cfg;
    cfg.K = 1 + static_cast<int>(rng.below(3));
    cfg.N.assign(cfg.K, 0);
    for (int& n : cfg.N) n = 3 + static_cast<int>(rng.below(4));
    cfg.T = 3 + static_cast<int>(rng.below(3));
    cfg.sigma2 = noise[rng.below(3)];
    cfg.seed = 1000 + trial;
    const SimInstance inst = sample_instance(cfg);

    BcdOptions opts;
    opts.restarts = 1;
    opts.max_iters = 40;
    opts.rel_tol = 0.0;
    opts.seed = trial;
    const ModelKind kind = trial % 2 ? ModelKind::kShift : ModelKind::kAffine;
    const SeparationSolution sol = multi_start(inst.seq, cfg.K, kind, opts);
    const std::vector<double>& trace = sol.objective_trace;
    const double slack = 1e-10 * std::max(trace.front(), 1e-18);
    for (size_t i = 0; i + 1 < trace.size(); ++i)
      c.expect(trace[i + 1] <= trace[i] + slack,
               "trial " + std::to_string(trial) + ": rose at step " + std::to_string(i));
  }
  return c;
}

// 4. Classic transport with unit masses is the assignment optimum.
Criterion assignment_agreement() {
  Criterion c;
  Rng rng(404);
  for (int trial = 0; trial < 100 && c.pass; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const int d = 1 + static_cast<int>(rng.below(3));
    const DiscreteMeasure mu = unit_mass_measure(rng, n, d);
    const DiscreteMeasure nu = unit_mass_measure(rng, n, d);
    CostMatrix cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = 5.0 * rng.uniform01();
    const double lp = solve_classic_ot(cost, mu, nu).objective;
    const double bf = assignment_brute_force(cost);
    c.expect(std::abs(lp - bf) <= 1e-9 * std::max(1.0, std::abs(bf)),
             "trial " + std::to_string(trial) + ": " + fmt(lp) + " vs " + fmt(bf));
  }
  return c;
}

// 5. With two snapshots the coupled program collapses to classic transport
//    under the pointwise cheapest ensemble.
Criterion two_snapshot_collapse() {
  Criterion c;
  Rng rng(505);
  for (int trial = 0; trial < 50 && c.pass; ++trial) {
    const int K = 2 + static_cast<int>(rng.below(2));
    const int d = 1 + static_cast<int>(rng.below(2));
    const int n0 = 1 + static_cast<int>(rng.below(6));
    const int n1 = 1 + static_cast<int>(rng.below(6));
    const ObservationSequence seq = random_sequence(rng, {n0, n1}, d);
    std::vector<AffineModel> models;
    for (int k = 0; k < K; ++k)
      models.push_back(
          random_model(rng, d, rng.below(2) ? ModelKind::kAffine : ModelKind::kShift));
    const auto costs = costs_for(seq, models);
    CostMatrix cheapest = costs[0][0];
    for (int k = 1; k < K; ++k) cheapest = cheapest.cwiseMin(costs[k][0]);
    const double coupled = solve_lp(build_coupled_lp(seq, costs)).objective;
    const double classic =
        solve_classic_ot(cheapest, seq.measures[0], seq.measures[1]).objective;
    c.expect(std::abs(coupled - classic) <= 1e-9 * std::max(1.0, std::abs(classic)),
             "trial " + std::to_string(trial) + ": " + fmt(coupled) + " vs " + fmt(classic));
  }
  return c;
}

// 6. The weighted refit agrees with the normal equations, and is exact on
//    consistent data.
Criterion refit_agreement() {
  Criterion c;
  Rng rng(606);
  for (int trial = 0; trial < 100 && c.pass; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(3));
    const int n = 8 + static_cast<int>(rng.below(8));
    WeightedPairs pairs;
    for (int i = 0; i < n; ++i) {
      Point x(d), y(d);
      for (int j = 0; j < d; ++j) {
        x[j] = 4.0 * rng.uniform01() - 2.0;
        y[j] = 4.0 * rng.uniform01() - 2.0;
      }
      pairs.push_back({x, y, 0.1 + rng.uniform01()});
    }
    const Eigen::VectorXd got = fit_weighted(pairs, ModelKind::kAffine).parameter_vector();
    const Eigen::VectorXd want = normal_equations_oracle(pairs).parameter_vector();
    c.expect((got - want).norm() <= 1e-9 * std::max(1.0, want.norm()),
             "trial " + std::to_string(trial) + ": drift " + fmt((got - want).norm()));
  }
  for (int trial = 0; trial < 20 && c.pass; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(3));
    const ModelKind kind = trial % 2 ? ModelKind::kShift : ModelKind::kAffine;
    const AffineModel truth = random_model(rng, d, kind);
    WeightedPairs pairs;
    for (int i = 0; i < d + 4; ++i) {
      Point x(d);
      for (int j = 0; j < d; ++j) x[j] = 4.0 * rng.uniform01() - 2.0;
      pairs.push_back({x, apply(truth, x), 0.1 + rng.uniform01()});
    }
    const Eigen::VectorXd got = fit_weighted(pairs, kind).parameter_vector();
    const Eigen::VectorXd want = truth.parameter_vector();
    c.expect((got - want).norm() <= 1e-10 * std::max(1.0, want.norm()),
             "clean trial " + std::to_string(trial) + ": drift " + fmt((got - want).norm()));
  }
  return c;
}

const SweepAggregate& find_row(const std::vector<SweepAggregate>& rows, double sigma2,
                               SweepMethod m) {
  for (const SweepAggregate& r : rows)
    if (r.sigma2 == sigma2 && r.method == m) return r;
  throw ValidationError("aggregate row missing");
}

// 7. The Monte Carlo sweep: the blind method tracks the oracle at low noise
//    and everyone degrades monotonically.
Criterion sweep_protocol(bool full) {
  Criterion c;
  SweepConfig cfg;
  cfg.sigma2_grid = {1e-5, 1e-3, 1e-1};
  cfg.trials = full ? 50 : 5;
  const double budget = full ? 7200.0 : 600.0;

  const auto t0 = Clock::now();
  const std::vector<SweepAggregate> rows = aggregate_sweep(monte_carlo_sweep(cfg));
  const double elapsed = seconds_since(t0);

  for (double s2 : {1e-5, 1e-3}) {
    const SweepAggregate& prop = find_row(rows, s2, SweepMethod::kProposed);
    const SweepAggregate& orac = find_row(rows, s2, SweepMethod::kOracle);
    c.expect(prop.err_median <= 10.0 * orac.err_median,
             "sigma2=" + fmt(s2) + ": median error " + fmt(prop.err_median) +
                 " vs oracle " + fmt(orac.err_median));
    c.expect(prop.acc_median >= 0.9,
             "sigma2=" + fmt(s2) + ": median accuracy " + fmt(prop.acc_median));
  }
  for (SweepMethod m :
       {SweepMethod::kProposed, SweepMethod::kOracle, SweepMethod::kSemiOracle}) {
    double prev = -1.0;
    for (double s2 : cfg.sigma2_grid) {
      const double med = find_row(rows, s2, m).err_median;
      c.expect(med >= prev, std::string(to_string(m)) + " error not monotone at sigma2=" +
                                fmt(s2));
      prev = med;
    }
  }
  c.expect(elapsed <= budget, fmt(elapsed) + "s over the " + fmt(budget) + "s budget");
  if (c.pass)
    c.detail << (full ? "full" : "smoke") << " sweep, " << fmt(elapsed) << "s";
  return c;
}

// 8. On clean data the reference estimators are exact.
Criterion reference_estimators_exact() {
  Criterion c;
  for (std::uint64_t seed = 101; seed <= 105 && c.pass; ++seed) {
    SimConfig cfg;
    cfg.sigma2 = 0.0;
    cfg.seed = seed;
    const TrajectorySet trajs = sample_instance(cfg).trajectories;

    const double oracle_err =
        match_permutation(oracle_fit(trajs), trajs.true_models).param_sq_error;
    c.expect(oracle_err <= 1e-18,
             "seed " + std::to_string(seed) + ": oracle error " + fmt(oracle_err));

    const SemiOracleResult semi = semi_oracle_fit(trajs, 3);
    const double semi_err =
        match_permutation(semi.models, trajs.true_models).param_sq_error;
    c.expect(semi_err <= 1e-18,
             "seed " + std::to_string(seed) + ": semi-oracle error " + fmt(semi_err));
    bool grouped = true;
    for (int p = 0; p < trajs.size(); ++p)
      for (int q = p + 1; q < trajs.size(); ++q)
        if ((semi.labels[p] == semi.labels[q]) != (trajs.labels[p] == trajs.labels[q]))
          grouped = false;
    c.expect(grouped, "seed " + std::to_string(seed) + ": clustering differs");
  }
  return c;
}

// 9. Every command is reproducible file-for-file; only sweep timings differ.
Criterion command_determinism() {
  Criterion c;
  const std::string data1 = temp_path("det_a.csv"), truth1 = temp_path("det_a.truth.json");
  const std::string data2 = temp_path("det_b.csv"), truth2 = temp_path("det_b.truth.json");
  const std::string sim = "simulate --seed 31 --sizes 3,4 --T 3 ";
  c.expect(run_cli(sim + "-o " + data1 + " --truth-out " + truth1).exit_code == 0 &&
               run_cli(sim + "-o " + data2 + " --truth-out " + truth2).exit_code == 0,
           "simulate failed");
  if (!c.pass) return c;
  c.expect(read_file(data1) == read_file(data2) && read_file(truth1) == read_file(truth2),
           "simulate outputs differ");

  const std::string sol1 = temp_path("det_sol_a.json"), sol2 = temp_path("det_sol_b.json");
  const std::string fit = "fit -i " + data1 + " --k 2 --restarts 2 --max-iters 30 ";
  c.expect(run_cli(fit + "-o " + sol1).exit_code == 0 &&
               run_cli(fit + "-o " + sol2).exit_code == 0,
           "fit failed");
  if (!c.pass) return c;
  c.expect(read_file(sol1) == read_file(sol2), "fit outputs differ");

  const std::string eva =
      "evaluate --solution " + sol1 + " --data " + data1 + " --truth " + truth1;
  const CommandResult e1 = run_cli(eva);
  const CommandResult e2 = run_cli(eva);
  c.expect(e1.exit_code == 0 && e1.output == e2.output, "evaluate outputs differ");

  const std::string sw1 = temp_path("det_sweep_a.csv"), ag1 = temp_path("det_agg_a.csv");
  const std::string sw2 = temp_path("det_sweep_b.csv"), ag2 = temp_path("det_agg_b.csv");
  const std::string sweep =
      "sweep --seed 7 --sizes 3,3 --T 3 --trials 1 --sigma2-grid 1e-3 "
      "--methods oracle,semi_oracle ";
  c.expect(run_cli(sweep + "-o " + sw1 + " --aggregate-out " + ag1).exit_code == 0 &&
               run_cli(sweep + "-o " + sw2 + " --aggregate-out " + ag2).exit_code == 0,
           "sweep failed");
  if (!c.pass) return c;
  auto strip_wall = [](const std::string& csv) {
    std::string out;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  };
  c.expect(strip_wall(read_file(sw1)) == strip_wall(read_file(sw2)),
           "sweep records differ");
  c.expect(read_file(ag1) == read_file(ag2), "sweep aggregates differ");

  const std::string g1 = temp_path("det_gmm_a"), g2 = temp_path("det_gmm_b");
  const std::string gmm = "example-gmm --k 2 --grid-points 30 --restarts 3 --out-prefix ";
  c.expect(run_cli(gmm + g1).exit_code == 0 && run_cli(gmm + g2).exit_code == 0,
           "example-gmm failed");
  if (!c.pass) return c;
  c.expect(read_file(g1 + "_data.csv") == read_file(g2 + "_data.csv") &&
               read_file(g1 + "_solution.json") == read_file(g2 + "_solution.json"),
           "example-gmm outputs differ");
  return c;
}

void report(int index, const std::string& name, const Criterion& c, int& failures) {
  std::cout << (c.pass ? "[PASS]" : "[FAIL]") << " criterion " << index << ": " << name;
  const std::string detail = c.detail.str();
  if (!detail.empty()) std::cout << " — " << detail;
  std::cout << std::endl;
  if (!c.pass) ++failures;
}

Criterion guarded(Criterion (*fn)()) {
  try {
    return fn();
  } catch (const std::exception& e) {
    Criterion c;
    c.expect(false, std::string("exception: ") + e.what());
    return c;
  }
}

}  // namespace

int main(int argc, char** argv) {
  bool full = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--full") == 0) {
      full = true;
    } else {
      std::cerr << "usage: " << argv[0] << " [--full]\n";
      return 64;
    }
  }

  int failures = 0;
  report(1, "mixture demo recovers the crossing shifts", guarded(mixture_demo), failures);
  report(2, "truth-seeded descent is immediately exact", guarded(truth_seeded_recovery),
         failures);
  report(3, "objective traces never increase", guarded(monotone_traces), failures);
  report(4, "unit-mass transport matches brute-force assignment",
         guarded(assignment_agreement), failures);
  report(5, "two-snapshot problems collapse to classic transport",
         guarded(two_snapshot_collapse), failures);
  report(6, "weighted refit matches the normal equations", guarded(refit_agreement),
         failures);
  {
    Criterion c;
    try {
      c = sweep_protocol(full);
    } catch (const std::exception& e) {
      c = Criterion();
      c.expect(false, std::string("exception: ") + e.what());
    }
    report(7, "monte carlo sweep tracks the oracle", c, failures);
  }
  report(8, "reference estimators are exact on clean data",
         guarded(reference_estimators_exact), failures);
  report(9, "commands are reproducible", guarded(command_determinism), failures);

  if (failures == 0)
    std::cout << "all criteria passed" << std::endl;
  else
    std::cout << failures << " criteria failed" << std::endl;
  return failures;
}
