#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "otsep/bcd.hpp"
#include "otsep/eval.hpp"
#include "otsep/measures.hpp"

namespace otsep {

struct SimConfig {
  int d = 2;
  int K = 3;
  std::vector<int> N = {10, 12, 15};  // particles per ensemble
  int T = 7;
  double sigma2 = 1e-3;               // state-noise variance per coordinate
  double dynamics_scale = 1.0;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
};

struct GmmConfig {
  double p = 0.4;
  double p_prime = 0.6;
  double a = 0.0;
  double a_prime = 4.0;
  double sigma = 0.5;
  double sigma_prime = 0.3;
  double grid_lo = -3.0;
  double grid_hi = 7.0;
  int grid_points = 200;
};

struct SimInstance {
  ObservationSequence seq;   // truth labels, ids and models populated
  TrajectorySet trajectories;
};

// Draws K random linear systems and evolves Gaussian initial states under
// white state noise. Unit masses; deterministic given cfg.seed.
SimInstance sample_instance(const SimConfig& cfg);

// Two-snapshot observation of a pair of Gaussian mixtures whose modes trade
// places, discretized on a regular grid (cell centers, density times cell
// width) and renormalized to exactly equal totals. The matched shift models
// are attached as ground truth.
ObservationSequence gmm_example(const GmmConfig& cfg);

enum class SweepMethod { kProposed, kOracle, kSemiOracle };
const char* to_string(SweepMethod m);
SweepMethod sweep_method_from_string(const std::string& s);

struct SweepRecord {
  double sigma2 = 0.0;
  int trial = 0;
  SweepMethod method = SweepMethod::kProposed;
  double param_sq_error = 0.0;
  double classification_accuracy = 0.0;
  double objective = 0.0;
  double wall_ms = 0.0;
};

struct SweepConfig {
  SimConfig base;
  std::vector<double> sigma2_grid = default_sigma2_grid();
  int trials = 500;
  std::vector<SweepMethod> methods = {SweepMethod::kProposed, SweepMethod::kOracle,
                                      SweepMethod::kSemiOracle};
  BcdOptions bcd;                     // used by the proposed method
  int kmeans_restarts = 100;          // used by the semi-oracle

  static std::vector<double> default_sigma2_grid();
};

// One record per (sigma2, trial, method). Per-trial seeds derive from
// (base.seed, sigma2 index, trial index), so records are independent of the
// method subset, of row evaluation order, and of parallel execution.
// Everything except wall_ms is deterministic.
std::vector<SweepRecord> monte_carlo_sweep(const SweepConfig& cfg);

void write_sweep_csv(const std::vector<SweepRecord>& records, std::ostream& out);
std::vector<SweepRecord> read_sweep_csv(std::istream& in);

struct SweepAggregate {
  double sigma2 = 0.0;
  SweepMethod method = SweepMethod::kProposed;
  double err_median = 0.0, err_p5 = 0.0, err_p95 = 0.0;
  double acc_median = 0.0, acc_p5 = 0.0, acc_p95 = 0.0;
};

std::vector<SweepAggregate> aggregate_sweep(const std::vector<SweepRecord>& records);
void write_aggregate_csv(const std::vector<SweepAggregate>& rows, std::ostream& out);

// Median / percentiles with linear interpolation; q in [0,1].
double quantile(std::vector<double> values, double q);

}  // namespace otsep
