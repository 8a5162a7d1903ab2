#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otsep/dynamics.hpp"
#include "otsep/measures.hpp"
#include "otsep/transport.hpp"

namespace otsep {

struct BcdOptions {
  int max_iters = 200;
  double rel_tol = 1e-9;
  int restarts = 10;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
};

struct SeparationSolution {
  std::vector<AffineModel> models;
  CoupledPlanSet plans;
  std::vector<double> objective_trace;   // objective after each step-1 solve
  std::vector<std::vector<int>> labels;  // [t][i], ensemble index
  bool converged = false;
  int restart_index = 0;

  double objective() const {
    return objective_trace.empty() ? 0.0 : objective_trace.back();
  }
};

// Alternates the coupled transport solve with the per-ensemble weighted
// least-squares refit until the relative objective decrease drops below
// rel_tol or max_iters is hit. The transport solve is warm-started from the
// previous iteration's basis. Ensembles whose plan mass vanishes keep their
// previous parameters for that iteration.
SeparationSolution bcd_fit(const ObservationSequence& seq, int K, ModelKind kind,
                           const std::vector<AffineModel>& init, const BcdOptions& opts);

// Best of opts.restarts independent runs; initial parameters are drawn
// entrywise i.i.d. normal scaled by opts.init_scale, with per-restart streams
// derived from opts.seed. Restarts may execute concurrently; the selection
// (smallest final objective, ties to the smallest restart index) and every
// returned value are independent of the thread count.
SeparationSolution multi_start(const ObservationSequence& seq, int K, ModelKind kind,
                               const BcdOptions& opts);

// Hard assignment per (t, point): the ensemble holding the largest marginal
// share, ties broken toward the smaller index.
std::vector<std::vector<int>> extract_labels(const CoupledPlanSet& plans);

void save_solution(const SeparationSolution& sol, const std::string& path,
                   bool include_plans = false);
SeparationSolution load_solution(const std::string& path);

}  // namespace otsep
