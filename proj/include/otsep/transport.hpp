#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otsep/dynamics.hpp"
#include "otsep/measures.hpp"
#include "otsep/simplex.hpp"

namespace otsep {

// Index bookkeeping for the coupled transport LP. Variables are all plan
// entries followed by all ensemble marginals; rows are the plan row-sum
// links, the plan column-sum links, and the per-point superposition
// constraints tying ensemble marginals to the observed measure.
struct LpVariableMap {
  int K = 0;
  int T = 0;
  std::vector<int> n;                        // points per time
  std::vector<std::vector<int>> plan_off;    // [k][t], t in 0..T-2
  std::vector<std::vector<int>> marg_off;    // [k][t], t in 0..T-1
  std::vector<std::vector<int>> rowsum_off;  // [k][t], t in 0..T-2
  std::vector<std::vector<int>> colsum_off;  // [k][t], t in 0..T-2
  std::vector<int> obs_off;                  // [t]
  int num_vars = 0;
  int num_rows = 0;

  int plan_var(int k, int t, int i, int j) const {
    return plan_off[k][t] + i * n[t + 1] + j;
  }
  int marg_var(int k, int t, int i) const { return marg_off[k][t] + i; }
  int rowsum_row(int k, int t, int i) const { return rowsum_off[k][t] + i; }
  int colsum_row(int k, int t, int j) const { return colsum_off[k][t] + j; }
  int obs_row(int t, int i) const { return obs_off[t] + i; }
};

struct LinearProgram {
  std::vector<double> c;
  SparseMatrixCSC E;
  std::vector<double> f;
  LpVariableMap map;
};

// All transport plans and ensemble marginals of one step-1 solve.
struct CoupledPlanSet {
  std::vector<std::vector<Eigen::MatrixXd>> plans;      // [k][t], t in 0..T-2
  std::vector<std::vector<Eigen::VectorXd>> marginals;  // [k][t], t in 0..T-1
  double objective = 0.0;

  int K() const { return static_cast<int>(plans.size()); }
};

// costs[k][t] must have shape n_t x n_{t+1}.
LinearProgram build_coupled_lp(const ObservationSequence& seq,
                               const std::vector<std::vector<CostMatrix>>& costs);

// Cold solve of a coupled LP to a global optimum.
CoupledPlanSet solve_lp(const LinearProgram& lp);

// Step-1 solver that keeps the constraint system and the last optimal basis
// so that repeated solves with updated costs are warm-started.
class CoupledSolver {
 public:
  CoupledSolver(const ObservationSequence& seq, int K);

  CoupledPlanSet solve(const std::vector<std::vector<CostMatrix>>& costs);
  const LinearProgram& lp() const { return lp_; }

  // Plant a starting basis for the next solve (e.g. carried over from another
  // solver on the same sequence). Ignored once a solve has produced its own.
  void seed_basis(std::vector<int> basis);
  const std::vector<int>& last_basis() const { return last_basis_; }

 private:
  CoupledPlanSet solve_pair(const std::vector<std::vector<CostMatrix>>& costs);

  ObservationSequence seq_;
  LinearProgram lp_;
  std::unique_ptr<RevisedSimplex> simplex_;
  std::vector<int> last_basis_;
  std::vector<std::vector<int>> order_;  // per-level sort along the dominant axis

  // T=2 collapses to one classic transport problem; these keep that problem's
  // machinery warm across solves instead of rebuilding it per call.
  std::unique_ptr<RevisedSimplex> pair_simplex_;
  std::vector<double> pair_f_;
};

struct TransportPlan {
  Eigen::MatrixXd plan;
  double objective = 0.0;
};

// Classical two-marginal transport between measures of equal total mass.
TransportPlan solve_classic_ot(const CostMatrix& cost, const DiscreteMeasure& mu,
                               const DiscreteMeasure& nu);

void dump_lp(const LinearProgram& lp, std::ostream& out);

// Largest violation of the plan/marginal/superposition constraints, as a
// fraction of total mass. Used by tests and assertions.
double feasibility_residual(const CoupledPlanSet& plans, const ObservationSequence& seq);

}  // namespace otsep
