#include "otsep/transport.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "otsep/error.hpp"
#include "otsep/rng.hpp"

namespace otsep {

namespace {

const char* status_name(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterLimit: return "iteration limit";
    case LpStatus::kSingularBasis: return "singular basis";
  }
  return "unknown";
}

[[noreturn]] void throw_lp_failure(const char* what, const LpSolution& sol) {
  std::string msg = std::string(what) + " (" + status_name(sol.status) + ")";
  if (!sol.diagnostics.empty()) msg += ": " + sol.diagnostics;
  throw SolverError(msg);
}

// Feasibility slack for near-balanced inputs: the constraint system forces
// consecutive totals to agree, so admit the imbalance the data carries.
SimplexConfig solver_config(const std::vector<double>& f, double slack) {
  SimplexConfig cfg;
  double fmax = 0.0;
  for (double v : f) fmax = std::max(fmax, std::abs(v));
  cfg.feas_tol = 1e-9 + 2.0 * slack / std::max(1.0, fmax);
  return cfg;
}

double coupled_slack(const LinearProgram& lp) {
  const LpVariableMap& map = lp.map;
  int obs_start = map.num_rows;
  for (int t = 0; t < map.T; ++t) obs_start -= map.n[t];
  double s0 = 0.0, slack = 0.0;
  int row = obs_start;
  for (int t = 0; t < map.T; ++t) {
    double st = 0.0;
    for (int i = 0; i < map.n[t]; ++i) st += lp.f[row++];
    if (t == 0)
      s0 = st;
    else
      slack += std::abs(st - s0);
  }
  return slack;
}

CoupledPlanSet extract_plan_set(const LinearProgram& lp, const LpSolution& sol) {
  const LpVariableMap& map = lp.map;
  CoupledPlanSet out;
  out.objective = sol.objective;
  out.plans.resize(map.K);
  out.marginals.resize(map.K);
  for (int k = 0; k < map.K; ++k) {
    out.plans[k].resize(map.T - 1);
    out.marginals[k].resize(map.T);
    for (int t = 0; t + 1 < map.T; ++t) {
      Eigen::MatrixXd& p = out.plans[k][t];
      p.resize(map.n[t], map.n[t + 1]);
      for (int i = 0; i < map.n[t]; ++i)
        for (int j = 0; j < map.n[t + 1]; ++j) p(i, j) = sol.x[map.plan_var(k, t, i, j)];
    }
    for (int t = 0; t < map.T; ++t) {
      Eigen::VectorXd& mu = out.marginals[k][t];
      mu.resize(map.n[t]);
      for (int i = 0; i < map.n[t]; ++i) mu[i] = sol.x[map.marg_var(k, t, i)];
    }
  }
  return out;
}

std::vector<double> assemble_costs(const LpVariableMap& map,
                                   const std::vector<std::vector<CostMatrix>>& costs) {
  if (static_cast<int>(costs.size()) != map.K)
    throw ValidationError("cost matrices cover " + std::to_string(costs.size()) +
                          " ensembles, expected " + std::to_string(map.K));
  std::vector<double> c(map.num_vars, 0.0);
  for (int k = 0; k < map.K; ++k) {
    if (static_cast<int>(costs[k].size()) != map.T - 1)
      throw ValidationError("ensemble " + std::to_string(k) + " has " +
                            std::to_string(costs[k].size()) + " cost matrices, expected " +
                            std::to_string(map.T - 1));
    for (int t = 0; t + 1 < map.T; ++t) {
      const CostMatrix& C = costs[k][t];
      if (C.rows() != map.n[t] || C.cols() != map.n[t + 1])
        throw ValidationError("cost matrix shape mismatch for ensemble " + std::to_string(k) +
                              " at step " + std::to_string(t + 1));
      if (!C.allFinite())
        throw ValidationError("non-finite cost entry for ensemble " + std::to_string(k) +
                              " at step " + std::to_string(t + 1));
      for (int i = 0; i < map.n[t]; ++i)
        for (int j = 0; j < map.n[t + 1]; ++j) c[map.plan_var(k, t, i, j)] = C(i, j);
    }
  }
  return c;
}

// Northwest-corner spanning tree for a balanced transport problem; n1+n2-1 edges.
std::vector<std::pair<int, int>> nw_tree(const std::vector<double>& a,
                                         const std::vector<double>& b) {
  const int n1 = static_cast<int>(a.size());
  const int n2 = static_cast<int>(b.size());
  std::vector<std::pair<int, int>> edges;
  edges.reserve(n1 + n2 - 1);
  int i = 0, j = 0;
  double s = a[0], t = b[0];
  while (!(i == n1 - 1 && j == n2 - 1)) {
    edges.emplace_back(i, j);
    const double move = std::min(s, t);
    s -= move;
    t -= move;
    bool advance_i;
    if (i == n1 - 1)
      advance_i = false;
    else if (j == n2 - 1)
      advance_i = true;
    else
      advance_i = (s <= t);
    if (advance_i) {
      ++i;
      s = a[i];
    } else {
      ++j;
      t = b[j];
    }
  }
  edges.emplace_back(n1 - 1, n2 - 1);
  return edges;
}

// Indices of each snapshot sorted along the dominant principal axis of the
// pooled cloud. Crash trees built in this order start as near-monotone
// matchings, which cuts the simplex path on geometric costs substantially.
std::vector<std::vector<int>> level_orderings(const ObservationSequence& seq) {
  const int T = seq.T();
  const int d = seq.measures[0].dim();
  if (d == 0) return {};
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  double total = 0.0;
  for (const auto& m : seq.measures)
    for (int i = 0; i < m.size(); ++i) {
      mean += m.masses[i] * m.points[i];
      total += m.masses[i];
    }
  if (total <= 0.0) return {};
  mean /= total;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& m : seq.measures)
    for (int i = 0; i < m.size(); ++i) {
      const Eigen::VectorXd u = m.points[i] - mean;
      cov += m.masses[i] * u * u.transpose();
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd axis = es.eigenvectors().col(d - 1);
  std::vector<std::vector<int>> order(T);
  for (int t = 0; t < T; ++t) {
    const auto& m = seq.measures[t];
    std::vector<double> key(m.size());
    for (int i = 0; i < m.size(); ++i) key[i] = axis.dot(m.points[i]);
    order[t].resize(m.size());
    std::iota(order[t].begin(), order[t].end(), 0);
    std::stable_sort(order[t].begin(), order[t].end(),
                     [&](int a, int b) { return key[a] < key[b]; });
  }
  return order;
}

// Feasible starting basis that skips phase 1 entirely: ensemble 0 carries all
// the observed mass along a northwest-corner tree per step, the others sit at
// zero on matching chains.  `order` optionally relabels each level (a sorted
// order makes the trees near-monotone).  The K-1 zero ensembles need square
// steps; for ragged snapshot sizes we return empty and the caller solves cold.
std::vector<int> coupled_crash_basis(const LinearProgram& lp,
                                     const std::vector<std::vector<int>>& order = {}) {
  const LpVariableMap& map = lp.map;
  if (map.K > 1)
    for (int t = 0; t + 1 < map.T; ++t)
      if (map.n[t] != map.n[t + 1]) return {};
  const auto ord = [&](int t, int i) { return order.empty() ? i : order[t][i]; };
  std::vector<int> basis;
  basis.reserve(map.num_rows);
  for (int t = 0; t < map.T; ++t)
    for (int i = 0; i < map.n[t]; ++i) basis.push_back(map.marg_var(0, t, i));
  for (int t = 0; t + 1 < map.T; ++t) {
    std::vector<double> a(map.n[t]), b(map.n[t + 1]);
    for (int i = 0; i < map.n[t]; ++i) a[i] = lp.f[map.obs_row(t, ord(t, i))];
    for (int j = 0; j < map.n[t + 1]; ++j) b[j] = lp.f[map.obs_row(t + 1, ord(t + 1, j))];
    for (auto [i, j] : nw_tree(a, b))
      basis.push_back(map.plan_var(0, t, ord(t, i), ord(t + 1, j)));
  }
  for (int k = 1; k < map.K; ++k)
    for (int t = 0; t + 1 < map.T; ++t)
      for (int i = 0; i < map.n[t]; ++i) {
        basis.push_back(map.marg_var(k, t, i));
        basis.push_back(map.plan_var(k, t, ord(t, i), ord(t + 1, i)));
      }
  // One row per step is linearly dependent on the rest; pin an artificial there.
  for (int t = 0; t + 1 < map.T; ++t)
    basis.push_back(map.num_vars + map.rowsum_row(0, t, 0));
  if (static_cast<int>(basis.size()) != map.num_rows) return {};
  return basis;
}

// The crash vertex is heavily degenerate: every zero ensemble sits at exactly
// zero, so phase 2 opens on a long plateau of zero-ratio pivots. Pre-solving a
// copy whose masses carry tiny zero-sum jitter breaks the ties; the terminal
// basis then warm-starts the true masses, typically finishing in zero pivots.
// Jitter is a few percent of the smallest mass: large enough to split ratios,
// small enough that the jittered optimum stays primal feasible for the truth.
std::vector<int> degeneracy_broken_basis(const LinearProgram& lp,
                                         const std::vector<int>& crash) {
  const LpVariableMap& map = lp.map;
  double fmin = std::numeric_limits<double>::infinity();
  for (double v : lp.f)
    if (v > 0.0 && v < fmin) fmin = v;
  if (!std::isfinite(fmin)) return crash;
  std::vector<double> fp = lp.f;
  Rng rng(1905);
  for (int t = 0; t < map.T; ++t) {
    const int n = map.n[t];
    std::vector<double> u(n);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      u[i] = rng.uniform01();
      mean += u[i];
    }
    mean /= n;
    for (int i = 0; i < n; ++i) fp[map.obs_row(t, i)] += 0.05 * fmin * (u[i] - mean);
  }
  RevisedSimplex jittered(lp.E, fp, solver_config(fp, coupled_slack(lp)));
  const LpSolution sol = jittered.solve_from(lp.c, crash);
  return sol.status == LpStatus::kOptimal ? sol.basis : crash;
}

}  // namespace

LinearProgram build_coupled_lp(const ObservationSequence& seq,
                               const std::vector<std::vector<CostMatrix>>& costs) {
  validate(seq);
  const int T = seq.T();
  const int K = static_cast<int>(costs.size());
  if (K < 1) throw ValidationError("need at least one ensemble");

  LpVariableMap map;
  map.K = K;
  map.T = T;
  map.n.resize(T);
  for (int t = 0; t < T; ++t) map.n[t] = seq.measures[t].size();

  int off = 0;
  map.plan_off.assign(K, std::vector<int>(T - 1, 0));
  for (int k = 0; k < K; ++k)
    for (int t = 0; t + 1 < T; ++t) {
      map.plan_off[k][t] = off;
      off += map.n[t] * map.n[t + 1];
    }
  map.marg_off.assign(K, std::vector<int>(T, 0));
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) {
      map.marg_off[k][t] = off;
      off += map.n[t];
    }
  map.num_vars = off;

  // rows: plan row sums, plan column sums, then superposition per (t, i)
  map.rowsum_off.assign(K, std::vector<int>(T - 1, 0));
  map.colsum_off.assign(K, std::vector<int>(T - 1, 0));
  map.obs_off.assign(T, 0);
  int row = 0;
  for (int k = 0; k < K; ++k)
    for (int t = 0; t + 1 < T; ++t) {
      map.rowsum_off[k][t] = row;
      row += map.n[t];
    }
  for (int k = 0; k < K; ++k)
    for (int t = 0; t + 1 < T; ++t) {
      map.colsum_off[k][t] = row;
      row += map.n[t + 1];
    }
  for (int t = 0; t < T; ++t) {
    map.obs_off[t] = row;
    row += map.n[t];
  }
  map.num_rows = row;

  std::vector<int> ti, tj;
  std::vector<double> tv;
  const size_t nnz_guess = 2u * (map.num_vars - K * map.n[0]);
  ti.reserve(nnz_guess);
  tj.reserve(nnz_guess);
  tv.reserve(nnz_guess);
  auto push = [&](int i, int j, double v) {
    ti.push_back(i);
    tj.push_back(j);
    tv.push_back(v);
  };
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t + 1 < T; ++t)
      for (int i = 0; i < map.n[t]; ++i)
        for (int j = 0; j < map.n[t + 1]; ++j) {
          const int var = map.plan_var(k, t, i, j);
          push(map.rowsum_row(k, t, i), var, 1.0);
          push(map.colsum_row(k, t, j), var, 1.0);
        }
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < map.n[t]; ++i) {
        const int var = map.marg_var(k, t, i);
        if (t + 1 < T) push(map.rowsum_row(k, t, i), var, -1.0);
        if (t >= 1) push(map.colsum_row(k, t - 1, i), var, -1.0);
        push(map.obs_row(t, i), var, 1.0);
      }
  }

  LinearProgram lp;
  lp.map = map;
  lp.c = assemble_costs(map, costs);
  lp.E = SparseMatrixCSC::from_triplets(map.num_rows, map.num_vars, ti, tj, tv);
  lp.f.assign(map.num_rows, 0.0);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < map.n[t]; ++i) lp.f[map.obs_row(t, i)] = seq.measures[t].masses[i];
  return lp;
}

CoupledPlanSet solve_lp(const LinearProgram& lp) {
  RevisedSimplex simplex(lp.E, lp.f, solver_config(lp.f, coupled_slack(lp)));
  const std::vector<int> crash = coupled_crash_basis(lp);
  LpSolution sol = crash.empty() ? simplex.solve(lp.c) : simplex.solve_from(lp.c, crash);
  if (sol.status != LpStatus::kOptimal) throw_lp_failure("coupled transport solve failed", sol);
  return extract_plan_set(lp, sol);
}

CoupledSolver::CoupledSolver(const ObservationSequence& seq, int K) : seq_(seq) {
  if (K < 1) throw ValidationError("need at least one ensemble");
  std::vector<std::vector<CostMatrix>> zero(K);
  for (int k = 0; k < K; ++k) {
    zero[k].resize(seq.T() - 1);
    for (int t = 0; t + 1 < seq.T(); ++t)
      zero[k][t] = CostMatrix::Zero(seq.measures[t].size(), seq.measures[t + 1].size());
  }
  lp_ = build_coupled_lp(seq, zero);
  order_ = level_orderings(seq_);
  if (seq.T() == 2) {
    const int n0 = lp_.map.n[0];
    const int n1 = lp_.map.n[1];
    std::vector<int> ti, tj;
    std::vector<double> tv;
    ti.reserve(2u * n0 * n1);
    tj.reserve(2u * n0 * n1);
    tv.reserve(2u * n0 * n1);
    for (int i = 0; i < n0; ++i)
      for (int j = 0; j < n1; ++j) {
        const int var = i * n1 + j;
        ti.push_back(i);
        tj.push_back(var);
        tv.push_back(1.0);
        ti.push_back(n0 + j);
        tj.push_back(var);
        tv.push_back(1.0);
      }
    pair_f_.resize(n0 + n1);
    for (int i = 0; i < n0; ++i) pair_f_[i] = seq.measures[0].masses[i];
    for (int j = 0; j < n1; ++j) pair_f_[n0 + j] = seq.measures[1].masses[j];
    const double gap =
        std::abs(seq.measures[0].total_mass() - seq.measures[1].total_mass());
    pair_simplex_ = std::make_unique<RevisedSimplex>(
        SparseMatrixCSC::from_triplets(n0 + n1, n0 * n1, ti, tj, tv), pair_f_,
        solver_config(pair_f_, gap));
  } else {
    simplex_ = std::make_unique<RevisedSimplex>(lp_.E, lp_.f,
                                                solver_config(lp_.f, coupled_slack(lp_)));
  }
}

void CoupledSolver::seed_basis(std::vector<int> basis) {
  // The pair path's own crash start is already near-monotone; a basis tuned to
  // someone else's costs tends to sit further from the new optimum than that.
  if (pair_simplex_) return;
  if (last_basis_.empty()) last_basis_ = std::move(basis);
}

// Two snapshots collapse exactly: minimizing over plans and marginals jointly
// equals a single transport problem under the pointwise minimum of the
// ensemble costs, with the plan split back by whichever ensemble attains it.
CoupledPlanSet CoupledSolver::solve_pair(const std::vector<std::vector<CostMatrix>>& costs) {
  const int K = lp_.map.K;
  const int n0 = lp_.map.n[0];
  const int n1 = lp_.map.n[1];
  CostMatrix merged = costs[0][0];
  for (int k = 1; k < K; ++k) merged = merged.cwiseMin(costs[k][0]);
  std::vector<double> c(static_cast<size_t>(n0) * n1);
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j) c[i * n1 + j] = merged(i, j);
  if (last_basis_.empty()) {
    const auto og = [&](int t, int i) { return order_.empty() ? i : order_[t][i]; };
    std::vector<double> a(n0), b(n1);
    for (int i = 0; i < n0; ++i) a[i] = seq_.measures[0].masses[og(0, i)];
    for (int j = 0; j < n1; ++j) b[j] = seq_.measures[1].masses[og(1, j)];
    last_basis_.reserve(n0 + n1);
    for (auto [i, j] : nw_tree(a, b)) last_basis_.push_back(og(0, i) * n1 + og(1, j));
    last_basis_.push_back(n0 * n1 + n0 + n1 - 1);  // one redundant row; pin an artificial
  }
  LpSolution sol = pair_simplex_->solve_from(c, last_basis_);
  if (sol.status != LpStatus::kOptimal) sol = pair_simplex_->solve(c);
  if (sol.status != LpStatus::kOptimal) throw_lp_failure("coupled transport solve failed", sol);
  last_basis_ = sol.basis;

  CoupledPlanSet out;
  out.objective = sol.objective;
  out.plans.assign(K, {Eigen::MatrixXd::Zero(n0, n1)});
  out.marginals.assign(K, {Eigen::VectorXd::Zero(n0), Eigen::VectorXd::Zero(n1)});
  for (int i = 0; i < n0; ++i)
    for (int j = 0; j < n1; ++j) {
      const double m = sol.x[i * n1 + j];
      if (m == 0.0) continue;
      int k_best = 0;
      for (int k = 1; k < K; ++k)
        if (costs[k][0](i, j) < costs[k_best][0](i, j)) k_best = k;
      out.plans[k_best][0](i, j) = m;
      out.marginals[k_best][0][i] += m;
      out.marginals[k_best][1][j] += m;
    }
  return out;
}

CoupledPlanSet CoupledSolver::solve(const std::vector<std::vector<CostMatrix>>& costs) {
  if (lp_.map.T == 2) return solve_pair(costs);
  lp_.c = assemble_costs(lp_.map, costs);
  if (last_basis_.empty()) {
    const std::vector<int> crash = coupled_crash_basis(lp_, order_);
    if (!crash.empty()) last_basis_ = degeneracy_broken_basis(lp_, crash);
  }
  LpSolution sol = last_basis_.empty() ? simplex_->solve(lp_.c)
                                       : simplex_->solve_from(lp_.c, last_basis_);
  if (sol.status != LpStatus::kOptimal && !last_basis_.empty()) sol = simplex_->solve(lp_.c);
  if (sol.status != LpStatus::kOptimal) throw_lp_failure("coupled transport solve failed", sol);
  last_basis_ = sol.basis;
  return extract_plan_set(lp_, sol);
}

TransportPlan solve_classic_ot(const CostMatrix& cost, const DiscreteMeasure& mu,
                               const DiscreteMeasure& nu) {
  const int n1 = mu.size();
  const int n2 = nu.size();
  if (n1 < 1 || n2 < 1) throw ValidationError("transport between empty measures");
  if (cost.rows() != n1 || cost.cols() != n2)
    throw ValidationError("cost matrix shape does not match the measures");
  if (!cost.allFinite()) throw ValidationError("non-finite cost entry");
  const double s1 = mu.total_mass();
  const double s2 = nu.total_mass();
  const double gap = std::abs(s1 - s2);
  if (gap > kMassBalanceRelTol * std::max(std::abs(s1), 1e-300))
    throw ValidationError("total masses differ beyond tolerance: " + std::to_string(s1) +
                          " vs " + std::to_string(s2));

  std::vector<int> ti, tj;
  std::vector<double> tv, c(static_cast<size_t>(n1) * n2), f(n1 + n2);
  ti.reserve(2u * n1 * n2);
  tj.reserve(2u * n1 * n2);
  tv.reserve(2u * n1 * n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) {
      const int var = i * n2 + j;
      c[var] = cost(i, j);
      ti.push_back(i);
      tj.push_back(var);
      tv.push_back(1.0);
      ti.push_back(n1 + j);
      tj.push_back(var);
      tv.push_back(1.0);
    }
  for (int i = 0; i < n1; ++i) f[i] = mu.masses[i];
  for (int j = 0; j < n2; ++j) f[n1 + j] = nu.masses[j];

  RevisedSimplex simplex(SparseMatrixCSC::from_triplets(n1 + n2, n1 * n2, ti, tj, tv), f,
                         solver_config(f, gap));
  std::vector<int> crash;
  crash.reserve(n1 + n2);
  for (auto [i, j] : nw_tree(mu.masses, nu.masses)) crash.push_back(i * n2 + j);
  crash.push_back(n1 * n2 + n1 + n2 - 1);  // one redundant row; pin an artificial
  LpSolution sol = simplex.solve_from(c, crash);
  if (sol.status != LpStatus::kOptimal) throw_lp_failure("transport solve failed", sol);

  TransportPlan out;
  out.objective = sol.objective;
  out.plan.resize(n1, n2);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) out.plan(i, j) = sol.x[i * n2 + j];
  return out;
}

void dump_lp(const LinearProgram& lp, std::ostream& out) {
  out << "coupled K " << lp.map.K << " T " << lp.map.T << " n";
  for (int t = 0; t < lp.map.T; ++t) out << ' ' << lp.map.n[t];
  out << "\n";
  dump_lp_text(LinearProgramView{lp.c, lp.E, lp.f}, out);
}

double feasibility_residual(const CoupledPlanSet& plans, const ObservationSequence& seq) {
  const int T = seq.T();
  const int K = plans.K();
  double worst = 0.0;
  auto note = [&worst](double v) { worst = std::max(worst, std::abs(v)); };
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t + 1 < T; ++t) {
      const Eigen::MatrixXd& p = plans.plans[k][t];
      for (int i = 0; i < p.rows(); ++i)
        for (int j = 0; j < p.cols(); ++j)
          if (p(i, j) < 0.0) note(p(i, j));
      for (int i = 0; i < p.rows(); ++i) note(p.row(i).sum() - plans.marginals[k][t][i]);
      for (int j = 0; j < p.cols(); ++j) note(p.col(j).sum() - plans.marginals[k][t + 1][j]);
    }
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < plans.marginals[k][t].size(); ++i)
        if (plans.marginals[k][t][i] < 0.0) note(plans.marginals[k][t][i]);
  }
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < seq.measures[t].size(); ++i) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += plans.marginals[k][t][i];
      note(s - seq.measures[t].masses[i]);
    }
  return worst / std::max(seq.measures[0].total_mass(), 1e-300);
}

}  // namespace otsep
