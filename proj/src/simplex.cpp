#include "otsep/simplex.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <utility>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "otsep/error.hpp"

namespace otsep {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void check_costs(int n, const std::vector<double>& c) {
  if (static_cast<int>(c.size()) != n)
    throw ValidationError("cost vector length " + std::to_string(c.size()) +
                          " does not match column count " + std::to_string(n));
  for (double v : c)
    if (!std::isfinite(v)) throw ValidationError("non-finite cost entry");
}

}  // namespace

SparseMatrixCSC SparseMatrixCSC::from_triplets(int rows, int cols,
                                               const std::vector<int>& ti,
                                               const std::vector<int>& tj,
                                               const std::vector<double>& tv) {
  if (rows < 0 || cols < 0) throw ValidationError("negative matrix extent");
  if (ti.size() != tj.size() || ti.size() != tv.size())
    throw ValidationError("triplet arrays differ in length");
  const size_t nnz = ti.size();
  for (size_t k = 0; k < nnz; ++k)
    if (ti[k] < 0 || ti[k] >= rows || tj[k] < 0 || tj[k] >= cols)
      throw ValidationError("triplet index out of range");

  std::vector<int> count(cols + 1, 0);
  for (size_t k = 0; k < nnz; ++k) ++count[tj[k] + 1];
  for (int j = 0; j < cols; ++j) count[j + 1] += count[j];
  std::vector<int> ri(nnz);
  std::vector<double> rv(nnz);
  {
    std::vector<int> next(count.begin(), count.end() - 1);
    for (size_t k = 0; k < nnz; ++k) {
      const int slot = next[tj[k]]++;
      ri[slot] = ti[k];
      rv[slot] = tv[k];
    }
  }

  SparseMatrixCSC out;
  out.rows = rows;
  out.cols = cols;
  out.col_ptr.assign(cols + 1, 0);
  out.row_ind.reserve(nnz);
  out.val.reserve(nnz);
  std::vector<std::pair<int, double>> colbuf;
  for (int j = 0; j < cols; ++j) {
    colbuf.clear();
    for (int k = count[j]; k < count[j + 1]; ++k) colbuf.emplace_back(ri[k], rv[k]);
    std::sort(colbuf.begin(), colbuf.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const size_t start = out.row_ind.size();
    for (const auto& [r, v] : colbuf) {
      if (out.row_ind.size() > start && out.row_ind.back() == r)
        out.val.back() += v;
      else {
        out.row_ind.push_back(r);
        out.val.push_back(v);
      }
    }
    out.col_ptr[j + 1] = static_cast<int>(out.row_ind.size());
  }
  return out;
}

struct RevisedSimplex::Factor {
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

RevisedSimplex::~RevisedSimplex() = default;

RevisedSimplex::RevisedSimplex(SparseMatrixCSC E, std::vector<double> f, SimplexConfig cfg)
    : m_(E.rows), n_(E.cols), E_(std::move(E)), f_(std::move(f)), cfg_(cfg) {
  if (static_cast<int>(f_.size()) != m_)
    throw ValidationError("rhs length does not match row count");
  if (static_cast<int>(E_.col_ptr.size()) != n_ + 1 || E_.col_ptr.front() != 0 ||
      E_.col_ptr.back() != static_cast<int>(E_.row_ind.size()) ||
      E_.row_ind.size() != E_.val.size())
    throw ValidationError("malformed sparse constraint matrix");
  for (int j = 0; j < n_; ++j)
    if (E_.col_ptr[j] > E_.col_ptr[j + 1]) throw ValidationError("malformed sparse column extents");
  for (int r : E_.row_ind)
    if (r < 0 || r >= m_) throw ValidationError("sparse row index out of range");
  for (double v : E_.val)
    if (!std::isfinite(v)) throw ValidationError("non-finite constraint entry");
  for (double v : f_)
    if (!std::isfinite(v)) throw ValidationError("non-finite rhs entry");

  // Sign-flip rows with negative rhs so the all-artificial start is feasible.
  std::vector<char> flip(m_, 0);
  bool any = false;
  for (int i = 0; i < m_; ++i)
    if (f_[i] < 0.0) {
      flip[i] = 1;
      f_[i] = -f_[i];
      any = true;
    }
  if (any)
    for (size_t k = 0; k < E_.row_ind.size(); ++k)
      if (flip[E_.row_ind[k]]) E_.val[k] = -E_.val[k];

  double fmax = 0.0;
  for (double v : f_) fmax = std::max(fmax, std::abs(v));
  feas_abs_ = cfg_.feas_tol * std::max(1.0, fmax);
  if (cfg_.refactor_every < 1) cfg_.refactor_every = 1;
  max_iters_ = cfg_.max_iterations > 0 ? cfg_.max_iterations : 10000 + 20L * m_ + 2L * n_;

  row_ptr_.assign(m_ + 1, 0);
  for (int r : E_.row_ind) ++row_ptr_[r + 1];
  for (int i = 0; i < m_; ++i) row_ptr_[i + 1] += row_ptr_[i];
  rcol_ind_.resize(E_.row_ind.size());
  rval_.resize(E_.val.size());
  {
    std::vector<int> next(row_ptr_.begin(), row_ptr_.end() - 1);
    for (int j = 0; j < n_; ++j)
      for (int k = E_.col_ptr[j]; k < E_.col_ptr[j + 1]; ++k) {
        const int slot = next[E_.row_ind[k]]++;
        rcol_ind_[slot] = j;
        rval_[slot] = E_.val[k];
      }
  }

  basis_.assign(m_, 0);
  in_basis_.assign(n_, 0);
  d_.assign(n_, 0.0);
  xb_.assign(m_, 0.0);
  alpha_.assign(m_, 0.0);
  wrow_.assign(m_, 0.0);
  acc_.assign(n_, 0.0);
  touched_.reserve(n_);
}

void RevisedSimplex::reset_run_state() {
  etas_.clear();
  std::fill(in_basis_.begin(), in_basis_.end(), 0);
  std::fill(d_.begin(), d_.end(), 0.0);
  devex_w_.assign(n_, 1.0);
  cost_ = nullptr;
  phase_one_ = false;
  dual_tol_ = 0.0;
  bland_ = false;
  stall_ = 0;
  best_obj_ = kInf;
  iters_ = 0;
}

void RevisedSimplex::start_artificial_basis() {
  for (int r = 0; r < m_; ++r) basis_[r] = n_ + r;
  std::fill(in_basis_.begin(), in_basis_.end(), 0);
  if (!refactorize()) throw SolverError("identity start basis failed to factorize");
}

bool RevisedSimplex::refactorize() {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(m_) * 2);
  for (int r = 0; r < m_; ++r) {
    const int j = basis_[r];
    if (j >= n_)
      trips.emplace_back(j - n_, r, 1.0);
    else
      for (int k = E_.col_ptr[j]; k < E_.col_ptr[j + 1]; ++k)
        trips.emplace_back(E_.row_ind[k], r, E_.val[k]);
  }
  Eigen::SparseMatrix<double> B(m_, m_);
  B.setFromTriplets(trips.begin(), trips.end());
  if (!factor_) factor_ = std::make_unique<Factor>();
  factor_->lu.compute(B);
  if (factor_->lu.info() != Eigen::Success) return false;
  Eigen::VectorXd x = factor_->lu.solve(Eigen::Map<const Eigen::VectorXd>(f_.data(), m_));
  if (factor_->lu.info() != Eigen::Success) return false;
  std::copy_n(x.data(), m_, xb_.begin());
  etas_.clear();
  return true;
}

double RevisedSimplex::basic_cost(int row) const {
  const int j = basis_[row];
  if (j >= n_) return phase_one_ ? 1.0 : 0.0;
  return phase_one_ ? 0.0 : (*cost_)[j];
}

double RevisedSimplex::current_objective() const {
  double s = 0.0;
  for (int r = 0; r < m_; ++r) s += basic_cost(r) * xb_[r];
  return s;
}

void RevisedSimplex::btran_apply() {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    const Eta& e = *it;
    double dot = wrow_[e.row] * e.diag;
    for (const auto& [i, v] : e.nz) dot += wrow_[i] * v;
    const double s = (dot - wrow_[e.row]) / e.diag;
    wrow_[e.row] -= s;
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(wrow_.data(), m_);
  Eigen::VectorXd w = factor_->lu.transpose().solve(y);
  std::copy_n(w.data(), m_, wrow_.begin());
}

void RevisedSimplex::btran_row(int row) {
  std::fill(wrow_.begin(), wrow_.end(), 0.0);
  wrow_[row] = 1.0;
  btran_apply();
}

void RevisedSimplex::recompute_reduced_costs() {
  for (int r = 0; r < m_; ++r) wrow_[r] = basic_cost(r);
  btran_apply();
  for (int j = 0; j < n_; ++j) {
    if (in_basis_[j]) {
      d_[j] = 0.0;
      continue;
    }
    double dot = 0.0;
    for (int k = E_.col_ptr[j]; k < E_.col_ptr[j + 1]; ++k)
      dot += wrow_[E_.row_ind[k]] * E_.val[k];
    d_[j] = (phase_one_ ? 0.0 : (*cost_)[j]) - dot;
  }
}

int RevisedSimplex::price(const std::vector<char>& barred) const {
  if (bland_) {
    for (int j = 0; j < n_; ++j)
      if (!in_basis_[j] && !barred[j] && d_[j] < -dual_tol_) return j;
    return -1;
  }
  // Devex: most negative reduced cost relative to the reference weights.
  int best = -1;
  double best_score = 0.0;
  for (int j = 0; j < n_; ++j) {
    if (in_basis_[j] || barred[j] || d_[j] >= -dual_tol_) continue;
    const double score = d_[j] * d_[j] / devex_w_[j];
    if (score > best_score) {
      best_score = score;
      best = j;
    }
  }
  return best;
}

void RevisedSimplex::ftran(int col) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
  for (int k = E_.col_ptr[col]; k < E_.col_ptr[col + 1]; ++k) rhs[E_.row_ind[k]] = E_.val[k];
  Eigen::VectorXd x = factor_->lu.solve(rhs);
  std::copy_n(x.data(), m_, alpha_.begin());
  for (const Eta& e : etas_) {
    const double t = alpha_[e.row] / e.diag;
    if (t != 0.0)
      for (const auto& [i, v] : e.nz) alpha_[i] -= t * v;
    alpha_[e.row] = t;
  }
}

int RevisedSimplex::ratio_test(double* pivot_out, double* ratio_out) const {
  // The pivot threshold is relative to the column's largest entry: entries
  // that are pure round-off from the eta chain must not become pivots, or
  // the basis silently goes singular. Excluding them at worst triggers the
  // refactorize-and-retry path, which recomputes the column exactly.
  double amax = 0.0;
  for (int r = 0; r < m_; ++r) amax = std::max(amax, std::abs(alpha_[r]));
  const double ptol = std::max(cfg_.pivot_tol, 1e-9 * amax);

  if (bland_) {
    int best = -1;
    double best_ratio = kInf;
    for (int r = 0; r < m_; ++r) {
      const double a = alpha_[r];
      const bool art = basis_[r] >= n_;
      double ratio;
      if (!phase_one_ && art) {
        if (std::abs(a) <= ptol) continue;
        ratio = 0.0;
      } else {
        if (a <= ptol) continue;
        ratio = std::max(xb_[r], 0.0) / a;
      }
      if (best < 0 || ratio < best_ratio ||
          (ratio == best_ratio && basis_[r] < basis_[best])) {
        best = r;
        best_ratio = ratio;
      }
    }
    if (best >= 0) {
      *pivot_out = alpha_[best];
      *ratio_out = best_ratio;
    }
    return best;
  }

  // Basic artificials are pinned at zero in phase 2: any movement along
  // their row would re-introduce infeasibility, so one of them must leave
  // before a positive step is taken.
  if (!phase_one_) {
    int pin = -1;
    double pin_mag = 0.0;
    for (int r = 0; r < m_; ++r)
      if (basis_[r] >= n_) {
        const double mag = std::abs(alpha_[r]);
        if (mag > ptol && mag > pin_mag) {
          pin = r;
          pin_mag = mag;
        }
      }
    if (pin >= 0) {
      *pivot_out = alpha_[pin];
      *ratio_out = 0.0;
      return pin;
    }
  }

  // Harris two-pass: bound the step with a slice of the feasibility
  // tolerance, then take the largest pivot among the rows that block within
  // it. Basic values can sink a few slices below zero before a pivot or the
  // final clamp absorbs them, so the slice keeps the total inside the band.
  const double delta = 0.05 * feas_abs_;
  double bound = kInf;
  for (int r = 0; r < m_; ++r) {
    if (!phase_one_ && basis_[r] >= n_) continue;
    const double a = alpha_[r];
    if (a <= ptol) continue;
    bound = std::min(bound, (std::max(xb_[r], 0.0) + delta) / a);
  }
  if (bound == kInf) return -1;
  int best = -1;
  int best_pri = -1;
  double best_mag = 0.0;
  for (int r = 0; r < m_; ++r) {
    if (!phase_one_ && basis_[r] >= n_) continue;
    const double a = alpha_[r];
    if (a <= ptol) continue;
    if (std::max(xb_[r], 0.0) / a > bound) continue;
    const int pri = basis_[r] >= n_ ? 1 : 0;  // prefer driving artificials out
    const double mag = a;
    if (pri > best_pri || (pri == best_pri && mag > best_mag)) {
      best = r;
      best_pri = pri;
      best_mag = mag;
    }
  }
  if (best >= 0) {
    *pivot_out = alpha_[best];
    *ratio_out = std::max(xb_[best], 0.0) / alpha_[best];
  }
  return best;
}

void RevisedSimplex::update_reduced_costs(int entering, int row_r, double pivot) {
  // d_j <- d_j - (d_q / pivot) * (w . a_j) with w the pre-pivot row r of
  // B^-1; covers the leaving column too, since w . a_leaving = 1. The same
  // w . a_j are the pivot-row coefficients the Devex weight update needs.
  const double s = d_[entering] / pivot;
  const double wq = devex_w_[entering];
  const double inv_p2 = 1.0 / (pivot * pivot);
  int wn = 0;
  for (int i = 0; i < m_; ++i)
    if (wrow_[i] != 0.0) ++wn;
  if (2 * wn <= m_) {
    // w is sparse: walk only the rows it touches
    touched_.clear();
    for (int i = 0; i < m_; ++i) {
      const double w = wrow_[i];
      if (w == 0.0) continue;
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const int j = rcol_ind_[k];
        if (acc_[j] == 0.0) touched_.push_back(j);
        acc_[j] += w * rval_[k];
      }
    }
    for (int j : touched_) {
      const double dot = acc_[j];
      acc_[j] = 0.0;
      if (dot == 0.0) continue;  // also skips duplicate touches
      d_[j] -= s * dot;
      const double cand = dot * dot * inv_p2 * wq;
      if (cand > devex_w_[j]) devex_w_[j] = cand;
    }
  } else {
    for (int j = 0; j < n_; ++j) {
      double dot = 0.0;
      for (int k = E_.col_ptr[j]; k < E_.col_ptr[j + 1]; ++k)
        dot += wrow_[E_.row_ind[k]] * E_.val[k];
      d_[j] -= s * dot;
      const double cand = dot * dot * inv_p2 * wq;
      if (cand > devex_w_[j]) devex_w_[j] = cand;
    }
  }
  const int leaving = basis_[row_r];
  if (leaving < n_) devex_w_[leaving] = std::max(wq * inv_p2, 1.0);
  d_[entering] = 0.0;
}

void RevisedSimplex::apply_pivot(int entering, int row, double ratio) {
  const int leaving = basis_[row];
  if (leaving < n_) in_basis_[leaving] = 0;
  basis_[row] = entering;
  in_basis_[entering] = 1;
  if (ratio != 0.0) {
    Eigen::Map<Eigen::VectorXd> xb(xb_.data(), m_);
    xb -= ratio * Eigen::Map<const Eigen::VectorXd>(alpha_.data(), m_);
  }
  xb_[row] = ratio;
  Eta e;
  e.row = row;
  e.diag = alpha_[row];
  for (int r = 0; r < m_; ++r)
    if (r != row && alpha_[r] != 0.0) e.nz.emplace_back(r, alpha_[r]);
  etas_.push_back(std::move(e));
}

RevisedSimplex::RunOutcome RevisedSimplex::run() {
  std::vector<char> barred(n_, 0);
  bool any_barred = false;
  const long stall_limit = 50L * std::max(1, m_);
  stall_ = 0;
  best_obj_ = kInf;
  while (true) {
    if (phase_one_ && current_objective() <= feas_abs_) return RunOutcome::kOptimal;
    if (iters_ >= max_iters_) return RunOutcome::kIterLimit;

    int q = price(barred);
    if (q < 0) {
      if (!etas_.empty()) {
        // confirm on a fresh factorization before declaring optimality
        if (!refactorize()) return RunOutcome::kSingular;
        recompute_reduced_costs();
        std::fill(barred.begin(), barred.end(), 0);
        any_barred = false;
        continue;
      }
      return any_barred ? RunOutcome::kUnbounded : RunOutcome::kOptimal;
    }

    ftran(q);
    double piv = 0.0, ratio = 0.0;
    const int r = ratio_test(&piv, &ratio);
    if (r < 0) {
      if (!etas_.empty()) {
        if (!refactorize()) return RunOutcome::kSingular;
        recompute_reduced_costs();
        std::fill(barred.begin(), barred.end(), 0);
        any_barred = false;
        continue;
      }
      // unblocked direction on a fresh basis; bar the column so any other
      // improving direction gets a chance first
      barred[q] = 1;
      any_barred = true;
      continue;
    }

    btran_row(r);
    update_reduced_costs(q, r, piv);
    apply_pivot(q, r, ratio);
    ++iters_;

    const double obj = current_objective();
    if (obj < best_obj_ - 1e-12 * (1.0 + std::abs(best_obj_))) {
      best_obj_ = obj;
      stall_ = 0;
    } else if (++stall_ >= stall_limit) {
      bland_ = true;
    }

    if (static_cast<int>(etas_.size()) >= cfg_.refactor_every) {
      if (!refactorize()) return RunOutcome::kSingular;
      recompute_reduced_costs();
      std::fill(barred.begin(), barred.end(), 0);
      any_barred = false;
      double wmax = 0.0;
      for (double w : devex_w_) wmax = std::max(wmax, w);
      if (wmax > 1e7) std::fill(devex_w_.begin(), devex_w_.end(), 1.0);
    }
  }
}

LpSolution RevisedSimplex::extract(LpStatus status, std::string diagnostics) {
  LpSolution sol;
  sol.status = status;
  sol.x.assign(n_, 0.0);
  for (int r = 0; r < m_; ++r)
    if (basis_[r] < n_) sol.x[basis_[r]] = xb_[r];
  const double band = std::max(1e-12, feas_abs_);
  for (double& v : sol.x)
    if (v < 0.0 && v >= -band) v = 0.0;
  double obj = 0.0;
  if (cost_)
    for (int j = 0; j < n_; ++j) obj += (*cost_)[j] * sol.x[j];
  sol.objective = obj;
  sol.basis = basis_;
  sol.iterations = iters_;
  sol.diagnostics = std::move(diagnostics);
  return sol;
}

LpSolution RevisedSimplex::finish_phase2(const std::vector<double>& c) {
  cost_ = &c;
  phase_one_ = false;
  double cmax = 0.0;
  for (double v : c) cmax = std::max(cmax, std::abs(v));
  // Most of the walk runs at a loose dual tolerance; once it looks optimal,
  // tighten and continue so the terminal objective gap stays tiny. The
  // endgame from a loosely-optimal vertex is only a handful of pivots.
  const double dual_tight = 1e-11 * std::max(1.0, cmax);
  dual_tol_ = 1e-9 * std::max(1.0, cmax);
  std::fill(devex_w_.begin(), devex_w_.end(), 1.0);
  recompute_reduced_costs();
  RunOutcome oc = run();
  if (oc == RunOutcome::kOptimal && dual_tol_ > dual_tight) {
    dual_tol_ = dual_tight;
    oc = run();
  }
  switch (oc) {
    case RunOutcome::kOptimal:
      return extract(LpStatus::kOptimal, "");
    case RunOutcome::kUnbounded:
      return extract(LpStatus::kUnbounded, "objective unbounded below");
    case RunOutcome::kIterLimit:
      return extract(LpStatus::kIterLimit, "iteration limit during phase 2");
    case RunOutcome::kSingular:
      break;
  }
  return extract(LpStatus::kSingularBasis, "singular basis during phase 2");
}

LpSolution RevisedSimplex::solve(const std::vector<double>& c) {
  check_costs(n_, c);
  if (m_ == 0) {
    LpSolution sol;
    sol.x.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j)
      if (c[j] < -1e-9 * std::max(1.0, std::abs(c[j]))) {
        sol.status = LpStatus::kUnbounded;
        sol.diagnostics = "no constraints and negative cost on column " + std::to_string(j);
        return sol;
      }
    sol.status = LpStatus::kOptimal;
    return sol;
  }
  LpSolution sol = solve_attempt(c);
  if (sol.status == LpStatus::kSingularBasis) {
    // One retry under stricter numerics: larger pivot threshold, more
    // frequent refactorization.
    const SimplexConfig saved = cfg_;
    cfg_.pivot_tol = std::max(cfg_.pivot_tol, 1e-8);
    cfg_.refactor_every = std::min(cfg_.refactor_every, 20);
    sol = solve_attempt(c);
    cfg_ = saved;
  }
  return sol;
}

LpSolution RevisedSimplex::solve_attempt(const std::vector<double>& c) {
  reset_run_state();
  cost_ = &c;
  phase_one_ = true;
  dual_tol_ = 1e-9;
  start_artificial_basis();
  recompute_reduced_costs();
  switch (run()) {
    case RunOutcome::kIterLimit:
      return extract(LpStatus::kIterLimit, "iteration limit during phase 1");
    case RunOutcome::kSingular:
      return extract(LpStatus::kSingularBasis, "singular basis during phase 1");
    case RunOutcome::kUnbounded:
      return extract(LpStatus::kSingularBasis, "phase 1 reported an unbounded direction");
    case RunOutcome::kOptimal:
      break;
  }
  const double infeas = current_objective();
  if (infeas > feas_abs_)
    return extract(LpStatus::kInfeasible, "infeasible, phase-1 residual " + fmt(infeas));
  return finish_phase2(c);
}

LpSolution RevisedSimplex::solve_from(const std::vector<double>& c, const std::vector<int>& basis) {
  check_costs(n_, c);
  if (m_ == 0) return solve(c);
  if (static_cast<int>(basis.size()) != m_)
    throw ValidationError("warm-start basis length does not match row count");
  for (int j : basis)
    if (j < 0 || j >= n_ + m_) throw ValidationError("warm-start basis entry out of range");
  reset_run_state();
  cost_ = &c;
  basis_ = basis;
  for (int r = 0; r < m_; ++r)
    if (basis_[r] < n_) in_basis_[basis_[r]] = 1;
  if (!refactorize()) return solve(c);
  for (int r = 0; r < m_; ++r) {
    if (xb_[r] < -feas_abs_) return solve(c);             // basis not primal feasible
    if (basis_[r] >= n_ && xb_[r] > feas_abs_) return solve(c);  // artificial carries mass
  }
  LpSolution sol = finish_phase2(c);
  if (sol.status == LpStatus::kSingularBasis) return solve(c);
  return sol;
}

void dump_lp_text(const LinearProgramView& lp, std::ostream& out) {
  out << "lp rows " << lp.E.rows << " cols " << lp.E.cols << " nnz " << lp.E.row_ind.size()
      << "\n";
  for (int j = 0; j < lp.E.cols; ++j)
    if (lp.c[j] != 0.0) out << "c " << j << ' ' << fmt(lp.c[j]) << "\n";
  for (int j = 0; j < lp.E.cols; ++j)
    for (int k = lp.E.col_ptr[j]; k < lp.E.col_ptr[j + 1]; ++k)
      out << "E " << lp.E.row_ind[k] << ' ' << j << ' ' << fmt(lp.E.val[k]) << "\n";
  for (size_t i = 0; i < lp.f.size(); ++i)
    if (lp.f[i] != 0.0) out << "f " << i << ' ' << fmt(lp.f[i]) << "\n";
}

}  // namespace otsep
