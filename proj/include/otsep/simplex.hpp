#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace otsep {

// Column-compressed sparse matrix for the equality constraints E x = f.
struct SparseMatrixCSC {
  int rows = 0;
  int cols = 0;
  std::vector<int> col_ptr;   // size cols+1
  std::vector<int> row_ind;
  std::vector<double> val;

  static SparseMatrixCSC from_triplets(int rows, int cols,
                                       const std::vector<int>& ti,
                                       const std::vector<int>& tj,
                                       const std::vector<double>& tv);
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterLimit, kSingularBasis };

struct LpSolution {
  LpStatus status = LpStatus::kOptimal;
  double objective = 0.0;
  std::vector<double> x;       // structural variable values
  std::vector<int> basis;      // row -> column; entries >= n are artificials
  long iterations = 0;
  std::string diagnostics;
};

struct SimplexConfig {
  double pivot_tol = 1e-10;
  double feas_tol = 1e-9;       // scaled by max(1, |f|_inf)
  long max_iterations = 0;      // 0 = automatic from problem size
  int refactor_every = 100;     // pivots between basis refactorizations
};

// Revised simplex for min c.x subject to E x = f, x >= 0. Rows with f < 0
// are sign-flipped on construction.
//
// The basis is kept as a sparse LU factorization plus a product-form eta
// file; FTRAN/BTRAN apply the eta updates on top of the factored base, and
// the basis is refactorized every cfg.refactor_every pivots (reduced costs
// are recomputed there too, bounding drift). Phase 1 starts from the
// all-artificial identity basis; artificials that stay basic at level zero
// mark dependent rows and are pinned there by the ratio test. Pricing is
// Devex (the pivot-row coefficients it needs fall out of the reduced-cost
// update), falling back to Bland's rule for the rest of the solve after a
// stall of 50 * rows iterations without objective progress. The ratio test
// is the two-pass Harris variant: blocking rows within the feasibility
// tolerance of the tightest bound are interchangeable, and the largest
// pivot among them wins, so basic values may sit a hair below zero. A
// previous basis can be reused when only the costs changed.
class RevisedSimplex {
 public:
  RevisedSimplex(SparseMatrixCSC E, std::vector<double> f, SimplexConfig cfg = {});
  ~RevisedSimplex();

  // Cold solve, phase 1 + phase 2.
  LpSolution solve(const std::vector<double>& c);

  // Re-solve with new costs starting from a basis of this constraint system.
  // Falls back to a cold solve if the basis cannot be refactorized.
  LpSolution solve_from(const std::vector<double>& c, const std::vector<int>& basis);

  int rows() const { return m_; }
  int cols() const { return n_; }

 private:
  struct Factor;  // sparse LU of the basis matrix
  struct Eta {
    int row;
    double diag;                              // pivot entry of B^-1 a_entering
    std::vector<std::pair<int, double>> nz;   // its other nonzero entries
  };

  int m_, n_;
  SparseMatrixCSC E_;
  std::vector<double> f_;
  SimplexConfig cfg_;
  double feas_abs_ = 0.0;
  long max_iters_ = 0;

  // row-major copy of E_ so pivot-row updates can walk just the rows where
  // the BTRAN vector is nonzero
  std::vector<int> row_ptr_, rcol_ind_;
  std::vector<double> rval_;

  std::unique_ptr<Factor> factor_;
  std::vector<Eta> etas_;
  std::vector<double> xb_;       // basic values
  std::vector<int> basis_;       // row -> column (>= n_: artificial of that row)
  std::vector<char> in_basis_;   // structural columns currently basic
  std::vector<double> d_;        // reduced costs of structural columns
  std::vector<double> devex_w_;  // Devex reference weights
  std::vector<double> alpha_;    // scratch: B^-1 a_q
  std::vector<double> wrow_;     // scratch: row r of B^-1
  std::vector<double> acc_;      // scratch: pivot-row coefficients by column
  std::vector<int> touched_;     // scratch: columns written in acc_

  const std::vector<double>* cost_ = nullptr;  // structural phase-2 costs
  bool phase_one_ = false;
  double dual_tol_ = 0.0;
  bool bland_ = false;
  long stall_ = 0;
  double best_obj_ = 0.0;
  long iters_ = 0;

  void reset_run_state();
  void start_artificial_basis();
  bool refactorize();            // rebuild factor_, xb_; false if singular
  void recompute_reduced_costs();
  double basic_cost(int row) const;
  double current_objective() const;
  int price(const std::vector<char>& barred) const;
  void ftran(int col);           // alpha_ = B^-1 a_col
  void btran_apply();            // wrow_^T <- wrow_^T B^-1
  void btran_row(int row);       // wrow_ = e_row^T B^-1
  int ratio_test(double* pivot_out, double* ratio_out) const;
  void apply_pivot(int entering, int row, double ratio);
  void update_reduced_costs(int entering, int row_r, double pivot);

  enum class RunOutcome { kOptimal, kUnbounded, kIterLimit, kSingular };
  RunOutcome run();
  LpSolution extract(LpStatus status, std::string diagnostics);
  LpSolution finish_phase2(const std::vector<double>& c);
  LpSolution solve_attempt(const std::vector<double>& c);
};

// Plain-text dump of an LP (debugging aid; format not a stability guarantee).
struct LinearProgramView {
  const std::vector<double>& c;
  const SparseMatrixCSC& E;
  const std::vector<double>& f;
};
void dump_lp_text(const LinearProgramView& lp, std::ostream& out);

}  // namespace otsep
