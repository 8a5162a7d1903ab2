#pragma once

// Shared builders and independent oracles for the test suite. Everything here
// is deliberately naive: the library must agree with these, not share them.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "otsep/dynamics.hpp"
#include "otsep/measures.hpp"
#include "otsep/model.hpp"
#include "otsep/rng.hpp"

namespace otsep::test {

inline Point pt(std::initializer_list<double> coords) {
  Point p(static_cast<int>(coords.size()));
  int i = 0;
  for (double c : coords) p[i++] = c;
  return p;
}

inline DiscreteMeasure measure(std::vector<Point> points, std::vector<double> masses) {
  DiscreteMeasure mu;
  mu.points = std::move(points);
  mu.masses = std::move(masses);
  return mu;
}

// Wraps snapshots into a sequence with unknown particle ids.
inline ObservationSequence make_seq(std::vector<DiscreteMeasure> measures) {
  ObservationSequence seq;
  seq.d = measures.empty() ? 0 : measures[0].dim();
  for (const DiscreteMeasure& mu : measures)
    seq.particle_ids.push_back(std::vector<int>(mu.points.size(), -1));
  seq.measures = std::move(measures);
  return seq;
}

inline DiscreteMeasure random_measure(Rng& rng, int n, int d, double total = 1.0) {
  DiscreteMeasure mu;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Point p(d);
    for (int c = 0; c < d; ++c) p[c] = 4.0 * rng.uniform01() - 2.0;
    mu.points.push_back(std::move(p));
    mu.masses.push_back(0.2 + rng.uniform01());
    sum += mu.masses.back();
  }
  for (double& m : mu.masses) m *= total / sum;
  return mu;
}

inline DiscreteMeasure unit_mass_measure(Rng& rng, int n, int d) {
  DiscreteMeasure mu = random_measure(rng, n, d);
  mu.masses.assign(n, 1.0);
  return mu;
}

inline ObservationSequence random_sequence(Rng& rng, const std::vector<int>& counts, int d,
                                           double total = 1.0) {
  std::vector<DiscreteMeasure> ms;
  ms.reserve(counts.size());
  for (int n : counts) ms.push_back(random_measure(rng, n, d, total));
  return make_seq(std::move(ms));
}

inline AffineModel random_model(Rng& rng, int d, ModelKind kind, double scale = 1.0) {
  Eigen::VectorXd b(d);
  for (int i = 0; i < d; ++i) b[i] = scale * rng.normal();
  if (kind == ModelKind::kShift) return AffineModel::shift(std::move(b));
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = scale * rng.normal();
  return AffineModel::affine(std::move(A), std::move(b));
}

inline std::vector<std::vector<CostMatrix>> costs_for(const ObservationSequence& seq,
                                                      const std::vector<AffineModel>& models) {
  std::vector<std::vector<CostMatrix>> costs(models.size());
  for (size_t k = 0; k < models.size(); ++k)
    for (int t = 0; t + 1 < seq.T(); ++t)
      costs[k].push_back(cost_matrix(models[k], seq.measures[t], seq.measures[t + 1]));
  return costs;
}

inline bool same_vec(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

inline bool same_mat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

template <typename T>
inline void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[static_cast<size_t>(rng.below(i))]);
}

// Exact assignment optimum for a square cost, n <= 8: min over permutations.
inline double assignment_brute_force(const CostMatrix& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double model_objective(const AffineModel& m, const WeightedPairs& pairs) {
  double s = 0.0;
  for (const WeightedPair& p : pairs) s += p.w * (m.A * p.x + m.b - p.y).squaredNorm();
  return s;
}

// Independent weighted least squares: stack the sqrt(w)-scaled design and
// solve by SVD, which is minimum-norm when the design is rank deficient.
inline AffineModel lsq_oracle(const WeightedPairs& pairs, ModelKind kind) {
  const int d = static_cast<int>(pairs.front().x.size());
  if (kind == ModelKind::kShift) {
    Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
    double den = 0.0;
    for (const WeightedPair& p : pairs) {
      num += p.w * (p.y - p.x);
      den += p.w;
    }
    return AffineModel::shift(num / den);
  }
  const int N = static_cast<int>(pairs.size());
  Eigen::MatrixXd Z(N, d + 1);
  Eigen::MatrixXd Y(N, d);
  for (int r = 0; r < N; ++r) {
    const double sw = std::sqrt(pairs[r].w);
    Z.block(r, 0, 1, d) = sw * pairs[r].x.transpose();
    Z(r, d) = sw;
    Y.row(r) = sw * pairs[r].y.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd theta = svd.solve(Y);
  return AffineModel::affine(theta.topRows(d).transpose(), theta.row(d).transpose());
}

// Same fit through the normal equations, solved densely: M theta = R with
// M = sum w z z^T, R = sum w z y^T, z = (x; 1). Valid for full-rank moments.
inline AffineModel normal_equations_oracle(const WeightedPairs& pairs) {
  const int d = static_cast<int>(pairs.front().x.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d + 1, d + 1);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(d + 1, d);
  Eigen::VectorXd z(d + 1);
  for (const WeightedPair& p : pairs) {
    z.head(d) = p.x;
    z[d] = 1.0;
    M += p.w * z * z.transpose();
    R += p.w * z * p.y.transpose();
  }
  const Eigen::MatrixXd theta = M.ldlt().solve(R);
  return AffineModel::affine(theta.topRows(d).transpose(), theta.row(d).transpose());
}

// Northwest-corner plan with rows/cols visited in the given orders. Rounding
// mismatch between the two totals is ignored; the tail stays unassigned.
inline Eigen::MatrixXd nw_corner(const Eigen::VectorXd& rows, const Eigen::VectorXd& cols,
                                 const std::vector<int>& row_order,
                                 const std::vector<int>& col_order) {
  Eigen::MatrixXd plan = Eigen::MatrixXd::Zero(rows.size(), cols.size());
  std::vector<double> r(rows.data(), rows.data() + rows.size());
  std::vector<double> c(cols.data(), cols.data() + cols.size());
  size_t a = 0, b = 0;
  while (a < row_order.size() && b < col_order.size()) {
    const int i = row_order[a];
    const int j = col_order[b];
    const double m = std::min(r[i], c[j]);
    plan(i, j) += m;
    r[i] -= m;
    c[j] -= m;
    if (r[i] <= c[j])
      ++a;
    else
      ++b;
  }
  return plan;
}

// Objective of a random feasible point of the coupled problem: a random
// ensemble split of the observed masses, then per step a random blend of the
// product coupling and a shuffled northwest-corner vertex.
inline double random_feasible_objective(const ObservationSequence& seq,
                                        const std::vector<std::vector<CostMatrix>>& costs,
                                        Rng& rng) {
  const int K = static_cast<int>(costs.size());
  std::vector<double> lambda(K);
  double lsum = 0.0;
  for (double& l : lambda) {
    l = 0.05 + rng.uniform01();
    lsum += l;
  }
  for (double& l : lambda) l /= lsum;

  double obj = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t + 1 < seq.T(); ++t) {
      const DiscreteMeasure& mu = seq.measures[t];
      const DiscreteMeasure& nu = seq.measures[t + 1];
      const Eigen::VectorXd r =
          lambda[k] * Eigen::Map<const Eigen::VectorXd>(mu.masses.data(), mu.size());
      const Eigen::VectorXd c =
          lambda[k] * Eigen::Map<const Eigen::VectorXd>(nu.masses.data(), nu.size());
      std::vector<int> ro(mu.size()), co(nu.size());
      std::iota(ro.begin(), ro.end(), 0);
      std::iota(co.begin(), co.end(), 0);
      shuffle(ro, rng);
      shuffle(co, rng);
      const double w = rng.uniform01();
      const Eigen::MatrixXd plan =
          w * ((r / r.sum()) * c.transpose()) + (1.0 - w) * nw_corner(r, c, ro, co);
      obj += plan.cwiseProduct(costs[k][t]).sum();
    }
  }
  return obj;
}

inline std::filesystem::path temp_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("otsep_tests_" + std::to_string(static_cast<long>(::getpid())));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

inline std::string temp_path(const std::string& name) {
  static int counter = 0;
  return (temp_dir() / (std::to_string(counter++) + "_" + name)).string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // captured stdout
};

// Runs the shipped command-line binary; stderr lands in a scratch file.
inline CommandResult run_cli(const std::string& args) {
  const std::string out_path = temp_path("stdout.txt");
  const std::string err_path = temp_path("stderr.txt");
  const std::string cmd =
      std::string(OTSEP_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
  const int rc = std::system(cmd.c_str());
  CommandResult res;
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  res.output = read_file(out_path);
  return res;
}

}  // namespace otsep::test
