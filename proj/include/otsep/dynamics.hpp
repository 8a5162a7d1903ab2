#pragma once

#include <vector>

#include <Eigen/Dense>

#include "otsep/measures.hpp"
#include "otsep/model.hpp"

namespace otsep {

// Entry (i,j) holds the squared distance from the model image of source
// point i to target point j.
using CostMatrix = Eigen::MatrixXd;

Point apply(const AffineModel& model, const Point& x);

// cost(i,j) = |A x_i + b - y_j|^2. The default entry point may use OpenMP;
// the serial variant is the reference kernel and produces identical bits.
CostMatrix cost_matrix(const AffineModel& model, const DiscreteMeasure& source,
                       const DiscreteMeasure& target);
CostMatrix cost_matrix_serial(const AffineModel& model, const DiscreteMeasure& source,
                              const DiscreteMeasure& target);

struct WeightedPair {
  Point x;
  Point y;
  double w = 0.0;
};
using WeightedPairs = std::vector<WeightedPair>;

// Accumulates the weighted moments of (x -> y) pairs so a model can be fit
// without materializing the pair list. Addition order is fixed by the caller;
// the fit is deterministic given the accumulated sums.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(int d);

  void add(const Point& x, const Point& y, double w);
  double total_weight() const { return sum_w_; }

  // argmin over (A,b) of the accumulated weighted residual. Rank-deficient
  // moment matrices yield the minimum-norm solution of the normal equations.
  // kShift uses the closed form b = sum(w (y-x)) / sum(w).
  AffineModel fit(ModelKind kind) const;

 private:
  int d_;
  double sum_w_ = 0.0;
  Eigen::MatrixXd zz_;   // sum w (x;1)(x;1)^T, (d+1)x(d+1)
  Eigen::MatrixXd zy_;   // sum w (x;1) y^T,   (d+1)xd
  Eigen::VectorXd sx_;   // sum w x
  Eigen::VectorXd sy_;   // sum w y
};

// Weighted least-squares identification of one ensemble's dynamics.
// Throws ValidationError when the total weight is not positive.
AffineModel fit_weighted(const WeightedPairs& pairs, ModelKind kind);

}  // namespace otsep
