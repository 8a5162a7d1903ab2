#include "otsep/dynamics.hpp"

#include <limits>

#include "otsep/error.hpp"

namespace otsep {

Point apply(const AffineModel& model, const Point& x) {
  if (model.kind == ModelKind::kShift) return x + model.b;
  return model.A * x + model.b;
}

namespace {

void fill_cost_row(const AffineModel& model, const DiscreteMeasure& source,
                   const DiscreteMeasure& target, CostMatrix& out, int i) {
  const Point z = apply(model, source.points[i]);
  for (int j = 0; j < target.size(); ++j) out(i, j) = (z - target.points[j]).squaredNorm();
}

}  // namespace

CostMatrix cost_matrix_serial(const AffineModel& model, const DiscreteMeasure& source,
                              const DiscreteMeasure& target) {
  CostMatrix out(source.size(), target.size());
  for (int i = 0; i < source.size(); ++i) fill_cost_row(model, source, target, out, i);
  return out;
}

CostMatrix cost_matrix(const AffineModel& model, const DiscreteMeasure& source,
                       const DiscreteMeasure& target) {
  CostMatrix out(source.size(), target.size());
  const int ni = source.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < ni; ++i) fill_cost_row(model, source, target, out, i);
  return out;
}

MomentAccumulator::MomentAccumulator(int d)
    : d_(d),
      zz_(Eigen::MatrixXd::Zero(d + 1, d + 1)),
      zy_(Eigen::MatrixXd::Zero(d + 1, d)),
      sx_(Eigen::VectorXd::Zero(d)),
      sy_(Eigen::VectorXd::Zero(d)) {
  if (d < 1) throw ValidationError("moment accumulator needs dimension >= 1");
}

void MomentAccumulator::add(const Point& x, const Point& y, double w) {
  if (static_cast<int>(x.size()) != d_ || static_cast<int>(y.size()) != d_)
    throw ValidationError("pair dimension mismatch in moment accumulator");
  Eigen::VectorXd z(d_ + 1);
  z.head(d_) = x;
  z[d_] = 1.0;
  zz_.noalias() += w * z * z.transpose();
  zy_.noalias() += w * z * y.transpose();
  sx_ += w * x;
  sy_ += w * y;
  sum_w_ += w;
}

AffineModel MomentAccumulator::fit(ModelKind kind) const {
  if (!(sum_w_ > 0.0))
    throw ValidationError("cannot fit dynamics from non-positive total weight");
  if (kind == ModelKind::kShift) return AffineModel::shift((sy_ - sx_) / sum_w_);

  // Normal equations zz W = zy with W = [A b]^T; rank-deficient moments get
  // the minimum-norm W through a thresholded eigendecomposition.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(zz_);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double lam_max = lam[d_];
  const double tol = lam_max * (d_ + 1) * std::numeric_limits<double>::epsilon();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(d_ + 1);
  for (int i = 0; i <= d_; ++i)
    if (lam[i] > tol && lam[i] > 0.0) inv[i] = 1.0 / lam[i];
  Eigen::MatrixXd w = eig.eigenvectors() * inv.asDiagonal() *
                      (eig.eigenvectors().transpose() * zy_);
  AffineModel model = AffineModel::identity(d_, ModelKind::kAffine);
  model.A = w.topRows(d_).transpose();
  model.b = w.row(d_).transpose();
  return model;
}

AffineModel fit_weighted(const WeightedPairs& pairs, ModelKind kind) {
  if (pairs.empty()) throw ValidationError("cannot fit dynamics from an empty pair list");
  MomentAccumulator acc(static_cast<int>(pairs.front().x.size()));
  for (const WeightedPair& p : pairs) acc.add(p.x, p.y, p.w);
  return acc.fit(kind);
}

}  // namespace otsep
