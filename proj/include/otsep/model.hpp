#pragma once

#include <Eigen/Dense>

namespace otsep {

enum class ModelKind { kAffine, kShift };

// One ensemble's dynamics x' = A x + b. For kShift, A is pinned to the
// identity and only b is a free parameter.
struct AffineModel {
  ModelKind kind = ModelKind::kAffine;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  int dim() const { return static_cast<int>(b.size()); }

  static AffineModel affine(Eigen::MatrixXd A, Eigen::VectorXd b) {
    AffineModel m;
    m.kind = ModelKind::kAffine;
    m.A = std::move(A);
    m.b = std::move(b);
    return m;
  }

  static AffineModel shift(Eigen::VectorXd b) {
    AffineModel m;
    m.kind = ModelKind::kShift;
    m.A = Eigen::MatrixXd::Identity(b.size(), b.size());
    m.b = std::move(b);
    return m;
  }

  static AffineModel identity(int d, ModelKind kind = ModelKind::kAffine) {
    AffineModel m;
    m.kind = kind;
    m.A = Eigen::MatrixXd::Identity(d, d);
    m.b = Eigen::VectorXd::Zero(d);
    return m;
  }

  // Parameter vector used by the error metric and by clustering:
  // rows of A first, then b (kShift: b only).
  Eigen::VectorXd parameter_vector() const;

  // Number of free parameters: d(d+1) for kAffine, d for kShift.
  int parameter_count() const;
};

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

}  // namespace otsep
