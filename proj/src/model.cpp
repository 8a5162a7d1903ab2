#include "otsep/model.hpp"

#include <string>

#include "otsep/error.hpp"

namespace otsep {

Eigen::VectorXd AffineModel::parameter_vector() const {
  const int d = dim();
  if (kind == ModelKind::kShift) return b;
  Eigen::VectorXd v(d * (d + 1));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) v[i * d + j] = A(i, j);
  v.tail(d) = b;
  return v;
}

int AffineModel::parameter_count() const {
  const int d = dim();
  return kind == ModelKind::kShift ? d : d * (d + 1);
}

const char* to_string(ModelKind kind) {
  return kind == ModelKind::kShift ? "shift" : "affine";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "affine") return ModelKind::kAffine;
  if (s == "shift") return ModelKind::kShift;
  throw ValidationError("unknown model kind '" + s + "' (expected affine or shift)");
}

}  // namespace otsep
