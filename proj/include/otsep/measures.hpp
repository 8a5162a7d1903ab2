#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otsep/model.hpp"

namespace otsep {

using Point = Eigen::VectorXd;

// A finite nonnegative measure: support points with masses.
struct DiscreteMeasure {
  std::vector<Point> points;
  std::vector<double> masses;

  int size() const { return static_cast<int>(points.size()); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }
  double total_mass() const;
};

// Aggregate snapshots of a particle population at T time points, optionally
// with ground truth attached for evaluation. Particle ids and labels are
// never consumed by the solver; they exist for baselines and metrics only.
struct ObservationSequence {
  int d = 0;
  std::vector<DiscreteMeasure> measures;        // one per time point, size T >= 2
  std::vector<std::vector<int>> particle_ids;   // [t][i], -1 when unknown
  std::vector<std::vector<int>> truth_labels;   // empty when absent, else [t][i]
  std::vector<AffineModel> truth_models;        // empty when absent

  int T() const { return static_cast<int>(measures.size()); }
  bool has_labels() const { return !truth_labels.empty(); }
  int points_at(int t) const { return measures[t].size(); }
};

// Relative tolerance for the constant-total-mass requirement across time.
inline constexpr double kMassBalanceRelTol = 1e-9;

// Throws ValidationError listing every violated invariant (offending time
// indices are 1-based in messages, matching the file format).
void validate(const ObservationSequence& seq);

// CSV with header t,particle_id,x_0,...,x_{d-1},mass[,label]. Rows may appear
// in any order; within one time point the row order defines the point order.
ObservationSequence load_dataset(const std::string& path);

// Inverse of load_dataset: load(save(x)) == x field for field. Values are
// rendered with shortest round-trip precision.
void save_dataset(const ObservationSequence& seq, const std::string& path);

}  // namespace otsep
