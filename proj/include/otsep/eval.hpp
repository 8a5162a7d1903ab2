#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "otsep/dynamics.hpp"
#include "otsep/measures.hpp"
#include "otsep/model.hpp"

namespace otsep {

// Per-particle trajectories with identities, for the reference estimators
// that are allowed to see more than aggregate snapshots.
struct TrajectorySet {
  std::vector<std::vector<Point>> trajectories;  // [particle][t]
  std::vector<int> labels;                       // empty when unknown
  std::vector<AffineModel> true_models;          // empty when unknown

  int size() const { return static_cast<int>(trajectories.size()); }
  int T() const { return trajectories.empty() ? 0 : static_cast<int>(trajectories[0].size()); }
  int dim() const {
    return trajectories.empty() ? 0 : static_cast<int>(trajectories[0][0].size());
  }
};

struct EvalReport {
  std::vector<int> permutation;  // permutation[estimated] = matched truth index
  double param_sq_error = 0.0;
  double classification_accuracy = 0.0;
};

// Pooled least squares per ensemble using the true labels.
std::vector<AffineModel> oracle_fit(const TrajectorySet& trajs,
                                    ModelKind kind = ModelKind::kAffine);

struct KmeansResult {
  std::vector<int> assignment;
  std::vector<Eigen::VectorXd> centroids;
  double objective = 0.0;  // within-cluster sum of squares
};

// Lloyd's algorithm, restarted; initial centroids are drawn uniformly from
// the data points, empty clusters are re-seeded from the farthest point.
// Deterministic given the seed; best restart by objective, ties toward the
// smaller restart index.
KmeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int K, int restarts,
                    std::uint64_t seed);

struct SemiOracleResult {
  std::vector<AffineModel> models;
  std::vector<int> labels;    // per trajectory
  double kmeans_objective = 0.0;
};

// Per-trajectory least squares, K-means on the parameter vectors, then a
// pooled refit per cluster. Sees trajectories but not ensemble identities.
SemiOracleResult semi_oracle_fit(const TrajectorySet& trajs, int K,
                                 int kmeans_restarts = 100, std::uint64_t seed = 0,
                                 ModelKind kind = ModelKind::kAffine);

struct PermMatch {
  std::vector<int> permutation;  // permutation[estimated] = truth index
  double param_sq_error = 0.0;
};

// Exhaustive alignment of estimated to true ensembles minimizing the total
// squared parameter distance. K <= 8.
PermMatch match_permutation(const std::vector<AffineModel>& estimated,
                            const std::vector<AffineModel>& truth);

// Fraction of (t, point) entries whose permuted predicted label matches the
// truth. Label arrays must be index-aligned.
double classification_accuracy(const std::vector<std::vector<int>>& predicted,
                               const std::vector<std::vector<int>>& truth,
                               const std::vector<int>& permutation);

}  // namespace otsep
