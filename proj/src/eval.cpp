#include "otsep/eval.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "otsep/error.hpp"
#include "otsep/rng.hpp"

namespace otsep {

namespace {

void check_trajectories(const TrajectorySet& trajs) {
  if (trajs.trajectories.empty()) throw ValidationError("empty trajectory set");
  const int T = trajs.T();
  if (T < 2) throw ValidationError("trajectories need at least two time points");
  const int d = trajs.dim();
  if (d < 1) throw ValidationError("trajectories need dimension >= 1");
  for (const auto& traj : trajs.trajectories) {
    if (static_cast<int>(traj.size()) != T)
      throw ValidationError("trajectories differ in length");
    for (const Point& p : traj)
      if (static_cast<int>(p.size()) != d) throw ValidationError("trajectories differ in dimension");
  }
}

AffineModel model_from_parameter_vector(const Eigen::VectorXd& v, int d, ModelKind kind) {
  if (kind == ModelKind::kShift) return AffineModel::shift(v);
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = v[i * d + j];
  return AffineModel::affine(A, v.tail(d));
}

}  // namespace

std::vector<AffineModel> oracle_fit(const TrajectorySet& trajs, ModelKind kind) {
  check_trajectories(trajs);
  if (trajs.labels.size() != trajs.trajectories.size())
    throw ValidationError("oracle fit needs a true label per trajectory");
  int K = 0;
  for (int lab : trajs.labels) {
    if (lab < 0) throw ValidationError("negative trajectory label");
    K = std::max(K, lab + 1);
  }
  const int T = trajs.T();
  std::vector<AffineModel> models;
  models.reserve(K);
  for (int k = 0; k < K; ++k) {
    MomentAccumulator acc(trajs.dim());
    for (int p = 0; p < trajs.size(); ++p) {
      if (trajs.labels[p] != k) continue;
      for (int t = 0; t + 1 < T; ++t)
        acc.add(trajs.trajectories[p][t], trajs.trajectories[p][t + 1], 1.0);
    }
    if (!(acc.total_weight() > 0.0))
      throw ValidationError("ensemble " + std::to_string(k) + " has no trajectories");
    models.push_back(acc.fit(kind));
  }
  return models;
}

KmeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int K, int restarts,
                    std::uint64_t seed) {
  const int n = static_cast<int>(points.size());
  if (n < 1) throw ValidationError("k-means needs at least one point");
  if (K < 1) throw ValidationError("k-means needs at least one cluster");
  if (K > n)
    throw ValidationError("K=" + std::to_string(K) + " exceeds the " + std::to_string(n) +
                          " points");
  if (restarts < 1) throw ValidationError("k-means needs at least one restart");
  const int dim = static_cast<int>(points[0].size());
  for (const auto& p : points)
    if (static_cast<int>(p.size()) != dim) throw ValidationError("k-means points differ in dimension");

  constexpr int kMaxLloydIters = 500;
  KmeansResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(Rng::derive(seed, r));
    std::vector<Eigen::VectorXd> centroids(K);
    for (int k = 0; k < K; ++k) centroids[k] = points[rng.below(n)];

    std::vector<int> assign(n, -1);
    std::vector<double> dist(n, 0.0);
    for (int iter = 0; iter < kMaxLloydIters; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double d0 = (points[i] - centroids[0]).squaredNorm();
        for (int k = 1; k < K; ++k) {
          const double dk = (points[i] - centroids[k]).squaredNorm();
          if (dk < d0) {
            d0 = dk;
            arg = k;
          }
        }
        if (assign[i] != arg) changed = true;
        assign[i] = arg;
        dist[i] = d0;
      }
      std::vector<int> count(K, 0);
      std::vector<Eigen::VectorXd> sums(K, Eigen::VectorXd::Zero(dim));
      for (int i = 0; i < n; ++i) {
        sums[assign[i]] += points[i];
        ++count[assign[i]];
      }
      for (int k = 0; k < K; ++k) {
        if (count[k] > 0) {
          centroids[k] = sums[k] / count[k];
        } else {
          // empty cluster: restart it at the point farthest from its centroid
          int far = 0;
          for (int i = 1; i < n; ++i)
            if (dist[i] > dist[far]) far = i;
          centroids[k] = points[far];
          assign[far] = k;
          dist[far] = 0.0;
          changed = true;
        }
      }
      if (!changed) break;
    }

    double obj = 0.0;
    for (int i = 0; i < n; ++i) obj += (points[i] - centroids[assign[i]]).squaredNorm();
    if (obj < best.objective) {
      best.objective = obj;
      best.assignment = assign;
      best.centroids = centroids;
    }
  }
  return best;
}

SemiOracleResult semi_oracle_fit(const TrajectorySet& trajs, int K, int kmeans_restarts,
                                 std::uint64_t seed, ModelKind kind) {
  check_trajectories(trajs);
  if (K < 1) throw ValidationError("need at least one ensemble");
  if (K > trajs.size())
    throw ValidationError("K=" + std::to_string(K) + " exceeds the " +
                          std::to_string(trajs.size()) + " trajectories");
  const int T = trajs.T();
  const int d = trajs.dim();

  std::vector<Eigen::VectorXd> params;
  params.reserve(trajs.size());
  for (int p = 0; p < trajs.size(); ++p) {
    MomentAccumulator acc(d);
    for (int t = 0; t + 1 < T; ++t)
      acc.add(trajs.trajectories[p][t], trajs.trajectories[p][t + 1], 1.0);
    params.push_back(acc.fit(kind).parameter_vector());
  }

  const KmeansResult km = kmeans(params, K, kmeans_restarts, seed);

  SemiOracleResult out;
  out.labels = km.assignment;
  out.kmeans_objective = km.objective;
  out.models.reserve(K);
  for (int k = 0; k < K; ++k) {
    MomentAccumulator acc(d);
    for (int p = 0; p < trajs.size(); ++p) {
      if (km.assignment[p] != k) continue;
      for (int t = 0; t + 1 < T; ++t)
        acc.add(trajs.trajectories[p][t], trajs.trajectories[p][t + 1], 1.0);
    }
    if (acc.total_weight() > 0.0)
      out.models.push_back(acc.fit(kind));
    else
      out.models.push_back(model_from_parameter_vector(km.centroids[k], d, kind));
  }
  return out;
}

PermMatch match_permutation(const std::vector<AffineModel>& estimated,
                            const std::vector<AffineModel>& truth) {
  const int K = static_cast<int>(estimated.size());
  if (K < 1 || truth.size() != estimated.size())
    throw ValidationError("permutation matching needs equal nonempty model lists");
  if (K > 8) throw ValidationError("permutation matching is exhaustive and limited to K <= 8");
  std::vector<Eigen::VectorXd> ve, vt;
  for (const AffineModel& m : estimated) ve.push_back(m.parameter_vector());
  for (const AffineModel& m : truth) vt.push_back(m.parameter_vector());
  for (int k = 0; k < K; ++k)
    if (ve[k].size() != vt[0].size() || vt[k].size() != vt[0].size())
      throw ValidationError("model parameter vectors differ in length");

  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  PermMatch best;
  best.param_sq_error = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int k = 0; k < K; ++k) cost += (ve[k] - vt[perm[k]]).squaredNorm();
    if (cost < best.param_sq_error) {
      best.param_sq_error = cost;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double classification_accuracy(const std::vector<std::vector<int>>& predicted,
                               const std::vector<std::vector<int>>& truth,
                               const std::vector<int>& permutation) {
  if (predicted.size() != truth.size())
    throw ValidationError("label tables differ in time extent");
  long total = 0, hits = 0;
  for (size_t t = 0; t < predicted.size(); ++t) {
    if (predicted[t].size() != truth[t].size())
      throw ValidationError("label tables differ at t=" + std::to_string(t + 1));
    for (size_t i = 0; i < predicted[t].size(); ++i) {
      const int p = predicted[t][i];
      if (p < 0 || p >= static_cast<int>(permutation.size()))
        throw ValidationError("predicted label out of range of the permutation");
      ++total;
      if (permutation[p] == truth[t][i]) ++hits;
    }
  }
  if (total == 0) throw ValidationError("no labels to score");
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace otsep
