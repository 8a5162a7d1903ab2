#include "otsep/bcd.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "otsep/error.hpp"
#include "otsep/parallel.hpp"
#include "otsep/rng.hpp"

namespace otsep {

namespace {

using nlohmann::json;

void check_options(const BcdOptions& opts) {
  if (opts.max_iters < 1) throw ValidationError("max_iters must be positive");
  if (!(opts.rel_tol >= 0.0) || opts.rel_tol >= 1.0)
    throw ValidationError("rel_tol must lie in [0, 1)");
  if (opts.restarts < 1) throw ValidationError("restarts must be positive");
  if (!(opts.init_scale > 0.0)) throw ValidationError("init_scale must be positive");
}

std::vector<AffineModel> check_init(const ObservationSequence& seq, int K, ModelKind kind,
                                    const std::vector<AffineModel>& init) {
  if (static_cast<int>(init.size()) != K)
    throw ValidationError("got " + std::to_string(init.size()) + " initial models, expected " +
                          std::to_string(K));
  std::vector<AffineModel> models;
  models.reserve(K);
  for (const AffineModel& m : init) {
    if (m.b.size() != seq.d)
      throw ValidationError("initial model dimension does not match the data");
    if (kind == ModelKind::kShift) {
      models.push_back(AffineModel::shift(m.b));
    } else {
      if (m.A.rows() != seq.d || m.A.cols() != seq.d)
        throw ValidationError("initial model dimension does not match the data");
      models.push_back(AffineModel::affine(m.A, m.b));
    }
  }
  return models;
}

std::vector<AffineModel> draw_init(int K, int d, ModelKind kind, double scale, Rng rng) {
  std::vector<AffineModel> models;
  models.reserve(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd b(d);
    if (kind == ModelKind::kAffine) {
      Eigen::MatrixXd A(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = scale * rng.normal();
      for (int i = 0; i < d; ++i) b[i] = scale * rng.normal();
      models.push_back(AffineModel::affine(A, b));
    } else {
      for (int i = 0; i < d; ++i) b[i] = scale * rng.normal();
      models.push_back(AffineModel::shift(b));
    }
  }
  return models;
}

json model_to_json(const AffineModel& m) {
  json j;
  j["kind"] = to_string(m.kind);
  j["b"] = std::vector<double>(m.b.data(), m.b.data() + m.b.size());
  if (m.kind == ModelKind::kAffine) {
    json rows = json::array();
    for (int i = 0; i < m.A.rows(); ++i)
      rows.push_back(std::vector<double>(m.A.row(i).begin(), m.A.row(i).end()));
    j["A"] = rows;
  }
  return j;
}

AffineModel model_from_json(const json& j) {
  const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
  const auto bvec = j.at("b").get<std::vector<double>>();
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(bvec.data(), bvec.size());
  if (kind == ModelKind::kShift) return AffineModel::shift(b);
  const json& rows = j.at("A");
  const int d = static_cast<int>(b.size());
  if (static_cast<int>(rows.size()) != d) throw ValidationError("model matrix is not square");
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i) {
    const auto row = rows.at(i).get<std::vector<double>>();
    if (static_cast<int>(row.size()) != d) throw ValidationError("model matrix is not square");
    for (int j2 = 0; j2 < d; ++j2) A(i, j2) = row[j2];
  }
  return AffineModel::affine(A, b);
}

void check_problem(const ObservationSequence& seq, int K, const BcdOptions& opts) {
  validate(seq);
  check_options(opts);
  if (K < 1) throw ValidationError("need at least one ensemble");
  for (int t = 0; t < seq.T(); ++t)
    if (K > seq.measures[t].size())
      throw ValidationError("K=" + std::to_string(K) + " exceeds the " +
                            std::to_string(seq.measures[t].size()) + " points at t=" +
                            std::to_string(t + 1));
}

SeparationSolution bcd_fit_with(CoupledSolver& solver, const ObservationSequence& seq, int K,
                                ModelKind kind, const std::vector<AffineModel>& init,
                                const BcdOptions& opts) {
  SeparationSolution sol;
  sol.models = check_init(seq, K, kind, init);

  const int T = seq.T();
  std::vector<std::vector<CostMatrix>> costs(K, std::vector<CostMatrix>(T - 1));
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    for (int k = 0; k < K; ++k)
      for (int t = 0; t + 1 < T; ++t)
        costs[k][t] = cost_matrix(sol.models[k], seq.measures[t], seq.measures[t + 1]);
    sol.plans = solver.solve(costs);
    sol.objective_trace.push_back(sol.plans.objective);

    const size_t len = sol.objective_trace.size();
    if (len >= 2) {
      const double prev = sol.objective_trace[len - 2];
      const double cur = sol.objective_trace[len - 1];
      if ((prev - cur) / std::max(std::abs(prev), 1e-300) < opts.rel_tol) {
        sol.converged = true;
        break;
      }
    }

    // step 2: weighted LS refit per ensemble from the plan weights
    std::vector<double> mass(K, 0.0);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      for (int t = 0; t + 1 < T; ++t) mass[k] += sol.plans.plans[k][t].sum();
      total += mass[k];
    }
    for (int k = 0; k < K; ++k) {
      if (mass[k] < 1e-12 * total) continue;  // vanished ensemble keeps its parameters
      MomentAccumulator acc(seq.d);
      for (int t = 0; t + 1 < T; ++t) {
        const Eigen::MatrixXd& p = sol.plans.plans[k][t];
        for (int i = 0; i < p.rows(); ++i)
          for (int j = 0; j < p.cols(); ++j)
            if (p(i, j) != 0.0)
              acc.add(seq.measures[t].points[i], seq.measures[t + 1].points[j], p(i, j));
      }
      sol.models[k] = acc.fit(kind);
    }
  }

  sol.labels = extract_labels(sol.plans);
  sol.restart_index = 0;
  return sol;
}

}  // namespace

SeparationSolution bcd_fit(const ObservationSequence& seq, int K, ModelKind kind,
                           const std::vector<AffineModel>& init, const BcdOptions& opts) {
  check_problem(seq, K, opts);
  CoupledSolver solver(seq, K);
  return bcd_fit_with(solver, seq, K, kind, init, opts);
}

SeparationSolution multi_start(const ObservationSequence& seq, int K, ModelKind kind,
                               const BcdOptions& opts) {
  check_problem(seq, K, opts);
  const int R = opts.restarts;
  std::vector<SeparationSolution> results(R);
  std::vector<std::exception_ptr> errors(R);

  // The first restart runs alone and donates its terminal basis: every later
  // restart warm-starts the transport solve from there instead of paying the
  // cold start again. Each restart still owns its solver, so results do not
  // depend on how the loop is scheduled.
  std::vector<int> shared_basis;
  {
    try {
      const std::vector<AffineModel> init =
          draw_init(K, seq.d, kind, opts.init_scale, Rng(Rng::derive(opts.seed, 0)));
      CoupledSolver solver(seq, K);
      results[0] = bcd_fit_with(solver, seq, K, kind, init, opts);
      shared_basis = solver.last_basis();
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (int r = 1; r < R; ++r) {
    try {
      const std::vector<AffineModel> init =
          draw_init(K, seq.d, kind, opts.init_scale, Rng(Rng::derive(opts.seed, r)));
      CoupledSolver solver(seq, K);
      solver.seed_basis(shared_basis);
      results[r] = bcd_fit_with(solver, seq, K, kind, init, opts);
      results[r].restart_index = r;
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (int r = 0; r < R; ++r)
    if (errors[r]) std::rethrow_exception(errors[r]);

  int best = 0;
  for (int r = 1; r < R; ++r)
    if (results[r].objective() < results[best].objective()) best = r;
  return std::move(results[best]);
}

std::vector<std::vector<int>> extract_labels(const CoupledPlanSet& plans) {
  const int K = plans.K();
  if (K == 0) return {};
  const int T = static_cast<int>(plans.marginals[0].size());
  std::vector<std::vector<int>> labels(T);
  for (int t = 0; t < T; ++t) {
    const int n = static_cast<int>(plans.marginals[0][t].size());
    labels[t].resize(n);
    for (int i = 0; i < n; ++i) {
      int arg = 0;
      double best = plans.marginals[0][t][i];
      for (int k = 1; k < K; ++k)
        if (plans.marginals[k][t][i] > best) {
          best = plans.marginals[k][t][i];
          arg = k;
        }
      labels[t][i] = arg;
    }
  }
  return labels;
}

void save_solution(const SeparationSolution& sol, const std::string& path, bool include_plans) {
  json j;
  j["models"] = json::array();
  for (const AffineModel& m : sol.models) j["models"].push_back(model_to_json(m));
  j["objective_trace"] = sol.objective_trace;
  j["labels"] = sol.labels;
  j["converged"] = sol.converged;
  j["restart_index"] = sol.restart_index;
  j["objective"] = sol.objective();
  if (include_plans) {
    json plans = json::array();
    json margs = json::array();
    for (int k = 0; k < sol.plans.K(); ++k) {
      json pk = json::array();
      for (const Eigen::MatrixXd& p : sol.plans.plans[k]) {
        json rows = json::array();
        for (int i = 0; i < p.rows(); ++i)
          rows.push_back(std::vector<double>(p.row(i).begin(), p.row(i).end()));
        pk.push_back(std::move(rows));
      }
      plans.push_back(std::move(pk));
      json mk = json::array();
      for (const Eigen::VectorXd& mu : sol.plans.marginals[k])
        mk.push_back(std::vector<double>(mu.data(), mu.data() + mu.size()));
      margs.push_back(std::move(mk));
    }
    j["plans"] = {{"objective", sol.plans.objective},
                  {"plans", std::move(plans)},
                  {"marginals", std::move(margs)}};
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
  if (!f) throw IoError("write failed for '" + path + "'");
}

SeparationSolution load_solution(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not a valid solution file: " + e.what());
  }
  SeparationSolution sol;
  try {
    for (const json& m : j.at("models")) sol.models.push_back(model_from_json(m));
    sol.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    sol.labels = j.at("labels").get<std::vector<std::vector<int>>>();
    sol.converged = j.at("converged").get<bool>();
    sol.restart_index = j.at("restart_index").get<int>();
    if (j.contains("plans")) {
      const json& jp = j.at("plans");
      sol.plans.objective = jp.at("objective").get<double>();
      for (const json& pk : jp.at("plans")) {
        std::vector<Eigen::MatrixXd> mats;
        for (const json& pm : pk) {
          const auto rows = pm.get<std::vector<std::vector<double>>>();
          const int nr = static_cast<int>(rows.size());
          const int nc = nr > 0 ? static_cast<int>(rows[0].size()) : 0;
          Eigen::MatrixXd mat(nr, nc);
          for (int i = 0; i < nr; ++i) {
            if (static_cast<int>(rows[i].size()) != nc)
              throw ValidationError("ragged plan matrix in '" + path + "'");
            for (int c = 0; c < nc; ++c) mat(i, c) = rows[i][c];
          }
          mats.push_back(std::move(mat));
        }
        sol.plans.plans.push_back(std::move(mats));
      }
      for (const json& mk : jp.at("marginals")) {
        std::vector<Eigen::VectorXd> vecs;
        for (const json& mv : mk) {
          const auto v = mv.get<std::vector<double>>();
          vecs.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
        }
        sol.plans.marginals.push_back(std::move(vecs));
      }
    } else if (!sol.objective_trace.empty()) {
      sol.plans.objective = sol.objective_trace.back();
    }
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not a valid solution file: " + e.what());
  }
  return sol;
}

}  // namespace otsep
