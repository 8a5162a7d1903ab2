#include "otsep/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <istream>
#include <ostream>
#include <utility>

#include "otsep/error.hpp"
#include "otsep/format.hpp"
#include "otsep/rng.hpp"

namespace otsep {

namespace {

void check_sim_config(const SimConfig& cfg) {
  if (cfg.d < 1) throw ValidationError("dimension must be positive");
  if (cfg.K < 1) throw ValidationError("need at least one ensemble");
  if (static_cast<int>(cfg.N.size()) != cfg.K)
    throw ValidationError("got " + std::to_string(cfg.N.size()) + " population sizes for K=" +
                          std::to_string(cfg.K));
  for (int n : cfg.N)
    if (n < 1) throw ValidationError("population sizes must be positive");
  if (cfg.T < 2) throw ValidationError("need at least two time points");
  if (!(cfg.sigma2 >= 0.0)) throw ValidationError("sigma2 must be nonnegative");
  if (!(cfg.dynamics_scale >= 0.0) || !(cfg.init_scale >= 0.0))
    throw ValidationError("scales must be nonnegative");
}

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * 2.5066282746310005024);  // sqrt(2 pi)
}

}  // namespace

SimInstance sample_instance(const SimConfig& cfg) {
  check_sim_config(cfg);
  Rng rng(cfg.seed);

  std::vector<AffineModel> models;
  models.reserve(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    Eigen::MatrixXd A(cfg.d, cfg.d);
    Eigen::VectorXd b(cfg.d);
    for (int i = 0; i < cfg.d; ++i)
      for (int j = 0; j < cfg.d; ++j) A(i, j) = cfg.dynamics_scale * rng.normal();
    for (int i = 0; i < cfg.d; ++i) b[i] = cfg.dynamics_scale * rng.normal();
    models.push_back(AffineModel::affine(A, b));
  }

  const double noise_sd = std::sqrt(cfg.sigma2);
  SimInstance out;
  out.trajectories.true_models = models;
  for (int k = 0; k < cfg.K; ++k) {
    for (int p = 0; p < cfg.N[k]; ++p) {
      std::vector<Point> traj(cfg.T);
      Point x(cfg.d);
      for (int i = 0; i < cfg.d; ++i) x[i] = cfg.init_scale * rng.normal();
      traj[0] = x;
      for (int t = 1; t < cfg.T; ++t) {
        Point y = apply(models[k], traj[t - 1]);
        for (int i = 0; i < cfg.d; ++i) y[i] += noise_sd * rng.normal();
        traj[t] = std::move(y);
      }
      out.trajectories.trajectories.push_back(std::move(traj));
      out.trajectories.labels.push_back(k);
    }
  }

  const int total = static_cast<int>(out.trajectories.trajectories.size());
  out.seq.d = cfg.d;
  out.seq.measures.resize(cfg.T);
  out.seq.particle_ids.resize(cfg.T);
  out.seq.truth_labels.resize(cfg.T);
  out.seq.truth_models = models;
  for (int t = 0; t < cfg.T; ++t) {
    DiscreteMeasure& mu = out.seq.measures[t];
    mu.points.reserve(total);
    mu.masses.assign(total, 1.0);
    out.seq.particle_ids[t].resize(total);
    out.seq.truth_labels[t].resize(total);
    for (int p = 0; p < total; ++p) {
      mu.points.push_back(out.trajectories.trajectories[p][t]);
      out.seq.particle_ids[t][p] = p;
      out.seq.truth_labels[t][p] = out.trajectories.labels[p];
    }
  }
  validate(out.seq);
  return out;
}

ObservationSequence gmm_example(const GmmConfig& cfg) {
  if (!(cfg.p > 0.0) || !(cfg.p_prime > 0.0)) throw ValidationError("mixture weights must be positive");
  if (!(cfg.sigma > 0.0) || !(cfg.sigma_prime > 0.0))
    throw ValidationError("mixture standard deviations must be positive");
  if (cfg.grid_points < 2) throw ValidationError("grid needs at least two cells");
  if (!(cfg.grid_lo < cfg.grid_hi)) throw ValidationError("grid interval is empty");

  const int M = cfg.grid_points;
  const double h = (cfg.grid_hi - cfg.grid_lo) / M;
  std::vector<double> mu(M), nu(M);
  std::vector<Point> centers(M);
  for (int i = 0; i < M; ++i) {
    const double x = cfg.grid_lo + (i + 0.5) * h;
    centers[i] = Point::Constant(1, x);
    mu[i] = (cfg.p * normal_pdf(x, cfg.a, cfg.sigma) +
             cfg.p_prime * normal_pdf(x, cfg.a_prime, cfg.sigma_prime)) * h;
    nu[i] = (cfg.p_prime * normal_pdf(x, cfg.a, cfg.sigma_prime) +
             cfg.p * normal_pdf(x, cfg.a_prime, cfg.sigma)) * h;
  }

  const double weight = cfg.p + cfg.p_prime;
  double smu = 0.0, snu = 0.0;
  for (double v : mu) smu += v;
  for (double v : nu) snu += v;
  if (smu < (1.0 - 1e-6) * weight || snu < (1.0 - 1e-6) * weight)
    throw ValidationError("grid too narrow: it carries less than 1-1e-6 of the mixture mass");

  // Rescale nu onto mu's total, then nudge its largest cell until the two
  // index-order sums agree bit for bit.
  const double scale = smu / snu;
  for (double& v : nu) v *= scale;
  int big = 0;
  for (int i = 1; i < M; ++i)
    if (nu[i] > nu[big]) big = i;
  bool equal = false;
  for (int round = 0; round < 64 && !equal; ++round) {
    double s = 0.0;
    for (double v : nu) s += v;
    if (s == smu)
      equal = true;
    else
      nu[big] += smu - s;
  }
  if (!equal) throw SolverError("mass equalization between the two snapshots did not settle");

  ObservationSequence seq;
  seq.d = 1;
  seq.measures.resize(2);
  seq.measures[0].points = centers;
  seq.measures[0].masses = std::move(mu);
  seq.measures[1].points = centers;
  seq.measures[1].masses = std::move(nu);
  seq.particle_ids.assign(2, std::vector<int>(M, -1));
  seq.truth_models.push_back(AffineModel::shift(Point::Constant(1, cfg.a_prime - cfg.a)));
  seq.truth_models.push_back(AffineModel::shift(Point::Constant(1, cfg.a - cfg.a_prime)));
  validate(seq);
  return seq;
}

const char* to_string(SweepMethod m) {
  switch (m) {
    case SweepMethod::kProposed: return "proposed";
    case SweepMethod::kOracle: return "oracle";
    case SweepMethod::kSemiOracle: return "semi_oracle";
  }
  return "unknown";
}

SweepMethod sweep_method_from_string(const std::string& s) {
  if (s == "proposed") return SweepMethod::kProposed;
  if (s == "oracle") return SweepMethod::kOracle;
  if (s == "semi_oracle" || s == "semi-oracle") return SweepMethod::kSemiOracle;
  throw ValidationError("unknown method '" + s + "'");
}

std::vector<double> SweepConfig::default_sigma2_grid() {
  std::vector<double> grid(8);
  for (int i = 0; i < 8; ++i) grid[i] = std::pow(10.0, -6.0 + 5.0 * i / 7.0);
  return grid;
}

namespace {

double pooled_residual(const TrajectorySet& trajs, const std::vector<int>& labels,
                       const std::vector<AffineModel>& models) {
  double r = 0.0;
  for (int p = 0; p < trajs.size(); ++p) {
    const AffineModel& m = models[labels[p]];
    for (int t = 0; t + 1 < trajs.T(); ++t)
      r += (apply(m, trajs.trajectories[p][t]) - trajs.trajectories[p][t + 1]).squaredNorm();
  }
  return r;
}

SweepRecord run_method(const SimInstance& inst, const SweepConfig& cfg, SweepMethod method,
                       std::uint64_t trial_seed) {
  using clock = std::chrono::steady_clock;
  const TrajectorySet& trajs = inst.trajectories;
  const std::vector<AffineModel>& truth = trajs.true_models;
  const int K = static_cast<int>(truth.size());

  SweepRecord rec;
  rec.method = method;
  const auto t0 = clock::now();
  std::vector<AffineModel> models;
  std::vector<std::vector<int>> predicted, actual;
  double objective = 0.0;
  switch (method) {
    case SweepMethod::kOracle: {
      models = oracle_fit(trajs, ModelKind::kAffine);
      objective = pooled_residual(trajs, trajs.labels, models);
      predicted.push_back(trajs.labels);
      actual.push_back(trajs.labels);
      break;
    }
    case SweepMethod::kSemiOracle: {
      SemiOracleResult semi = semi_oracle_fit(trajs, K, cfg.kmeans_restarts,
                                              Rng::derive(trial_seed, 1), ModelKind::kAffine);
      models = std::move(semi.models);
      objective = pooled_residual(trajs, semi.labels, models);
      predicted.push_back(std::move(semi.labels));
      actual.push_back(trajs.labels);
      break;
    }
    case SweepMethod::kProposed: {
      BcdOptions opts = cfg.bcd;
      opts.seed = Rng::derive(trial_seed, 2);
      SeparationSolution sol = multi_start(inst.seq, K, ModelKind::kAffine, opts);
      models = std::move(sol.models);
      objective = sol.objective();
      predicted = std::move(sol.labels);
      actual = inst.seq.truth_labels;
      break;
    }
  }
  const auto t1 = clock::now();

  const PermMatch match = match_permutation(models, truth);
  rec.param_sq_error = match.param_sq_error;
  rec.classification_accuracy = classification_accuracy(predicted, actual, match.permutation);
  rec.objective = objective;
  rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return rec;
}

}  // namespace

std::vector<SweepRecord> monte_carlo_sweep(const SweepConfig& cfg) {
  check_sim_config(cfg.base);
  if (cfg.sigma2_grid.empty()) throw ValidationError("empty sigma2 grid");
  for (double s : cfg.sigma2_grid)
    if (!(s >= 0.0)) throw ValidationError("sigma2 grid entries must be nonnegative");
  if (cfg.trials < 1) throw ValidationError("need at least one trial");
  if (cfg.methods.empty()) throw ValidationError("no methods selected");

  const int S = static_cast<int>(cfg.sigma2_grid.size());
  const int M = static_cast<int>(cfg.methods.size());
  const int cells = S * cfg.trials;
  std::vector<SweepRecord> records(static_cast<size_t>(cells) * M);
  std::vector<std::exception_ptr> errors(cells);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (int cell = 0; cell < cells; ++cell) {
    const int si = cell / cfg.trials;
    const int trial = cell % cfg.trials;
    try {
      const std::uint64_t trial_seed = Rng::derive(Rng::derive(cfg.base.seed, si), trial);
      SimConfig sim = cfg.base;
      sim.sigma2 = cfg.sigma2_grid[si];
      sim.seed = trial_seed;
      const SimInstance inst = sample_instance(sim);
      for (int mi = 0; mi < M; ++mi) {
        SweepRecord rec = run_method(inst, cfg, cfg.methods[mi], trial_seed);
        rec.sigma2 = sim.sigma2;
        rec.trial = trial;
        records[static_cast<size_t>(cell) * M + mi] = rec;
      }
    } catch (...) {
      errors[cell] = std::current_exception();
    }
  }
  for (int cell = 0; cell < cells; ++cell)
    if (errors[cell]) std::rethrow_exception(errors[cell]);
  return records;
}

void write_sweep_csv(const std::vector<SweepRecord>& records, std::ostream& out) {
  out << "sigma2,trial,method,param_sq_error,classification_accuracy,objective,wall_ms\n";
  for (const SweepRecord& r : records)
    out << format_double(r.sigma2) << ',' << r.trial << ',' << to_string(r.method) << ','
        << format_double(r.param_sq_error) << ',' << format_double(r.classification_accuracy)
        << ',' << format_double(r.objective) << ',' << format_double(r.wall_ms) << "\n";
}

std::vector<SweepRecord> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty sweep file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "sigma2,trial,method,param_sq_error,classification_accuracy,objective,wall_ms")
    throw ValidationError("unexpected sweep header '" + line + "'");
  std::vector<SweepRecord> records;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string ctx = "sweep line " + std::to_string(lineno);
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) throw ValidationError(ctx + ": expected 7 fields");
    SweepRecord r;
    r.sigma2 = parse_double_strict(fields[0], ctx);
    r.trial = static_cast<int>(parse_long_strict(fields[1], ctx));
    r.method = sweep_method_from_string(std::string(fields[2]));
    r.param_sq_error = parse_double_strict(fields[3], ctx);
    r.classification_accuracy = parse_double_strict(fields[4], ctx);
    r.objective = parse_double_strict(fields[5], ctx);
    r.wall_ms = parse_double_strict(fields[6], ctx);
    records.push_back(r);
  }
  return records;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("quantile of an empty sample");
  if (!(q >= 0.0) || !(q <= 1.0)) throw ValidationError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<SweepAggregate> aggregate_sweep(const std::vector<SweepRecord>& records) {
  std::vector<std::pair<double, SweepMethod>> keys;
  std::vector<std::vector<double>> errs, accs;
  auto slot = [&](double sigma2, SweepMethod m) -> size_t {
    for (size_t i = 0; i < keys.size(); ++i)
      if (keys[i].first == sigma2 && keys[i].second == m) return i;
    keys.emplace_back(sigma2, m);
    errs.emplace_back();
    accs.emplace_back();
    return keys.size() - 1;
  };
  for (const SweepRecord& r : records) {
    const size_t i = slot(r.sigma2, r.method);
    errs[i].push_back(r.param_sq_error);
    accs[i].push_back(r.classification_accuracy);
  }
  std::vector<SweepAggregate> out(keys.size());
  for (size_t i = 0; i < keys.size(); ++i) {
    SweepAggregate& a = out[i];
    a.sigma2 = keys[i].first;
    a.method = keys[i].second;
    a.err_median = quantile(errs[i], 0.5);
    a.err_p5 = quantile(errs[i], 0.05);
    a.err_p95 = quantile(errs[i], 0.95);
    a.acc_median = quantile(accs[i], 0.5);
    a.acc_p5 = quantile(accs[i], 0.05);
    a.acc_p95 = quantile(accs[i], 0.95);
  }
  return out;
}

void write_aggregate_csv(const std::vector<SweepAggregate>& rows, std::ostream& out) {
  out << "sigma2,method,err_median,err_p5,err_p95,acc_median,acc_p5,acc_p95\n";
  for (const SweepAggregate& a : rows)
    out << format_double(a.sigma2) << ',' << to_string(a.method) << ','
        << format_double(a.err_median) << ',' << format_double(a.err_p5) << ','
        << format_double(a.err_p95) << ',' << format_double(a.acc_median) << ','
        << format_double(a.acc_p5) << ',' << format_double(a.acc_p95) << "\n";
}

}  // namespace otsep
