#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "otsep/bcd.hpp"
#include "otsep/dynamics.hpp"
#include "otsep/error.hpp"
#include "otsep/eval.hpp"
#include "otsep/format.hpp"
#include "otsep/measures.hpp"
#include "otsep/parallel.hpp"
#include "otsep/synth.hpp"
#include "otsep/transport.hpp"

namespace {

using namespace otsep;
using nlohmann::json;

std::vector<int> parse_sizes(const std::string& s) {
  std::vector<int> out;
  for (const auto f : split_csv_line(s))
    out.push_back(static_cast<int>(parse_long_strict(f, "--sizes")));
  return out;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  for (const auto f : split_csv_line(s)) out.push_back(parse_double_strict(f, "--sigma2-grid"));
  return out;
}

std::vector<SweepMethod> parse_methods(const std::string& s) {
  std::vector<SweepMethod> out;
  for (const auto f : split_csv_line(s)) out.push_back(sweep_method_from_string(std::string(f)));
  return out;
}

std::string join_sizes(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_grid(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

std::string join_methods(const std::vector<SweepMethod>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += to_string(v[i]);
  }
  return s;
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
  Eigen::MatrixXd A(rows.size(), b.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto row = rows[i].get<std::vector<double>>();
    if (row.size() != static_cast<size_t>(b.size()))
      throw ValidationError("ragged matrix in model file");
    A.row(i) = Eigen::Map<const Eigen::VectorXd>(row.data(), row.size());
  }
  return AffineModel::affine(A, b);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void write_truth(const std::vector<AffineModel>& models, const std::string& path) {
  json j;
  j["models"] = json::array();
  for (const AffineModel& m : models) j["models"].push_back(model_to_json(m));
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<AffineModel> load_truth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not a valid truth file: " + e.what());
  }
  std::vector<AffineModel> models;
  try {
    for (const json& mj : j.at("models")) models.push_back(model_from_json(mj));
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not a valid truth file: " + e.what());
  }
  if (models.empty()) throw ValidationError("'" + path + "' holds no models");
  return models;
}

void echo_config(const std::string& line) { std::cerr << line << "\n"; }

struct SimulateArgs {
  SimConfig cfg;
  std::string sizes = "10,12,15";
  std::string output;
  std::string truth_out;
};

void run_simulate(SimulateArgs& a) {
  a.cfg.N = parse_sizes(a.sizes);
  a.cfg.K = static_cast<int>(a.cfg.N.size());
  if (a.truth_out.empty()) a.truth_out = a.output + ".truth.json";
  std::ostringstream cfgline;
  cfgline << "config: simulate seed=" << a.cfg.seed << " d=" << a.cfg.d
          << " sizes=" << join_sizes(a.cfg.N) << " T=" << a.cfg.T
          << " sigma2=" << format_double(a.cfg.sigma2)
          << " dynamics-scale=" << format_double(a.cfg.dynamics_scale)
          << " init-scale=" << format_double(a.cfg.init_scale) << " output=" << a.output
          << " truth-out=" << a.truth_out;
  echo_config(cfgline.str());

  const SimInstance inst = sample_instance(a.cfg);
  save_dataset(inst.seq, a.output);
  write_truth(inst.seq.truth_models, a.truth_out);
  std::cerr << "wrote " << a.output << " (" << inst.trajectories.size() << " particles, T="
            << a.cfg.T << ") and " << a.truth_out << "\n";
}

struct FitArgs {
  std::string input;
  std::string output;
  int K = 3;
  std::string kind = "affine";
  BcdOptions opts;
  bool include_plans = false;
  std::string dump_lp_path;
};

void run_fit(FitArgs& a) {
  const ModelKind kind = model_kind_from_string(a.kind);
  std::ostringstream cfgline;
  cfgline << "config: fit input=" << a.input << " output=" << a.output << " k=" << a.K
          << " kind=" << a.kind << " restarts=" << a.opts.restarts << " seed=" << a.opts.seed
          << " tol=" << format_double(a.opts.rel_tol) << " max-iters=" << a.opts.max_iters
          << " init-scale=" << format_double(a.opts.init_scale)
          << " include-plans=" << (a.include_plans ? 1 : 0);
  echo_config(cfgline.str());

  const ObservationSequence seq = load_dataset(a.input);
  const SeparationSolution sol = multi_start(seq, a.K, kind, a.opts);
  save_solution(sol, a.output, a.include_plans);
  if (!a.dump_lp_path.empty()) {
    std::vector<std::vector<CostMatrix>> costs(a.K);
    for (int k = 0; k < a.K; ++k)
      for (int t = 0; t + 1 < seq.T(); ++t)
        costs[k].push_back(cost_matrix(sol.models[k], seq.measures[t], seq.measures[t + 1]));
    std::ofstream out = open_out(a.dump_lp_path);
    dump_lp(build_coupled_lp(seq, costs), out);
    if (!out) throw IoError("failed writing '" + a.dump_lp_path + "'");
  }
  std::cerr << "objective " << format_double(sol.objective()) << " after "
            << sol.objective_trace.size() << " iterations ("
            << (sol.converged ? "converged" : "iteration limit") << ", restart "
            << sol.restart_index << "); wrote " << a.output << "\n";
}

struct EvaluateArgs {
  std::string solution;
  std::string data;
  std::string truth;
};

void run_evaluate(EvaluateArgs& a) {
  echo_config("config: evaluate solution=" + a.solution + " data=" + a.data +
              " truth=" + a.truth);
  const SeparationSolution sol = load_solution(a.solution);
  const ObservationSequence seq = load_dataset(a.data);
  if (!seq.has_labels())
    throw ValidationError("dataset '" + a.data + "' carries no ground-truth labels");
  const std::vector<AffineModel> truth_models = load_truth(a.truth);
  const PermMatch match = match_permutation(sol.models, truth_models);
  const double acc = classification_accuracy(sol.labels, seq.truth_labels, match.permutation);
  std::string perm;
  for (size_t i = 0; i < match.permutation.size(); ++i) {
    if (i) perm += ';';
    perm += std::to_string(match.permutation[i]);
  }
  std::cout << "param_sq_error,classification_accuracy,permutation\n"
            << format_double(match.param_sq_error) << ',' << format_double(acc) << ',' << perm
            << "\n";
}

struct SweepArgs {
  SweepConfig cfg;
  std::string sizes = "10,12,15";
  std::string grid;
  std::string methods = "proposed,oracle,semi_oracle";
  std::string output;
  std::string aggregate_out;
};

void run_sweep(SweepArgs& a) {
  a.cfg.base.N = parse_sizes(a.sizes);
  a.cfg.base.K = static_cast<int>(a.cfg.base.N.size());
  if (!a.grid.empty()) a.cfg.sigma2_grid = parse_grid(a.grid);
  a.cfg.methods = parse_methods(a.methods);
  std::ostringstream cfgline;
  cfgline << "config: sweep seed=" << a.cfg.base.seed << " d=" << a.cfg.base.d
          << " sizes=" << join_sizes(a.cfg.base.N) << " T=" << a.cfg.base.T
          << " trials=" << a.cfg.trials << " sigma2-grid=" << join_grid(a.cfg.sigma2_grid)
          << " methods=" << join_methods(a.cfg.methods) << " restarts=" << a.cfg.bcd.restarts
          << " tol=" << format_double(a.cfg.bcd.rel_tol) << " max-iters=" << a.cfg.bcd.max_iters
          << " kmeans-restarts=" << a.cfg.kmeans_restarts << " output=" << a.output
          << (a.aggregate_out.empty() ? "" : " aggregate-out=" + a.aggregate_out);
  echo_config(cfgline.str());

  const std::vector<SweepRecord> records = monte_carlo_sweep(a.cfg);
  {
    std::ofstream out = open_out(a.output);
    write_sweep_csv(records, out);
    if (!out) throw IoError("failed writing '" + a.output + "'");
  }
  if (!a.aggregate_out.empty()) {
    std::ofstream out = open_out(a.aggregate_out);
    write_aggregate_csv(aggregate_sweep(records), out);
    if (!out) throw IoError("failed writing '" + a.aggregate_out + "'");
  }
  std::cerr << "wrote " << records.size() << " records to " << a.output << "\n";
}

struct GmmArgs {
  GmmArgs() { opts.restarts = 40; }  // wide shifts need many basins probed
  GmmConfig cfg;
  int K = 2;
  std::string kind = "shift";
  BcdOptions opts;
  double init_scale = 0.0;  // 0 means half the grid width
  std::string prefix = "gmm";
};

void run_example_gmm(GmmArgs& a) {
  const ModelKind kind = model_kind_from_string(a.kind);
  if (a.init_scale != 0.0)
    a.opts.init_scale = a.init_scale;
  else
    a.opts.init_scale = 0.5 * (a.cfg.grid_hi - a.cfg.grid_lo);
  std::ostringstream cfgline;
  cfgline << "config: example-gmm p=" << format_double(a.cfg.p)
          << " p-prime=" << format_double(a.cfg.p_prime) << " a=" << format_double(a.cfg.a)
          << " a-prime=" << format_double(a.cfg.a_prime) << " sigma=" << format_double(a.cfg.sigma)
          << " sigma-prime=" << format_double(a.cfg.sigma_prime)
          << " grid-lo=" << format_double(a.cfg.grid_lo)
          << " grid-hi=" << format_double(a.cfg.grid_hi) << " grid-points=" << a.cfg.grid_points
          << " k=" << a.K << " kind=" << a.kind << " restarts=" << a.opts.restarts
          << " init-scale=" << format_double(a.opts.init_scale)
          << " tol=" << format_double(a.opts.rel_tol) << " max-iters=" << a.opts.max_iters
          << " seed=" << a.opts.seed << " out-prefix=" << a.prefix;
  echo_config(cfgline.str());

  const ObservationSequence seq = gmm_example(a.cfg);
  save_dataset(seq, a.prefix + "_data.csv");

  const std::string plan_path = a.prefix + "_plan.csv";
  if (a.K == 1) {
    const AffineModel id = AffineModel::identity(1, kind);
    const TransportPlan plan =
        solve_classic_ot(cost_matrix(id, seq.measures[0], seq.measures[1]), seq.measures[0],
                         seq.measures[1]);
    std::ofstream out = open_out(plan_path);
    out << "ensemble,source_x,target_x,mass\n";
    for (int i = 0; i < plan.plan.rows(); ++i)
      for (int j = 0; j < plan.plan.cols(); ++j)
        if (plan.plan(i, j) != 0.0)
          out << "0," << format_double(seq.measures[0].points[i][0]) << ','
              << format_double(seq.measures[1].points[j][0]) << ','
              << format_double(plan.plan(i, j)) << "\n";
    if (!out) throw IoError("failed writing '" + plan_path + "'");
    std::cout << "classic transport objective " << format_double(plan.objective) << "\n";
    std::cerr << "wrote " << a.prefix << "_data.csv and " << plan_path << "\n";
    return;
  }

  const SeparationSolution sol = multi_start(seq, a.K, kind, a.opts);
  save_solution(sol, a.prefix + "_solution.json");
  {
    std::ofstream out = open_out(plan_path);
    out << "ensemble,source_x,target_x,mass\n";
    for (int k = 0; k < a.K; ++k) {
      const Eigen::MatrixXd& plan = sol.plans.plans[k][0];
      for (int i = 0; i < plan.rows(); ++i)
        for (int j = 0; j < plan.cols(); ++j)
          if (plan(i, j) != 0.0)
            out << k << ',' << format_double(seq.measures[0].points[i][0]) << ','
                << format_double(seq.measures[1].points[j][0]) << ','
                << format_double(plan(i, j)) << "\n";
    }
    if (!out) throw IoError("failed writing '" + plan_path + "'");
  }
  std::cout << "objective " << format_double(sol.objective()) << "\n";
  for (int k = 0; k < a.K; ++k) {
    const Eigen::VectorXd v = sol.models[k].parameter_vector();
    std::cout << "model " << k << ": " << to_string(sol.models[k].kind);
    for (int i = 0; i < v.size(); ++i) std::cout << ' ' << format_double(v[i]);
    std::cout << "\n";
  }
  std::cerr << "wrote " << a.prefix << "_data.csv, " << a.prefix << "_solution.json and "
            << plan_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble separation and dynamics identification from aggregate snapshots"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (0 keeps the runtime default)");

  SimulateArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "draw a synthetic dataset");
  sim->add_option("--seed", sim_args.cfg.seed, "random seed");
  sim->add_option("--d", sim_args.cfg.d, "state dimension");
  sim->add_option("--sizes", sim_args.sizes, "comma-separated particles per ensemble");
  sim->add_option("--T", sim_args.cfg.T, "number of time points");
  sim->add_option("--sigma2", sim_args.cfg.sigma2, "state-noise variance");
  sim->add_option("--dynamics-scale", sim_args.cfg.dynamics_scale, "scale of the drawn dynamics");
  sim->add_option("--init-scale", sim_args.cfg.init_scale, "scale of the initial states");
  sim->add_option("-o,--output", sim_args.output, "dataset file to write")->required();
  sim->add_option("--truth-out", sim_args.truth_out,
                  "truth sidecar file (default: <output>.truth.json)");

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "separate ensembles and identify their dynamics");
  fit->add_option("-i,--input", fit_args.input, "dataset file")->required();
  fit->add_option("-o,--output", fit_args.output, "solution file to write")->required();
  fit->add_option("--k", fit_args.K, "number of ensembles");
  fit->add_option("--kind", fit_args.kind, "model kind: affine or shift");
  fit->add_option("--restarts", fit_args.opts.restarts, "number of random initializations");
  fit->add_option("--seed", fit_args.opts.seed, "random seed");
  fit->add_option("--tol", fit_args.opts.rel_tol, "relative objective-decrease tolerance");
  fit->add_option("--max-iters", fit_args.opts.max_iters, "outer iteration cap");
  fit->add_option("--init-scale", fit_args.opts.init_scale, "scale of the random initializations");
  fit->add_flag("--include-plans", fit_args.include_plans,
                "store the transport plans in the solution file");
  fit->add_option("--dump-lp", fit_args.dump_lp_path,
                  "write the coupled linear program at the fitted costs to this file");

  EvaluateArgs eval_args;
  CLI::App* eva = app.add_subcommand("evaluate", "score a solution against ground truth");
  eva->add_option("--solution", eval_args.solution, "solution file")->required();
  eva->add_option("--data", eval_args.data, "labeled dataset file")->required();
  eva->add_option("--truth", eval_args.truth, "truth sidecar file")->required();

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo noise sweep over methods");
  sweep->add_option("--seed", sweep_args.cfg.base.seed, "base random seed");
  sweep->add_option("--d", sweep_args.cfg.base.d, "state dimension");
  sweep->add_option("--sizes", sweep_args.sizes, "comma-separated particles per ensemble");
  sweep->add_option("--T", sweep_args.cfg.base.T, "number of time points");
  sweep->add_option("--trials", sweep_args.cfg.trials, "trials per noise level");
  sweep->add_option("--sigma2-grid", sweep_args.grid, "comma-separated noise variances");
  sweep->add_option("--methods", sweep_args.methods,
                    "comma-separated subset of proposed,oracle,semi_oracle");
  sweep->add_option("--restarts", sweep_args.cfg.bcd.restarts, "restarts for the proposed method");
  sweep->add_option("--tol", sweep_args.cfg.bcd.rel_tol, "relative objective-decrease tolerance");
  sweep->add_option("--max-iters", sweep_args.cfg.bcd.max_iters, "outer iteration cap");
  sweep->add_option("--kmeans-restarts", sweep_args.cfg.kmeans_restarts,
                    "restarts for the semi-oracle clustering");
  sweep->add_option("-o,--output", sweep_args.output, "records file to write")->required();
  sweep->add_option("--aggregate-out", sweep_args.aggregate_out,
                    "also write median/p5/p95 per (sigma2, method)");

  GmmArgs gmm_args;
  CLI::App* gmm = app.add_subcommand("example-gmm",
                                     "two-snapshot Gaussian-mixture example with plan output");
  gmm->add_option("--p", gmm_args.cfg.p, "first mixture weight");
  gmm->add_option("--p-prime", gmm_args.cfg.p_prime, "second mixture weight");
  gmm->add_option("--a", gmm_args.cfg.a, "first mode");
  gmm->add_option("--a-prime", gmm_args.cfg.a_prime, "second mode");
  gmm->add_option("--sigma", gmm_args.cfg.sigma, "first standard deviation");
  gmm->add_option("--sigma-prime", gmm_args.cfg.sigma_prime, "second standard deviation");
  gmm->add_option("--grid-lo", gmm_args.cfg.grid_lo, "grid lower edge");
  gmm->add_option("--grid-hi", gmm_args.cfg.grid_hi, "grid upper edge");
  gmm->add_option("--grid-points", gmm_args.cfg.grid_points, "number of grid cells");
  gmm->add_option("--k", gmm_args.K, "ensembles (1 solves plain transport)");
  gmm->add_option("--kind", gmm_args.kind, "model kind: affine or shift");
  gmm->add_option("--restarts", gmm_args.opts.restarts, "number of random initializations");
  gmm->add_option("--init-scale", gmm_args.init_scale,
                  "scale of the random initial shifts (default: half the grid width)");
  gmm->add_option("--seed", gmm_args.opts.seed, "random seed");
  gmm->add_option("--tol", gmm_args.opts.rel_tol, "relative objective-decrease tolerance");
  gmm->add_option("--max-iters", gmm_args.opts.max_iters, "outer iteration cap");
  gmm->add_option("--out-prefix", gmm_args.prefix, "prefix for the emitted files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    set_max_threads(threads);
    if (*sim) run_simulate(sim_args);
    if (*fit) run_fit(fit_args);
    if (*eva) run_evaluate(eval_args);
    if (*sweep) run_sweep(sweep_args);
    if (*gmm) run_example_gmm(gmm_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
