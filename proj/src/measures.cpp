#include "otsep/measures.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "otsep/error.hpp"
#include "otsep/format.hpp"

namespace otsep {

double DiscreteMeasure::total_mass() const {
  double s = 0.0;
  for (double m : masses) s += m;
  return s;
}

namespace {

struct Row {
  long t;
  long pid;
  std::vector<double> coords;
  double mass;
  int label;  // -1 when absent
};

}  // namespace

void validate(const ObservationSequence& seq) {
  std::vector<std::string> errs;
  const int T = seq.T();
  if (T < 2) errs.push_back("sequence has " + std::to_string(T) + " time points, need at least 2");
  for (int t = 0; t < T; ++t) {
    const DiscreteMeasure& mu = seq.measures[t];
    const std::string at = "t=" + std::to_string(t + 1);
    if (mu.points.size() != mu.masses.size()) {
      errs.push_back("point/mass count mismatch at " + at);
      continue;
    }
    if (mu.points.empty()) {
      errs.push_back("empty measure at " + at);
      continue;
    }
    for (int i = 0; i < mu.size(); ++i) {
      if (static_cast<int>(mu.points[i].size()) != seq.d) {
        errs.push_back("dimension mismatch at " + at + " (point " + std::to_string(i) +
                       "): expected " + std::to_string(seq.d) + ", found " +
                       std::to_string(mu.points[i].size()));
        break;
      }
    }
    for (int i = 0; i < mu.size(); ++i) {
      if (!mu.points[i].allFinite()) {
        errs.push_back("non-finite coordinate at " + at + " (point " + std::to_string(i) + ")");
        break;
      }
    }
    for (int i = 0; i < mu.size(); ++i) {
      if (!(mu.masses[i] >= 0.0) || !std::isfinite(mu.masses[i])) {
        errs.push_back("negative or non-finite mass at " + at + " (point " + std::to_string(i) +
                       ")");
        break;
      }
    }
    if (!(mu.total_mass() > 0.0)) errs.push_back("total mass is not positive at " + at);
  }
  if (T >= 1 && errs.empty()) {
    const double ref = seq.measures[0].total_mass();
    for (int t = 1; t < T; ++t) {
      const double s = seq.measures[t].total_mass();
      if (std::abs(s - ref) > kMassBalanceRelTol * std::max(std::abs(ref), 1e-300)) {
        errs.push_back("total mass at t=" + std::to_string(t + 1) + " (" + format_double(s) +
                       ") differs from t=1 (" + format_double(ref) + ") beyond relative tolerance " +
                       format_double(kMassBalanceRelTol));
      }
    }
  }
  if (!seq.truth_labels.empty()) {
    if (static_cast<int>(seq.truth_labels.size()) != T) {
      errs.push_back("truth label table covers " + std::to_string(seq.truth_labels.size()) +
                     " time points, expected " + std::to_string(T));
    } else {
      for (int t = 0; t < T; ++t) {
        if (seq.truth_labels[t].size() != seq.measures[t].points.size()) {
          errs.push_back("truth label count mismatch at t=" + std::to_string(t + 1));
          continue;
        }
        for (int lab : seq.truth_labels[t])
          if (lab < 0) {
            errs.push_back("negative truth label at t=" + std::to_string(t + 1));
            break;
          }
      }
    }
  }
  if (static_cast<int>(seq.particle_ids.size()) != T) {
    errs.push_back("particle id table covers " + std::to_string(seq.particle_ids.size()) +
                   " time points, expected " + std::to_string(T));
  } else {
    for (int t = 0; t < T; ++t)
      if (seq.particle_ids[t].size() != seq.measures[t].points.size())
        errs.push_back("particle id count mismatch at t=" + std::to_string(t + 1));
  }
  if (!errs.empty()) {
    std::string msg = "invalid observation sequence:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
}

ObservationSequence load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "t" || header[1] != "particle_id")
    throw ValidationError("'" + path + "': header must start with t,particle_id,x_0,...");
  int d = 0;
  size_t col = 2;
  while (col < header.size() && header[col] == "x_" + std::to_string(d)) {
    ++d;
    ++col;
  }
  if (d == 0) throw ValidationError("'" + path + "': no coordinate columns x_0,... in header");
  if (col >= header.size() || header[col] != "mass")
    throw ValidationError("'" + path + "': expected 'mass' column after coordinates");
  ++col;
  bool has_label = false;
  if (col < header.size()) {
    if (header[col] != "label" || col + 1 != header.size())
      throw ValidationError("'" + path + "': unexpected trailing header columns");
    has_label = true;
    ++col;
  }

  std::vector<Row> rows;
  long max_t = 0;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string ctx = "'" + path + "' line " + std::to_string(lineno);
    auto fields = split_csv_line(line);
    const size_t expected = 3 + static_cast<size_t>(d) + (has_label ? 1 : 0);
    if (fields.size() != expected)
      throw ValidationError(ctx + ": expected " + std::to_string(expected) + " fields, found " +
                            std::to_string(fields.size()));
    Row r;
    r.t = parse_long_strict(fields[0], ctx);
    if (r.t < 1) throw ValidationError(ctx + ": time index must be >= 1");
    r.pid = parse_long_strict(fields[1], ctx);
    r.coords.resize(d);
    for (int k = 0; k < d; ++k) r.coords[k] = parse_double_strict(fields[2 + k], ctx);
    r.mass = parse_double_strict(fields[2 + d], ctx);
    r.label = -1;
    if (has_label) {
      long lab = parse_long_strict(fields[3 + d], ctx);
      if (lab < 0) throw ValidationError(ctx + ": label must be >= 0");
      r.label = static_cast<int>(lab);
    }
    max_t = std::max(max_t, r.t);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("'" + path + "': no data rows");

  ObservationSequence seq;
  seq.d = d;
  seq.measures.resize(max_t);
  seq.particle_ids.resize(max_t);
  if (has_label) seq.truth_labels.resize(max_t);
  for (const Row& r : rows) {
    DiscreteMeasure& mu = seq.measures[r.t - 1];
    Eigen::VectorXd p(d);
    for (int k = 0; k < d; ++k) p[k] = r.coords[k];
    mu.points.push_back(std::move(p));
    mu.masses.push_back(r.mass);
    seq.particle_ids[r.t - 1].push_back(static_cast<int>(r.pid));
    if (has_label) seq.truth_labels[r.t - 1].push_back(r.label);
  }
  for (long t = 0; t < max_t; ++t)
    if (seq.measures[t].points.empty())
      throw ValidationError("'" + path + "': no rows for t=" + std::to_string(t + 1));

  validate(seq);
  return seq;
}

void save_dataset(const ObservationSequence& seq, const std::string& path) {
  std::ostringstream out;
  out << "t,particle_id";
  for (int k = 0; k < seq.d; ++k) out << ",x_" << k;
  out << ",mass";
  const bool has_label = seq.has_labels();
  if (has_label) out << ",label";
  out << "\n";
  for (int t = 0; t < seq.T(); ++t) {
    const DiscreteMeasure& mu = seq.measures[t];
    for (int i = 0; i < mu.size(); ++i) {
      out << (t + 1) << ',' << seq.particle_ids[t][i];
      for (int k = 0; k < seq.d; ++k) out << ',' << format_double(mu.points[i][k]);
      out << ',' << format_double(mu.masses[i]);
      if (has_label) out << ',' << seq.truth_labels[t][i];
      out << "\n";
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << out.str();
  if (!f) throw IoError("write failed for '" + path + "'");
}

}  // namespace otsep
