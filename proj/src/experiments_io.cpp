#include "misspec/experiments_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace misspec {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

DirectionSpec direction_from_json(const json& j) {
  DirectionSpec d;
  if (j.is_string()) {
    d.kind = j.get<std::string>();
    return d;
  }
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("direction must be a string or an object with 'kind'");
  d.kind = j.at("kind").get<std::string>();
  d.beta = get_or(j, "beta", std::vector<double>{});
  d.scale = get_or(j, "scale", 1.0);
  return d;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  static const char* known[] = {"preset", "name", "problem", "family", "directions", "tilt", "alphas", "ns",
                                "reps", "seed", "grid", "quadrature_nodes", "output_dir", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown configuration key '" + it.key() + "'");
  }
  ExperimentConfig c = preset_config(get_or<std::string>(j, "preset", "default"));
  c.name = get_or(j, "name", c.name);
  if (auto it = j.find("problem"); it != j.end()) {
    c.data_dim = get_or(*it, "dim", c.data_dim);
    c.holding = get_or(*it, "holding", c.holding);
    c.backlog = get_or(*it, "backlog", c.backlog);
  }
  if (auto it = j.find("family"); it != j.end()) c.theta0 = get_or(*it, "theta0", c.theta0);
  if (auto it = j.find("directions"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("'directions' must be an array");
    c.directions.clear();
    for (const auto& d : *it) c.directions.push_back(direction_from_json(d));
  }
  if (j.contains("tilt")) c.tilt = parse_tilt_kind(j.at("tilt").get<std::string>());
  c.alphas = get_or(j, "alphas", c.alphas);
  c.ns = get_or(j, "ns", c.ns);
  c.reps = get_or(j, "reps", c.reps);
  c.seed = get_or(j, "seed", c.seed);
  if (auto it = j.find("grid"); it != j.end()) {
    c.grid.cells_per_axis = get_or(*it, "cells_per_axis", c.grid.cells_per_axis);
    c.grid.half_width_sd = get_or(*it, "half_width_sd", c.grid.half_width_sd);
  }
  c.quadrature_nodes = get_or(j, "quadrature_nodes", c.quadrature_nodes);
  c.output_dir = get_or(j, "output_dir", c.output_dir);
  c.threads = get_or(j, "threads", c.threads);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& c) {
  json dirs = json::array();
  for (const auto& d : c.directions) {
    json o{{"kind", d.kind}};
    if (!d.beta.empty()) o["beta"] = d.beta;
    if (d.scale != 1.0) o["scale"] = d.scale;
    dirs.push_back(o);
  }
  return json{{"name", c.name},
              {"problem", {{"dim", c.data_dim}, {"holding", c.holding}, {"backlog", c.backlog}}},
              {"family", {{"theta0", c.theta0}}},
              {"directions", dirs},
              {"tilt", to_string(c.tilt)},
              {"alphas", c.alphas},
              {"ns", c.ns},
              {"reps", c.reps},
              {"seed", c.seed},
              {"grid", {{"cells_per_axis", c.grid.cells_per_axis}, {"half_width_sd", c.grid.half_width_sd}}},
              {"quadrature_nodes", c.quadrature_nodes},
              {"output_dir", c.output_dir},
              {"threads", c.threads}};
}

void write_samples_csv(const std::string& path, const std::vector<RegretSample>& samples, int decision_dim) {
  std::ofstream out = open_out(path);
  out << "method,n,alpha,rep,regret";
  for (int j = 1; j <= decision_dim; ++j) out << ",w_" << j;
  out << '\n';
  for (const auto& s : samples) {
    if (!s.ok()) continue;
    out << to_string(s.method) << ',' << s.n << ',' << fmt(s.alpha) << ',' << s.rep << ',' << fmt(s.regret);
    for (Eigen::Index j = 0; j < s.w.size(); ++j) out << ',' << fmt(s.w(j));
    out << '\n';
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

std::vector<RegretSample> read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 5 || header[0] != "method" || header[4] != "regret") {
    throw IoError("'" + path + "' does not have the samples header");
  }
  const std::size_t dw = header.size() - 5;
  std::vector<RegretSample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != header.size()) {
      throw IoError("'" + path + "' line " + std::to_string(lineno) + ": expected " +
                    std::to_string(header.size()) + " fields");
    }
    RegretSample s;
    try {
      s.method = parse_method(f[0]);
      s.n = std::stoull(f[1]);
      s.alpha = std::stod(f[2]);
      s.rep = std::stoull(f[3]);
      s.regret = std::stod(f[4]);
      s.w.resize(static_cast<Eigen::Index>(dw));
      for (std::size_t j = 0; j < dw; ++j) s.w(static_cast<Eigen::Index>(j)) = std::stod(f[5 + j]);
    } catch (const std::exception& e) {
      throw IoError("'" + path + "' line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

json cell_to_json(const CellResult& cell) {
  json sums = json::array();
  for (const auto& s : cell.summaries) {
    sums.push_back({{"method", to_string(s.method)},
                    {"mean", s.mean},
                    {"median", s.median},
                    {"q25", s.q25},
                    {"q75", s.q75},
                    {"se", s.se},
                    {"count", s.count},
                    {"errors", s.errors}});
  }
  json paired = json::array();
  for (const auto& p : cell.paired) {
    paired.push_back({{"lhs", to_string(p.lhs)},
                      {"rhs", to_string(p.rhs)},
                      {"mean", p.mean},
                      {"se", p.se},
                      {"count", p.count}});
  }
  json j{{"direction", cell.direction},
         {"n", cell.n},
         {"alpha", cell.alpha},
         {"t", cell.t},
         {"regime", to_string(cell.regime)},
         {"w_star", vec_json(cell.w_star)},
         {"v_star", cell.v_star},
         {"crosscheck_gap", cell.crosscheck_gap},
         {"summaries", sums},
         {"paired_differences", paired},
         {"lowest_mean_regret", to_string(cell.best)}};
  if (!cell.error.empty()) j["error"] = cell.error;
  return j;
}

json summary_to_json(const SweepResult& result) {
  json cells = json::array();
  for (const auto& c : result.cells) cells.push_back(cell_to_json(c));
  return json{{"config", config_to_json(result.config)}, {"common_random_numbers", true}, {"cells", cells}};
}

json report_to_json(const AsymptoticReport& r) {
  json methods = json::array();
  for (const auto& m : r.methods) {
    json o{{"method", to_string(m.method)},
           {"direction_bias", vec_json(m.direction_bias)},
           {"bias", vec_json(m.bias)},
           {"bias_v_norm", m.bias_v_norm},
           {"limit_regret", m.limit_regret},
           {"variance", mat_json(m.variance)},
           {"variance_regret", m.variance_regret}};
    if (std::isfinite(m.expected_balanced_regret)) o["expected_balanced_regret"] = m.expected_balanced_regret;
    methods.push_back(o);
  }
  json checks = json::array();
  for (const auto& c : r.checks) {
    checks.push_back(
        {{"name", c.name}, {"statement", c.statement}, {"verdict", to_string(c.verdict)}, {"margin", c.margin}});
  }
  const SensitivityMatrices& s = r.matrices;
  return json{{"direction", r.direction},
              {"alpha", r.alpha},
              {"regime", to_string(r.regime)},
              {"sensitivity",
               {{"V", mat_json(s.V)},
                {"Sigma", mat_json(s.Sigma)},
                {"I", mat_json(s.I)},
                {"Phi", mat_json(s.Phi)},
                {"w0", vec_json(s.w0)},
                {"theta0", vec_json(s.theta0)},
                {"oracle_gradient", mat_json(s.oracle_gradient)},
                {"oracle_gradient_fd", mat_json(s.oracle_gradient_fd)}}},
              {"methods", methods},
              {"orderings", checks}};
}

void write_panel_csv(const std::string& path, const std::vector<const CellResult*>& cells) {
  std::ofstream out = open_out(path);
  out << "direction,regime,alpha,n,method,statistic,value\n";
  for (const CellResult* c : cells) {
    for (const auto& s : c->summaries) {
      const std::pair<const char*, double> stats[] = {
          {"mean", s.mean}, {"median", s.median}, {"q25", s.q25}, {"q75", s.q75}, {"se", s.se}};
      for (const auto& [name, value] : stats) {
        out << c->direction << ',' << to_string(c->regime) << ',' << fmt(c->alpha) << ',' << c->n << ','
            << to_string(s.method) << ',' << name << ',' << fmt(value) << '\n';
      }
    }
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("error while writing '" + path + "'");
}

std::string file_stem(const std::string& label) {
  std::string s;
  for (char ch : label) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
    s.push_back(keep ? ch : '_');
  }
  return s;
}

std::vector<std::string> emit(const SweepResult& result, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  std::vector<std::string> labels;
  for (const auto& c : result.cells) {
    if (std::find(labels.begin(), labels.end(), c.direction) == labels.end()) labels.push_back(c.direction);
  }
  for (const auto& label : labels) {
    std::vector<RegretSample> samples;
    std::vector<const CellResult*> cells;
    for (const auto& c : result.cells) {
      if (c.direction != label) continue;
      samples.insert(samples.end(), c.samples.begin(), c.samples.end());
      cells.push_back(&c);
    }
    const std::string stem = file_stem(label);
    const std::string samples_path = (std::filesystem::path(dir) / ("samples_" + stem + ".csv")).string();
    write_samples_csv(samples_path, samples, result.config.data_dim);
    written.push_back(samples_path);
    const std::string panel_path = (std::filesystem::path(dir) / ("panel_" + stem + ".csv")).string();
    write_panel_csv(panel_path, cells);
    written.push_back(panel_path);
  }
  const std::string summary_path = (std::filesystem::path(dir) / "summary.json").string();
  write_json(summary_path, summary_to_json(result));
  written.push_back(summary_path);
  return written;
}

}  // namespace misspec
