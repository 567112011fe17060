#include "plap/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "plap/errors.hpp"

namespace plap {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigError, where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

double get_number(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(where + "." + key, "expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const std::string& where, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
  return v.get<int>();
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) fail(where + "." + key, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) fail(where + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_numbers(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(where, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Polynomial parse_terms(const json& v, const std::string& where, int dim) {
  if (!v.is_array()) fail(where, "expected an array of terms");
  Polynomial poly;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    check_keys(v[i], w, {"coef", "powers"});
    Monomial m;
    m.coef = get_number(v[i], w, "coef", 0.0);
    if (v[i].contains("powers")) {
      const json& pw = v[i].at("powers");
      if (!pw.is_array() || static_cast<int>(pw.size()) > dim) fail(w + ".powers", "expected at most n integers");
      for (const auto& e : pw) {
        if (!e.is_number_integer() || e.get<int>() < 0) fail(w + ".powers", "expected nonnegative integers");
        m.powers.push_back(e.get<int>());
      }
    }
    poly.push_back(std::move(m));
  }
  return poly;
}

CoefficientConfig parse_coefficient(const json& obj, int dim) {
  const std::string where = "problem.coefficient";
  check_keys(obj, where, {"family", "matrix", "entries", "lambda_min", "M"});
  CoefficientConfig c;
  c.family = get_string(obj, where, "family", "identity");
  if (obj.contains("lambda_min")) c.lambda_min = get_number(obj, where, "lambda_min", 0.0);
  if (obj.contains("M")) c.bound = get_number(obj, where, "M", 0.0);
  if (c.family == "identity") {
    if (obj.contains("matrix") || obj.contains("entries")) fail(where, "identity takes no matrix or entries");
  } else if (c.family == "constant") {
    if (!obj.contains("matrix")) fail(where, "constant family needs 'matrix'");
    if (obj.contains("entries")) fail(where, "constant family takes no 'entries'");
    const json& rows = obj.at("matrix");
    if (!rows.is_array() || static_cast<int>(rows.size()) != dim) {
      fail(where + ".matrix", "expected " + std::to_string(dim) + " rows");
    }
    c.matrix.resize(dim, dim);
    for (int i = 0; i < dim; ++i) {
      const auto row = get_numbers(rows[i], where + ".matrix[" + std::to_string(i) + "]");
      if (static_cast<int>(row.size()) != dim) fail(where + ".matrix", "expected a square matrix");
      for (int j = 0; j < dim; ++j) c.matrix(i, j) = row[j];
    }
  } else if (c.family == "polynomial") {
    if (!obj.contains("entries")) fail(where, "polynomial family needs 'entries'");
    if (obj.contains("matrix")) fail(where, "polynomial family takes no 'matrix'");
    if (!c.lambda_min || !c.bound) fail(where, "polynomial family needs declared 'lambda_min' and 'M'");
    const json& entries = obj.at("entries");
    if (!entries.is_array()) fail(where + ".entries", "expected an array");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::string w = where + ".entries[" + std::to_string(i) + "]";
      check_keys(entries[i], w, {"row", "col", "terms"});
      PolynomialEntry e;
      e.row = get_int(entries[i], w, "row", -1);
      e.col = get_int(entries[i], w, "col", -1);
      if (e.row < 0 || e.col < 0 || e.row >= dim || e.col >= dim) fail(w, "row/col out of range");
      if (e.row > e.col) std::swap(e.row, e.col);
      if (!entries[i].contains("terms")) fail(w, "missing 'terms'");
      e.terms = parse_terms(entries[i].at("terms"), w + ".terms", dim);
      c.entries.push_back(std::move(e));
    }
  } else {
    fail(where + ".family", "unknown family '" + c.family + "' (identity, constant, polynomial)");
  }
  return c;
}

json polynomial_json(const Polynomial& poly) {
  json terms = json::array();
  for (const auto& m : poly) terms.push_back({{"coef", m.coef}, {"powers", m.powers}});
  return terms;
}

}  // namespace

CoeffSpec RunConfig::build_coefficient() const {
  const int n = dim();
  try {
    if (coefficient.family == "identity") {
      if (coefficient.lambda_min || coefficient.bound) {
        const double lo = coefficient.lambda_min.value_or(1.0);
        const double hi = coefficient.bound.value_or(1.0);
        return CoeffSpec::constant(Eigen::MatrixXd::Identity(n, n), dim_axial, lo, hi);
      }
      return CoeffSpec::identity(n, dim_axial);
    }
    if (coefficient.family == "constant") {
      if (coefficient.lambda_min || coefficient.bound) {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(coefficient.matrix, Eigen::EigenvaluesOnly);
        return CoeffSpec::constant(coefficient.matrix, dim_axial,
                                   coefficient.lambda_min.value_or(es.eigenvalues().minCoeff()),
                                   coefficient.bound.value_or(es.eigenvalues().maxCoeff()));
      }
      return CoeffSpec::constant(coefficient.matrix, dim_axial);
    }
    std::vector<Polynomial> upper(static_cast<std::size_t>(n * (n + 1) / 2));
    for (const auto& e : coefficient.entries) {
      const int idx = e.row * n - e.row * (e.row - 1) / 2 + (e.col - e.row);
      auto& target = upper[static_cast<std::size_t>(idx)];
      target.insert(target.end(), e.terms.begin(), e.terms.end());
    }
    return CoeffSpec(n, dim_axial, std::move(upper), *coefficient.lambda_min, *coefficient.bound);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, std::string("problem.coefficient: ") + e.what());
  }
}

RunConfig parse_config(const json& doc) {
  check_keys(doc, "config", {"problem", "solver", "solve", "sweep", "picone", "output", "seed"});
  RunConfig cfg;

  if (doc.contains("seed")) {
    const json& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      fail("config.seed", "expected a nonnegative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }

  const json problem = doc.value("problem", json::object());
  check_keys(problem, "problem", {"p", "bc", "dim_axial", "section", "coefficient"});
  cfg.p = get_number(problem, "problem", "p", 2.0);
  if (!(cfg.p >= 2.0) || !std::isfinite(cfg.p)) fail("problem.p", "p must be >= 2");
  const std::string bc = get_string(problem, "problem", "bc", "dirichlet");
  if (bc == "dirichlet") {
    cfg.bc = Boundary::Dirichlet;
  } else if (bc == "mixed") {
    cfg.bc = Boundary::Mixed;
  } else {
    fail("problem.bc", "expected 'dirichlet' or 'mixed'");
  }
  cfg.dim_axial = get_int(problem, "problem", "dim_axial", 1);
  if (cfg.dim_axial < 1) fail("problem.dim_axial", "must be at least 1");
  if (cfg.bc == Boundary::Mixed && cfg.dim_axial != 1) fail("problem.dim_axial", "mixed problems need dim_axial = 1");
  if (problem.contains("section")) {
    const json& sec = problem.at("section");
    if (!sec.is_array() || sec.empty()) fail("problem.section", "expected a nonempty array of [lo, hi] pairs");
    cfg.section.clear();
    for (std::size_t i = 0; i < sec.size(); ++i) {
      const auto iv = get_numbers(sec[i], "problem.section[" + std::to_string(i) + "]");
      if (iv.size() != 2 || !(iv[0] < iv[1])) fail("problem.section[" + std::to_string(i) + "]", "expected [lo, hi] with lo < hi");
      cfg.section.push_back({iv[0], iv[1]});
    }
  }
  if (cfg.dim() > 6) fail("problem", "at most 6 dimensions are supported");
  if (problem.contains("coefficient")) cfg.coefficient = parse_coefficient(problem.at("coefficient"), cfg.dim());

  const json solver = doc.value("solver", json::object());
  check_keys(solver, "solver", {"tol", "max_iter", "restarts", "resolution", "preconditioned"});
  cfg.solver.tol = get_number(solver, "solver", "tol", 1e-8);
  if (!(cfg.solver.tol > 0.0)) fail("solver.tol", "must be positive");
  cfg.solver.max_iter = get_int(solver, "solver", "max_iter", 50000);
  if (cfg.solver.max_iter < 1) fail("solver.max_iter", "must be positive");
  cfg.solver.restarts = get_int(solver, "solver", "restarts", 0);
  if (cfg.solver.restarts < 0) fail("solver.restarts", "must be nonnegative");
  cfg.solver.preconditioned = get_bool(solver, "solver", "preconditioned", true);
  cfg.resolution = get_int(solver, "solver", "resolution", 16);
  if (cfg.resolution < 4) fail("solver.resolution", "must be at least 4 nodes per unit");

  const json solve = doc.value("solve", json::object());
  check_keys(solve, "solve", {"half_length", "domain"});
  cfg.half_length = get_number(solve, "solve", "half_length", 1.0);
  if (!(cfg.half_length > 0.0)) fail("solve.half_length", "must be positive");
  cfg.solve_domain = get_string(solve, "solve", "domain", "cylinder");
  if (cfg.solve_domain != "cylinder" && cfg.solve_domain != "section" && cfg.solve_domain != "reduced") {
    fail("solve.domain", "expected 'cylinder', 'section' or 'reduced'");
  }
  if (cfg.solve_domain == "reduced" && cfg.dim_axial != 1) fail("solve.domain", "'reduced' needs dim_axial = 1");

  const json sweep = doc.value("sweep", json::object());
  check_keys(sweep, "sweep", {"ells", "range", "warm_start", "gap_threshold", "beta", "collar", "gap_ell0s", "gap_alphas",
                              "richardson"});
  if (sweep.contains("ells") && sweep.contains("range")) fail("sweep", "give either 'ells' or 'range', not both");
  if (sweep.contains("ells")) {
    cfg.ells = get_numbers(sweep.at("ells"), "sweep.ells");
  } else if (sweep.contains("range")) {
    const json& r = sweep.at("range");
    check_keys(r, "sweep.range", {"start", "factor", "count"});
    const double start = get_number(r, "sweep.range", "start", 0.0);
    const double factor = get_number(r, "sweep.range", "factor", 2.0);
    const int count = get_int(r, "sweep.range", "count", 0);
    if (!(start > 0.0) || !(factor > 0.0) || factor == 1.0 || count < 1) {
      fail("sweep.range", "need start > 0, factor > 0 and != 1, count >= 1");
    }
    double v = start;
    for (int i = 0; i < count; ++i, v *= factor) cfg.ells.push_back(v);
  }
  for (double e : cfg.ells) {
    if (!(e > 0.0)) fail("sweep.ells", "every l must be positive");
  }
  cfg.warm_start = get_bool(sweep, "sweep", "warm_start", true);
  cfg.richardson = get_bool(sweep, "sweep", "richardson", true);
  cfg.gap_threshold = get_number(sweep, "sweep", "gap_threshold", 1e-3);
  if (!(cfg.gap_threshold >= 0.0)) fail("sweep.gap_threshold", "must be nonnegative");
  cfg.gap_search.beta = get_number(sweep, "sweep", "beta", 0.5);
  if (!(cfg.gap_search.beta > 0.0 && cfg.gap_search.beta < 1.0)) fail("sweep.beta", "must lie in (0, 1)");
  const std::string collar = get_string(sweep, "sweep", "collar", "length");
  if (collar == "length") {
    cfg.gap_search.collar = CollarPolicy::Length;
  } else if (collar == "power") {
    cfg.gap_search.collar = CollarPolicy::Power;
  } else {
    fail("sweep.collar", "expected 'length' or 'power'");
  }
  if (sweep.contains("gap_ell0s")) cfg.gap_search.ell0s = get_numbers(sweep.at("gap_ell0s"), "sweep.gap_ell0s");
  if (sweep.contains("gap_alphas")) cfg.gap_search.alphas = get_numbers(sweep.at("gap_alphas"), "sweep.gap_alphas");
  for (double v : cfg.gap_search.ell0s) {
    if (!(v > 0.0)) fail("sweep.gap_ell0s", "values must be positive");
  }
  for (double v : cfg.gap_search.alphas) {
    if (!(v > 0.0)) fail("sweep.gap_alphas", "values must be positive");
  }

  const json picone = doc.value("picone", json::object());
  check_keys(picone, "picone", {"draws", "eq_tol", "ratio_tol", "identity_tol", "field_check", "flip_sign"});
  cfg.picone_draws = get_int(picone, "picone", "draws", 200);
  if (cfg.picone_draws < 1) fail("picone.draws", "must be positive");
  cfg.picone.eq_tol = get_number(picone, "picone", "eq_tol", 1e-10);
  cfg.picone.ratio_tol = get_number(picone, "picone", "ratio_tol", 1e-6);
  cfg.picone.identity_tol = get_number(picone, "picone", "identity_tol", 1e-9);
  cfg.picone_field_check = get_bool(picone, "picone", "field_check", true);
  cfg.picone.flip_sign = get_bool(picone, "picone", "flip_sign", false);

  const json output = doc.value("output", json::object());
  check_keys(output, "output", {"directory", "formats", "dump_eigenfunction"});
  cfg.out_dir = get_string(output, "output", "directory", "out");
  if (output.contains("formats")) {
    const json& f = output.at("formats");
    if (!f.is_array()) fail("output.formats", "expected an array of strings");
    cfg.formats.clear();
    for (const auto& s : f) {
      if (!s.is_string() || (s != "csv" && s != "json")) fail("output.formats", "supported formats are 'csv' and 'json'");
      cfg.formats.push_back(s.get<std::string>());
    }
  }
  cfg.dump_eigenfunction = get_bool(output, "output", "dump_eigenfunction", false);

  cfg.build_coefficient();  // surfaces shape and bound errors at parse time
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, "malformed config '" + path + "': " + e.what());
  }
  return parse_config(doc);
}

json resolved_json(const RunConfig& cfg) {
  json section = json::array();
  for (const auto& iv : cfg.section) section.push_back({iv.lo, iv.hi});

  json coeff = {{"family", cfg.coefficient.family}};
  if (cfg.coefficient.family == "constant") {
    json rows = json::array();
    for (int i = 0; i < cfg.coefficient.matrix.rows(); ++i) {
      json row = json::array();
      for (int j = 0; j < cfg.coefficient.matrix.cols(); ++j) row.push_back(cfg.coefficient.matrix(i, j));
      rows.push_back(row);
    }
    coeff["matrix"] = rows;
  } else if (cfg.coefficient.family == "polynomial") {
    json entries = json::array();
    for (const auto& e : cfg.coefficient.entries) {
      entries.push_back({{"row", e.row}, {"col", e.col}, {"terms", polynomial_json(e.terms)}});
    }
    coeff["entries"] = entries;
  }
  const CoeffSpec spec = cfg.build_coefficient();
  coeff["lambda_min"] = spec.lambda_min();
  coeff["M"] = spec.bound();

  return {
      {"seed", cfg.seed},
      {"problem",
       {{"p", cfg.p},
        {"bc", cfg.bc == Boundary::Dirichlet ? "dirichlet" : "mixed"},
        {"dim_axial", cfg.dim_axial},
        {"section", section},
        {"coefficient", coeff}}},
      {"solver",
       {{"tol", cfg.solver.tol},
        {"max_iter", cfg.solver.max_iter},
        {"restarts", cfg.solver.restarts},
        {"resolution", cfg.resolution},
        {"preconditioned", cfg.solver.preconditioned}}},
      {"solve", {{"half_length", cfg.half_length}, {"domain", cfg.solve_domain}}},
      {"sweep",
       {{"ells", cfg.ells},
        {"warm_start", cfg.warm_start},
        {"richardson", cfg.richardson},
        {"gap_threshold", cfg.gap_threshold},
        {"beta", cfg.gap_search.beta},
        {"collar", cfg.gap_search.collar == CollarPolicy::Length ? "length" : "power"},
        {"gap_ell0s", cfg.gap_search.ell0s},
        {"gap_alphas", cfg.gap_search.alphas}}},
      {"picone",
       {{"draws", cfg.picone_draws},
        {"eq_tol", cfg.picone.eq_tol},
        {"ratio_tol", cfg.picone.ratio_tol},
        {"identity_tol", cfg.picone.identity_tol},
        {"field_check", cfg.picone_field_check},
        {"flip_sign", cfg.picone.flip_sign}}},
      // The output directory is left out so that runs writing to different
      // places stay byte-comparable.
      {"output", {{"formats", cfg.formats}, {"dump_eigenfunction", cfg.dump_eigenfunction}}},
  };
}

}  // namespace plap
