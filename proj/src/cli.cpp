#include "plap/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "plap/anisotropy.hpp"
#include "plap/asymptotics.hpp"
#include "plap/errors.hpp"
#include "plap/picone.hpp"

namespace plap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path.string() + "'");
  out << content;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

bool wants(const RunConfig& cfg, const char* format) {
  return std::find(cfg.formats.begin(), cfg.formats.end(), format) != cfg.formats.end();
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Setup that can fail because of the configuration: coefficient and
// ellipticity on the grid the run will use.
CoeffSpec checked_coefficient(const RunConfig& cfg, const Grid& grid) {
  CoeffSpec coeff = cfg.build_coefficient();
  try {
    validate_ellipticity(coeff, grid, 100, cfg.seed);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, std::string("problem.coefficient: ") + e.what());
  }
  return coeff;
}

std::string eigenfunction_csv(const Field& f, const json& config) {
  const Grid& g = *f.grid;
  std::ostringstream os;
  os << "# config: " << config.dump() << "\n";
  os << "# axes:";
  for (int d = 0; d < g.dim(); ++d) os << (d ? "," : " ") << "x" << (d + 1);
  os << "\n";
  for (int d = 0; d < g.dim(); ++d) os << "x" << (d + 1) << ",";
  os << "u\n";
  std::vector<double> x(g.dim());
  for (std::size_t k = 0; k < f.size(); ++k) {
    g.node_coords(k, x);
    for (double c : x) os << format_number(c) << ",";
    os << format_number(f.values[k]) << "\n";
  }
  return os.str();
}

json certificate_json(const GapCertificate& c) {
  return {{"found", c.found},   {"ell0", c.ell0},       {"alpha", c.alpha}, {"ell", c.ell}, {"quotient", c.quotient},
          {"margin", c.margin}, {"mu1", c.mu1},         {"tried", c.tried}, {"skipped", c.skipped}};
}

json records_document(const RunConfig& cfg, const SweepReport& rep) {
  json records = json::array();
  for (const auto& r : rep.records) {
    records.push_back({{"ell", r.ell},
                       {"lambda", r.lambda},
                       {"residual", r.residual},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"upper_bound", r.upper_bound},
                       {"cold_restart", r.cold_restart}});
  }
  return {{"config", resolved_json(cfg)},
          {"bc", rep.bc == Boundary::Dirichlet ? "dirichlet" : "mixed"},
          {"p", rep.p},
          {"tol", cfg.solver.tol},
          {"mu1", rep.mu1},
          {"mu1_error",
           {{"value", rep.mu1_error.value},
            {"extrapolated", rep.mu1_error.extrapolated},
            {"order", rep.mu1_error.order},
            {"error", rep.mu1_error.error}}},
          {"reduced_lambda", nullable(rep.reduced_lambda)},
          {"coupling_measure", rep.coupling_measure},
          {"gradient_scale", rep.gradient_scale},
          {"gap_threshold", cfg.gap_threshold},
          {"certificate", rep.certificate ? certificate_json(*rep.certificate) : json(nullptr)},
          {"records", records}};
}

int converged_code(const json& doc) {
  for (const auto& r : doc.at("records")) {
    if (!r.at("converged").get<bool>()) return kNotConverged;
  }
  return kOk;
}

}  // namespace

std::string sweep_csv(const json& doc) {
  std::ostringstream os;
  os << "# config: " << doc.at("config").dump() << "\n";
  os << "ell,lambda,residual,iterations,converged,upper_bound,mu1,reduced_lambda,coupling_measure\n";
  const std::string mu1 = format_number(doc.at("mu1").get<double>());
  const std::string reduced =
      doc.at("reduced_lambda").is_null() ? std::string() : format_number(doc.at("reduced_lambda").get<double>());
  const std::string coupling = format_number(doc.at("coupling_measure").get<double>());
  for (const auto& r : doc.at("records")) {
    os << format_number(r.at("ell").get<double>()) << "," << format_number(r.at("lambda").get<double>()) << ","
       << format_number(r.at("residual").get<double>()) << "," << r.at("iterations").get<int>() << ","
       << (r.at("converged").get<bool>() ? "true" : "false") << "," << format_number(r.at("upper_bound").get<double>())
       << "," << mu1 << "," << reduced << "," << coupling << "\n";
  }
  return os.str();
}

json sweep_summary(const json& doc) {
  std::vector<SweepRecord> records;
  for (const auto& r : doc.at("records")) {
    SweepRecord rec;
    rec.ell = r.at("ell").get<double>();
    rec.lambda = r.at("lambda").get<double>();
    rec.residual = r.at("residual").get<double>();
    rec.iterations = r.at("iterations").get<int>();
    rec.converged = r.at("converged").get<bool>();
    rec.upper_bound = r.at("upper_bound").get<double>();
    records.push_back(rec);
  }
  const double mu1 = doc.at("mu1").get<double>();
  const double tol = doc.at("tol").get<double>();
  const double eps_h = doc.at("mu1_error").at("error").get<double>();

  json summary = {{"config", doc.at("config")},
                  {"fitted_C", nullptr},
                  {"fitted_exponent", nullptr},
                  {"fit_points", 0},
                  {"fit_error", nullptr},
                  {"mu1", mu1},
                  {"eps_h", eps_h},
                  {"reduced_lambda", doc.at("reduced_lambda")},
                  {"coupling_measure", doc.at("coupling_measure")}};

  GapVerdict gap = GapVerdict::Undetermined;
  if (doc.at("bc") == "dirichlet") {
    try {
      const RateFit fit = fit_rate(records, mu1, eps_h + 10.0 * tol * mu1, 10.0 * tol * mu1);
      summary["fitted_C"] = fit.C;
      summary["fitted_exponent"] = fit.exponent;
      summary["fit_points"] = fit.points;
    } catch (const Error& e) {
      summary["fit_error"] = e.what();
    }
  } else {
    GapEvidence ev;
    ev.coupling = doc.at("coupling_measure").get<double>();
    ev.scale = doc.at("gradient_scale").get<double>();
    ev.threshold = doc.at("gap_threshold").get<double>();
    ev.certificate_found = !doc.at("certificate").is_null() && doc.at("certificate").at("found").get<bool>();
    for (const auto& r : records) ev.max_deviation = std::max(ev.max_deviation, std::abs(r.lambda - mu1));
    ev.tolerance = 10.0 * tol * mu1;
    gap = gap_detect(ev);
    summary["certificate"] = doc.at("certificate");
  }
  summary["gap"] = to_string(gap);
  return summary;
}

int cmd_solve(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const GridPtr full = build_grid(GridSpec{cfg.dim_axial, cfg.half_length, cfg.section, cfg.resolution, cfg.bc});
  const CoeffSpec coeff = checked_coefficient(cfg, *full);
  SolverOptions opts = cfg.solver;
  opts.seed = cfg.seed;
  GridPtr grid = full;
  EigenResult r;
  if (cfg.solve_domain == "cylinder") {
    r = minimize_rayleigh(Problem::full(full, coeff, cfg.p), std::nullopt, opts);
  } else {
    grid = build_section_grid(cfg.section, cfg.resolution);
    if (cfg.solve_domain == "section") {
      r = cross_section_mu1(Problem::section(grid, coeff, cfg.p), opts);
    } else {
      r = reduced_lambda(Problem::reduced(grid, coeff, cfg.p), opts);
    }
  }

  fs::create_directories(out);
  const json config = resolved_json(cfg);
  const json result = {{"config", config},
                       {"lambda", r.lambda},
                       {"residual", r.residual},
                       {"iterations", r.iterations},
                       {"converged", r.converged},
                       {"domain", cfg.solve_domain},
                       {"nodes", grid->node_count()}};
  write_file(out / "result.json", dump(result));
  if (cfg.dump_eigenfunction) write_file(out / "eigenfunction.csv", eigenfunction_csv(r.eigenfunction, config));
  log << "lambda " << format_number(r.lambda) << "  residual " << format_number(r.residual) << "  iterations "
      << r.iterations << (r.converged ? "" : "  (not converged)") << "\n";
  return r.converged ? kOk : kNotConverged;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& out, int jobs, std::ostream& log) {
  if (cfg.ells.empty()) throw Error(ErrorCode::ConfigError, "sweep.ells: at least one l is required");
  const GridPtr probe = build_grid(GridSpec{cfg.dim_axial, cfg.ells.back(), cfg.section, cfg.resolution, cfg.bc});
  const CoeffSpec coeff = checked_coefficient(cfg, *probe);
  if (cfg.bc == Boundary::Mixed && coeff.a11_depends_on_axial()) {
    throw Error(ErrorCode::ConfigError, "problem.coefficient: mixed problems need a11 independent of x1");
  }

  SweepOptions opts;
  opts.ells = cfg.ells;
  opts.resolution = cfg.resolution;
  opts.warm_start = cfg.warm_start;
  opts.jobs = jobs;
  opts.solver = cfg.solver;
  opts.solver.seed = cfg.seed;
  opts.gap_threshold = cfg.gap_threshold;
  opts.gap_search = cfg.gap_search;
  opts.richardson = cfg.richardson;
  const SweepReport rep = sweep(coeff, cfg.p, cfg.section, cfg.bc, opts);

  fs::create_directories(out);
  const json doc = records_document(cfg, rep);
  write_file(out / "records.json", dump(doc));
  const json summary = sweep_summary(doc);
  if (wants(cfg, "csv")) write_file(out / "sweep.csv", sweep_csv(doc));
  if (wants(cfg, "json")) write_file(out / "summary.json", dump(summary));

  for (const auto& r : rep.records) {
    log << "l " << format_number(r.ell) << "  lambda " << format_number(r.lambda) << "  bound "
        << format_number(r.upper_bound) << (r.converged ? "" : "  (not converged)") << "\n";
  }
  log << "mu1 " << format_number(rep.mu1) << "  eps_h " << format_number(rep.mu1_error.error) << "  gap "
      << summary.at("gap").get<std::string>() << "\n";
  return converged_code(doc);
}

int cmd_picone(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const PiconeReport fuzz = picone_fuzz(cfg.picone_draws, cfg.seed, cfg.picone);
  auto report_json = [](const PiconeReport& r) {
    return json{{"cells", r.cells},
                {"max_abs_L_minus_R", r.max_abs_L_minus_R},
                {"max_rel_L_minus_R", r.max_rel_L_minus_R},
                {"min_L", r.min_L},
                {"min_L_scaled", r.min_L_scaled},
                {"equality_locus_fraction", r.equality_locus_fraction},
                {"grad_ratio_deviation", r.grad_ratio_deviation},
                {"ratio_violations", r.ratio_violations}};
  };
  bool passed = fuzz.passed(cfg.picone);
  json doc = {{"config", resolved_json(cfg)}, {"seed", cfg.seed}, {"fuzz", report_json(fuzz)}};
  doc["fuzz"]["passed"] = fuzz.passed(cfg.picone);

  if (cfg.picone_field_check) {
    // v = cross-section eigenfunction extended along x1, u = random
    // nonnegative field vanishing on the Dirichlet boundary.
    const GridPtr grid = build_grid(GridSpec{cfg.dim_axial, cfg.half_length, cfg.section, cfg.resolution, Boundary::Dirichlet});
    const CoeffSpec coeff = checked_coefficient(cfg, *grid);
    const GridPtr sgrid = build_section_grid(cfg.section, cfg.resolution);
    const EigenResult w = cross_section_mu1(Problem::section(sgrid, coeff, cfg.p), cfg.solver);
    const Field v = extend_section(w.eigenfunction, grid);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Field u = Field::zeros(grid);
    for (auto& x : u.values) x = unit(rng);
    u.apply_mask();
    const PiconeReport field = picone_check(u, v, Problem::full(grid, coeff, cfg.p), cfg.picone);
    doc["field"] = report_json(field);
    doc["field"]["passed"] = field.passed(cfg.picone);
    passed = passed && field.passed(cfg.picone);
  }
  doc["passed"] = passed;

  fs::create_directories(out);
  write_file(out / "picone.json", dump(doc));
  log << "picone " << (passed ? "passed" : "FAILED") << "  max |L-R|/scale " << format_number(fuzz.max_rel_L_minus_R)
      << "  min L/scale " << format_number(fuzz.min_L_scaled) << "\n";
  return passed ? kOk : kPropertyFailure;
}

int cmd_report(const fs::path& out, std::ostream& log) {
  const fs::path path = out / "records.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "no stored records at '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "unreadable records '" + path.string() + "': " + e.what());
  }
  json summary;
  std::string csv;
  try {
    summary = sweep_summary(doc);
    csv = sweep_csv(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "records '" + path.string() + "' are incomplete: " + e.what());
  }
  write_file(out / "sweep.csv", csv);
  write_file(out / "summary.json", dump(summary));
  log << "regenerated " << (out / "sweep.csv").string() << " and " << (out / "summary.json").string() << "\n";
  return converged_code(doc);
}

int run(int argc, char** argv) {
  CLI::App app{"First eigenvalues of anisotropic p-Laplacians on stretched cylinders"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    bool dump = false;
  } flags;

  auto add_common = [&flags](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", flags.config, "JSON run configuration");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory (overrides output.directory)");
    sub->add_option("--seed", flags.seed, "random seed (overrides config seed)");
    sub->add_option("--jobs", flags.jobs, "parallel solves (overrides PLAP_JOBS)")->check(CLI::PositiveNumber);
    sub->add_flag("--dump-eigenfunction", flags.dump, "write nodal eigenfunction values as CSV");
  };
  auto* solve = app.add_subcommand("solve", "first eigenpair on a single cylinder");
  auto* sweep_cmd = app.add_subcommand("sweep", "eigenvalues over a list of half-lengths");
  auto* picone = app.add_subcommand("picone", "randomized Picone identity checks");
  auto* report = app.add_subcommand("report", "regenerate sweep.csv and summary.json from records.json");
  add_common(solve, true);
  add_common(sweep_cmd, true);
  add_common(picone, true);
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  int jobs = 1;
  if (const char* env = std::getenv("PLAP_JOBS")) {
    const std::string s(env);
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 1) {
      std::cerr << "error: PLAP_JOBS must be a positive integer\n";
      return kConfigError;
    }
    jobs = v;
  }
  if (flags.jobs) jobs = *flags.jobs;

  RunConfig cfg;
  fs::path out;
  try {
    if (report->parsed()) {
      out = flags.out.empty() ? fs::path("out") : fs::path(flags.out);
      return cmd_report(out, std::cout);
    }
    cfg = load_config(flags.config);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.dump) cfg.dump_eigenfunction = true;
    if (!flags.out.empty()) cfg.out_dir = flags.out;
    out = cfg.out_dir;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (solve->parsed()) return cmd_solve(cfg, out, std::cout);
    if (sweep_cmd->parsed()) return cmd_sweep(cfg, out, jobs, std::cout);
    return cmd_picone(cfg, out, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::ConfigError:
      case ErrorCode::NonPositiveLength:
      case ErrorCode::MixedRequiresOneAxial:
      case ErrorCode::InvalidGrid:
      case ErrorCode::EllipticityViolation:
      case ErrorCode::InvalidExponent:
      case ErrorCode::ZeroA11:
        return kConfigError;
      default:
        return kPropertyFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPropertyFailure;
  }
}

}  // namespace plap::cli
