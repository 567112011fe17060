#include "plap/asymptotics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "plap/errors.hpp"

namespace plap {

std::string to_string(GapVerdict v) {
  switch (v) {
    case GapVerdict::Gap:
      return "Gap";
    case GapVerdict::NoGap:
      return "NoGap";
    case GapVerdict::Undetermined:
      return "Undetermined";
  }
  return "Undetermined";
}

RichardsonEstimate cross_section_error(const CoeffSpec& coeff, double p, std::span<const Interval> section, int resolution,
                                       const SolverOptions& opts) {
  double mu[3];
  for (int level = 0; level < 3; ++level) {
    const GridPtr g = build_section_grid(section, resolution << level);
    mu[level] = cross_section_mu1(Problem::section(g, coeff, p), opts).lambda;
  }
  RichardsonEstimate est;
  est.value = mu[0];
  const double d1 = mu[0] - mu[1];
  const double d2 = mu[1] - mu[2];
  if (d1 != 0.0 && d2 != 0.0 && (d1 > 0.0) == (d2 > 0.0) && std::abs(d1) > std::abs(d2)) {
    est.order = std::log2(d1 / d2);
    est.extrapolated = mu[2] - d2 / (std::pow(2.0, est.order) - 1.0);
  } else {
    // No clean asymptotic regime: fall back to the finest value.
    est.extrapolated = mu[2];
  }
  est.error = std::abs(est.value - est.extrapolated);
  return est;
}

RateFit fit_rate(std::span<const SweepRecord> records, double mu1, double tolerance, double noise) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& r : records) {
    if (!r.converged) continue;
    const double gap = r.lambda - mu1;
    if (gap < -tolerance) {
      throw Error(ErrorCode::NonPositiveGap, "lambda below mu1 at l = " + std::to_string(r.ell) +
                                                 " (gap " + std::to_string(gap) + "): discretization error");
    }
    if (gap <= noise || !(r.ell > 0.0)) continue;
    xs.push_back(std::log(r.ell));
    ys.push_back(std::log(gap));
  }
  if (xs.size() < 3) throw Error(ErrorCode::InsufficientData, "rate fit needs at least 3 records above mu1");
  const auto n = static_cast<double>(xs.size());
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::InsufficientData, "rate fit needs distinct l values");
  const double slope = sxy / sxx;
  return RateFit{std::exp(my - slope * mx), -slope, xs.size()};
}

double coupling_measure(const Field& section_eigenfunction, const CoeffSpec& coeff) {
  const Grid& g = *section_eigenfunction.grid;
  if (g.dim() != coeff.dim_section()) throw Error(ErrorCode::GeometryError, "section grid and coefficient differ");
  const int m = coeff.dim_axial();
  const int k = g.dim();
  std::vector<double> grad(k);
  std::vector<double> center(k);
  std::vector<double> point(coeff.dim(), 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    g.gradient_at(section_eigenfunction.values.data(), c, grad.data());
    g.cell_center(c, center);
    std::copy(center.begin(), center.end(), point.begin() + m);
    const Eigen::MatrixXd a = coeff.at(point);
    // |A12 . grad W| as the Euclidean norm over the m axial rows.
    double s2 = 0.0;
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int d = 0; d < k; ++d) s += a(i, m + d) * grad[d];
      s2 += s * s;
    }
    total += std::sqrt(s2);
  }
  return g.cell_volume() * total;
}

double gradient_scale(const Field& section_eigenfunction) {
  const Grid& g = *section_eigenfunction.grid;
  std::vector<double> grad(g.dim());
  double total = 0.0;
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    g.gradient_at(section_eigenfunction.values.data(), c, grad.data());
    double s2 = 0.0;
    for (double v : grad) s2 += v * v;
    total += std::sqrt(s2);
  }
  return g.cell_volume() * total;
}

GapVerdict gap_detect(const GapEvidence& e) {
  const bool coupled = e.coupling > e.threshold * e.scale;
  if (coupled && e.certificate_found) return GapVerdict::Gap;
  if (!coupled && !e.certificate_found && e.max_deviation <= e.tolerance) return GapVerdict::NoGap;
  return GapVerdict::Undetermined;
}

namespace {

EigenResult solve_one(const Problem& prob, const std::optional<Field>& init, const SolverOptions& opts, bool& cold) {
  cold = false;
  EigenResult r = minimize_rayleigh(prob, init, opts);
  if (!r.converged && init.has_value()) {
    EigenResult fresh = minimize_rayleigh(prob, std::nullopt, opts);
    cold = true;
    if (fresh.converged || fresh.lambda < r.lambda) r = std::move(fresh);
  }
  return r;
}

double test_function_bound(const Problem& prob, const EigenResult& section, const CoeffSpec& coeff, Boundary bc,
                           const SweepOptions& opts) {
  if (bc == Boundary::Dirichlet) return dirichlet_upper_bound(prob, section.eigenfunction);
  double best = rayleigh(prob, extend_section(section.eigenfunction, prob.grid_ptr()));
  try {
    const Field u = u_eps_ell(prob.grid_ptr(), opts.gap_search.beta, section.eigenfunction, coeff, opts.gap_search.collar);
    best = std::min(best, rayleigh(prob, u));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CollarTooWide) throw;
  }
  return best;
}

}  // namespace

SweepReport sweep(const CoeffSpec& coeff, double p, std::span<const Interval> section, Boundary bc,
                  const SweepOptions& opts) {
  if (opts.ells.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one l");
  for (double ell : opts.ells) {
    if (!(ell > 0.0)) throw Error(ErrorCode::NonPositiveLength, "every l must be positive");
  }
  if (opts.jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be at least 1");

  SweepReport rep;
  rep.bc = bc;
  rep.p = p;
  const std::vector<Interval> sec(section.begin(), section.end());
  const GridPtr sgrid = build_section_grid(section, opts.resolution);
  const EigenResult sec_result = cross_section_mu1(Problem::section(sgrid, coeff, p), opts.solver);
  rep.mu1 = sec_result.lambda;
  if (opts.richardson) {
    rep.mu1_error = cross_section_error(coeff, p, section, opts.resolution, opts.solver);
  } else {
    rep.mu1_error.value = rep.mu1;
    rep.mu1_error.extrapolated = rep.mu1;
  }
  rep.gradient_scale = gradient_scale(sec_result.eigenfunction);
  rep.coupling_measure = coupling_measure(sec_result.eigenfunction, coeff);
  if (bc == Boundary::Mixed || coeff.dim_axial() == 1) {
    rep.reduced_lambda = reduced_lambda(Problem::reduced(sgrid, coeff, p), opts.solver).lambda;
  }

  std::vector<double> ells = opts.ells;
  std::sort(ells.begin(), ells.end());
  ells.erase(std::unique(ells.begin(), ells.end()), ells.end());
  rep.records.resize(ells.size());

  auto run = [&](std::size_t i, const std::optional<Field>& init) -> Field {
    const auto t0 = std::chrono::steady_clock::now();
    const GridPtr grid = build_grid(GridSpec{coeff.dim_axial(), ells[i], sec, opts.resolution, bc});
    const Problem prob = Problem::full(grid, coeff, p);
    std::optional<Field> start;
    if (init.has_value()) start = resample_axial(*init, grid);
    SweepRecord& rec = rep.records[i];
    EigenResult r = solve_one(prob, start, opts.solver, rec.cold_restart);
    rec.ell = ells[i];
    rec.lambda = r.lambda;
    rec.residual = r.residual;
    rec.iterations = r.iterations;
    rec.converged = r.converged;
    rec.upper_bound = test_function_bound(prob, sec_result, coeff, bc, opts);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::move(r.eigenfunction);
  };

  if (opts.warm_start) {
    std::optional<Field> prev;
    for (std::size_t i = 0; i < ells.size(); ++i) prev = run(i, prev);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto worker = [&] {
      for (std::size_t i = next++; i < ells.size() && !failed; i = next++) {
        try {
          run(i, std::nullopt);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    };
    const int threads = std::min<int>(opts.jobs, static_cast<int>(ells.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  const double band = rep.mu1_error.error + 10.0 * opts.solver.tol * rep.mu1;
  if (bc == Boundary::Dirichlet) {
    try {
      rep.fit = fit_rate(rep.records, rep.mu1, band, 10.0 * opts.solver.tol * rep.mu1);
    } catch (const Error& e) {
      rep.fit_error = e.what();
    }
    rep.gap = GapVerdict::Undetermined;
  } else {
    GapSearch search = opts.gap_search;
    search.resolution = opts.resolution;
    search.solver = opts.solver;
    rep.certificate = gap_certificate(coeff, p, section, search, sec_result);
    GapEvidence ev;
    ev.coupling = rep.coupling_measure;
    ev.scale = rep.gradient_scale;
    ev.threshold = opts.gap_threshold;
    ev.certificate_found = rep.certificate->found;
    for (const auto& r : rep.records) ev.max_deviation = std::max(ev.max_deviation, std::abs(r.lambda - rep.mu1));
    ev.tolerance = 10.0 * opts.solver.tol * rep.mu1;
    rep.gap = gap_detect(ev);
  }
  return rep;
}

}  // namespace plap
