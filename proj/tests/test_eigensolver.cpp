#include <algorithm>
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "oracles.hpp"
#include "plap/eigensolver.hpp"
#include "plap/errors.hpp"

using namespace plap;

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

Eigen::MatrixXd coupled(double a) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, a, a, 1.0;
  return m;
}

EigenResult solve_1d(double p, int res, double lo = 0.0, double hi = 1.0, double scale = 1.0, double tol = 1e-9) {
  const std::vector<Interval> sec{{lo, hi}};
  const auto g = build_section_grid(sec, res);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2) * scale;
  SolverOptions opts;
  opts.tol = tol;
  return cross_section_mu1(Problem::section(g, CoeffSpec::constant(a, 1), p), opts);
}

void check_eigenfunction(const Problem& prob, const EigenResult& r) {
  for (double v : r.eigenfunction.values) CHECK(v >= 0.0);
  CHECK(r.eigenfunction.respects_mask());
  CHECK(std::abs(lp_norm_p(prob, r.eigenfunction) - 1.0) <= 1e-8);
}

}  // namespace

TEST_SUITE("eigensolver") {
  TEST_CASE("1D Laplacian converges to pi^2") {
    const EigenResult r64 = solve_1d(2.0, 64);
    const EigenResult r256 = solve_1d(2.0, 256);
    CHECK(r64.converged);
    CHECK(r256.converged);
    CHECK(std::abs(r64.lambda / kPi2 - 1.0) <= 0.02);
    CHECK(std::abs(r256.lambda / kPi2 - 1.0) <= 0.002);
  }

  TEST_CASE("1D p = 3 matches the closed form and the inverse-power oracle") {
    const double exact = oracle::p_laplace_1d_exact(3.0);
    CHECK(oracle::pi_p(3.0) == doctest::Approx(2.4184).epsilon(1e-4));
    CHECK(exact == doctest::Approx(28.287).epsilon(1e-4));
    const double brute = oracle::p_laplace_1d_inverse_power(3.0, 4000, 60);
    CHECK(std::abs(brute / exact - 1.0) <= 2e-3);
    const EigenResult r = solve_1d(3.0, 256);
    CHECK(r.converged);
    CHECK(std::abs(r.lambda / exact - 1.0) <= 0.01);
    CHECK(std::abs(r.lambda / brute - 1.0) <= 0.005);
  }

  TEST_CASE("cross-section eigenfunction matches sqrt(2) sin(pi x)") {
    const std::vector<Interval> sec{{0.0, 1.0}};
    const auto g = build_section_grid(sec, 64);
    const Problem prob = Problem::section(g, CoeffSpec::identity(2, 1), 2.0);
    const EigenResult r = cross_section_mu1(prob);
    check_eigenfunction(prob, r);
    double err2 = 0.0;
    for (std::size_t k = 0; k < g->node_count(); ++k) {
      const double w = std::sqrt(2.0) * std::sin(std::numbers::pi * g->coord(k, 0));
      err2 += g->node_weight(k) * (r.eigenfunction[k] - w) * (r.eigenfunction[k] - w);
    }
    CHECK(std::sqrt(err2) <= 2.0 / (64.0 * 64.0) * 10.0);
  }

  TEST_CASE("scaling A by 4 scales mu1 by 4^(p/2)") {
    for (double p : {2.0, 3.0}) {
      const double base = solve_1d(p, 32).lambda;
      const double scaled = solve_1d(p, 32, 0.0, 1.0, 4.0).lambda;
      CHECK(scaled == doctest::Approx(std::pow(4.0, p / 2.0) * base).epsilon(1e-7));
    }
    CHECK(solve_1d(2.0, 128, 0.0, 1.0, 4.0).lambda == doctest::Approx(4.0 * kPi2).epsilon(1e-3));
  }

  TEST_CASE("interval (0, 2) gives pi^2 / 4") {
    CHECK(solve_1d(2.0, 64, 0.0, 2.0).lambda == doctest::Approx(kPi2 / 4.0).epsilon(1e-3));
  }

  TEST_CASE("reduced problem gives (1 - a^2) pi^2") {
    const std::vector<Interval> sec{{0.0, 1.0}};
    const auto g = build_section_grid(sec, 64);
    for (double a : {0.3, 0.5}) {
      const auto spec = CoeffSpec::constant(coupled(a), 1);
      const EigenResult red = reduced_lambda(Problem::reduced(g, spec, 2.0));
      const EigenResult sec_r = cross_section_mu1(Problem::section(g, spec, 2.0));
      CHECK(red.lambda == doctest::Approx((1.0 - a * a) * kPi2).epsilon(0.01));
      CHECK(red.lambda <= sec_r.lambda);
      if (a == 0.5) CHECK(red.lambda / sec_r.lambda == doctest::Approx(0.75).epsilon(0.01));
    }
    const auto uncoupled = CoeffSpec::identity(2, 1);
    for (double p : {2.0, 3.0}) {
      const double lam = reduced_lambda(Problem::reduced(g, uncoupled, p)).lambda;
      const double mu1 = cross_section_mu1(Problem::section(g, uncoupled, p)).lambda;
      CHECK(lam == doctest::Approx(mu1).epsilon(1e-8));
    }
  }

  TEST_CASE("uncoupled mixed problem has lambda = mu1") {
    for (double p : {2.0, 3.0}) {
      for (double ell : {0.5, 2.0}) {
        const auto spec = CoeffSpec::identity(2, 1);
        const auto full = build_grid({1, ell, {{0.0, 1.0}}, 16, Boundary::Mixed});
        const std::vector<Interval> sec{{0.0, 1.0}};
        const auto sg = build_section_grid(sec, 16);
        const double mu1 = cross_section_mu1(Problem::section(sg, spec, p)).lambda;
        const Problem prob = Problem::full(full, spec, p);
        const EigenResult r = minimize_rayleigh(prob);
        CHECK(r.converged);
        check_eigenfunction(prob, r);
        CHECK(std::abs(r.lambda - mu1) <= 10.0 * 1e-8 * mu1);
      }
    }
  }

  TEST_CASE("scaling the initial guess by 10 does not change the result") {
    const auto g = build_grid({1, 1.0, {{0.0, 1.0}}, 10, Boundary::Dirichlet});
    const Problem prob = Problem::full(g, CoeffSpec::constant(coupled(0.3), 1), 3.0);
    Field init = default_initial_guess(g);
    Field big = init;
    for (auto& v : big.values) v *= 10.0;
    SolverOptions opts;
    opts.tol = 1e-10;
    const EigenResult a = minimize_rayleigh(prob, init, opts);
    const EigenResult b = minimize_rayleigh(prob, big, opts);
    CHECK(a.lambda == doctest::Approx(b.lambda).epsilon(1e-8));
    double diff = 0.0;
    for (std::size_t k = 0; k < a.eigenfunction.size(); ++k) {
      diff = std::max(diff, std::abs(a.eigenfunction[k] - b.eigenfunction[k]));
    }
    CHECK(diff <= 1e-4);
  }

  TEST_CASE("accepted quotients never increase") {
    const auto g = build_grid({1, 2.0, {{0.0, 1.0}}, 8, Boundary::Mixed});
    for (double p : {2.0, 3.0, 4.0}) {
      const Problem prob = Problem::full(g, CoeffSpec::constant(coupled(0.5), 1), p);
      SolverOptions opts;
      opts.record_history = true;
      opts.preconditioned = p != 4.0;
      opts.max_iter = 3000;
      const EigenResult r = minimize_rayleigh(prob, std::nullopt, opts);
      REQUIRE(r.history.size() >= 2);
      for (std::size_t i = 1; i < r.history.size(); ++i) {
        CHECK(r.history[i] <= r.history[i - 1] * (1.0 + 1e-14));
      }
      CHECK(r.history.back() == doctest::Approx(r.lambda).epsilon(1e-12));
    }
  }

  TEST_CASE("Dirichlet eigenvalues decrease with the domain") {
    const auto spec = CoeffSpec::constant(coupled(0.3), 1);
    for (double p : {2.0, 3.0}) {
      double prev = std::numeric_limits<double>::infinity();
      for (double ell : {0.5, 1.0, 2.0, 4.0}) {
        const auto g = build_grid({1, ell, {{0.0, 1.0}}, 8, Boundary::Dirichlet});
        const EigenResult r = minimize_rayleigh(Problem::full(g, spec, p));
        CHECK(r.converged);
        CHECK(r.lambda <= prev + 10.0 * 1e-8 * r.lambda);
        prev = r.lambda;
      }
    }
  }

  TEST_CASE("p = 2 matches the assembled pencil") {
    for (Boundary bc : {Boundary::Dirichlet, Boundary::Mixed}) {
      for (double a : {0.0, 0.5}) {
        const auto g = build_grid({1, 1.0, {{0.0, 1.0}}, 10, bc});
        oracle::Box2D box;
        box.nx = g->node_count(0) - 1;
        box.ny = g->node_count(1) - 1;
        box.a << 1.0, a, a, 1.0;
        box.mixed = bc == Boundary::Mixed;
        const double ref = oracle::smallest_pencil_eigenvalue(box);
        SolverOptions opts;
        opts.tol = 1e-11;
        const Problem prob = Problem::full(g, CoeffSpec::constant(box.a, 1), 2.0);
        const EigenResult r = minimize_rayleigh(prob, std::nullopt, opts);
        CHECK(r.converged);
        CHECK(std::abs(r.lambda / ref - 1.0) <= 1e-6);
      }
    }
  }

  TEST_CASE("restarts never make the result worse") {
    const auto g = build_grid({1, 1.0, {{0.0, 1.0}}, 8, Boundary::Dirichlet});
    const Problem prob = Problem::full(g, CoeffSpec::constant(coupled(0.3), 1), 2.5);
    SolverOptions opts;
    const double one = minimize_rayleigh(prob, std::nullopt, opts).lambda;
    opts.restarts = 2;
    opts.seed = 9;
    const double many = minimize_rayleigh(prob, std::nullopt, opts).lambda;
    CHECK(many <= one * (1.0 + 1e-8));
    CHECK(many == doctest::Approx(one).epsilon(1e-7));
  }

  TEST_CASE("unpreconditioned descent reaches the same eigenvalue") {
    const auto g = build_grid({1, 0.5, {{0.0, 1.0}}, 8, Boundary::Dirichlet});
    const Problem prob = Problem::full(g, CoeffSpec::constant(coupled(0.3), 1), 2.0);
    SolverOptions opts;
    const double pre = minimize_rayleigh(prob, std::nullopt, opts).lambda;
    opts.preconditioned = false;
    const EigenResult plain = minimize_rayleigh(prob, std::nullopt, opts);
    CHECK(plain.lambda == doctest::Approx(pre).epsilon(1e-6));
  }

  TEST_CASE("fully masked grid is an error") {
    const auto g = make_grid({{-1.0, 1.0}, {0.0, 1.0}}, 1, Boundary::Dirichlet);
    const Problem prob = Problem::full(g, CoeffSpec::identity(2, 1), 2.0);
    try {
      minimize_rayleigh(prob);
      FAIL("expected EmptyInterior");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyInterior);
    }
  }

  TEST_CASE("non-convergence is reported, not thrown") {
    const auto g = build_grid({1, 1.0, {{0.0, 1.0}}, 8, Boundary::Dirichlet});
    SolverOptions opts;
    opts.max_iter = 2;
    const EigenResult r = minimize_rayleigh(Problem::full(g, CoeffSpec::identity(2, 1), 3.0), std::nullopt, opts);
    CHECK_FALSE(r.converged);
    CHECK(std::isfinite(r.lambda));
  }

  TEST_CASE("axial resampling preserves fields constant in x1") {
    const auto a = build_grid({1, 1.0, {{0.0, 1.0}}, 8, Boundary::Mixed});
    const auto b = build_grid({1, 3.0, {{0.0, 1.0}}, 8, Boundary::Mixed});
    const Field u = Field::from_function(a, [](auto x) { return x[1] * (1.0 - x[1]); });
    const Field v = resample_axial(u, b);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double x2 = b->coord(k, 1);
      CHECK(v[k] == doctest::Approx(x2 * (1.0 - x2)).epsilon(1e-12));
    }
  }
}
