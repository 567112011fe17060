#include <cmath>
#include <random>

#include <doctest.h>

#include "plap/asymptotics.hpp"
#include "plap/eigensolver.hpp"
#include "plap/errors.hpp"
#include "plap/picone.hpp"

using namespace plap;

namespace {

Eigen::MatrixXd coupled(double a) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, a, a, 1.0;
  return m;
}

struct Cylinder {
  CoeffSpec spec = CoeffSpec::constant(coupled(0.3), 1);
  GridPtr full;
  Field w_ext;
  double mu1 = 0.0;

  Cylinder(double p, int res) {
    full = build_grid({1, 1.0, {{0.0, 1.0}}, res, Boundary::Dirichlet});
    const std::vector<Interval> sec{{0.0, 1.0}};
    const auto sg = build_section_grid(sec, res);
    const EigenResult r = cross_section_mu1(Problem::section(sg, spec, p));
    mu1 = r.lambda;
    w_ext = extend_section(r.eigenfunction, full);
  }
};

}  // namespace

TEST_SUITE("picone") {
  TEST_CASE("L vanishes for u = v and for zero gradients") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uni(-2.0, 2.0);
    for (double p : {2.0, 2.5, 3.0, 4.0}) {
      const std::vector<double> g{uni(rng), uni(rng)};
      const std::vector<double> zero{0.0, 0.0};
      const Eigen::MatrixXd a = coupled(0.4);
      CHECK(std::abs(picone_L({1.7, g, 1.7, g}, a, p)) <= 1e-10);
      CHECK(std::abs(picone_R({1.7, g, 1.7, g}, a, p)) <= 1e-10);
      CHECK(picone_L({0.3, zero, 2.0, zero}, a, p) == 0.0);
    }
  }

  TEST_CASE("plug-in example gives 2") {
    // 1 - 0 + 1 for orthogonal unit gradients, A = I, p = 2.
    const std::vector<double> gu{1.0, 0.0};
    const std::vector<double> gv{0.0, 1.0};
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
    CHECK(picone_L({1.0, gu, 1.0, gv}, id, 2.0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(picone_R({1.0, gu, 1.0, gv}, id, 2.0) == doctest::Approx(2.0).epsilon(1e-14));
  }

  TEST_CASE("nonpositive v is rejected") {
    const std::vector<double> g{1.0, 0.0};
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
    for (double v : {0.0, -1.0, 1e-13}) {
      try {
        picone_L({1.0, g, v, g}, id, 2.0);
        FAIL("expected NonpositiveV");
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonpositiveV);
      }
      CHECK_THROWS_AS(picone_R({1.0, g, v, g}, id, 2.0), Error);
    }
  }

  TEST_CASE("randomized draws satisfy the identity") {
    const PiconeOptions opts;
    const PiconeReport r = picone_fuzz(200, 42, opts);
    CHECK(r.cells == 200);
    CHECK(r.max_rel_L_minus_R <= 1e-9);
    CHECK(r.min_L_scaled >= -1e-9);
    CHECK(r.ratio_violations == 0);
    CHECK(r.equality_locus_fraction > 0.0);
    CHECK(r.equality_locus_fraction <= 1.0);
    CHECK(r.max_abs_L_minus_R >= 0.0);
    CHECK(r.passed(opts));
  }

  TEST_CASE("fuzzing is reproducible") {
    const PiconeReport a = picone_fuzz(50, 7);
    const PiconeReport b = picone_fuzz(50, 7);
    CHECK(a.max_abs_L_minus_R == b.max_abs_L_minus_R);
    CHECK(a.min_L == b.min_L);
    CHECK(a.equality_locus_fraction == b.equality_locus_fraction);
  }

  TEST_CASE("sign-flipped L is caught") {
    PiconeOptions opts;
    opts.flip_sign = true;
    const PiconeReport r = picone_fuzz(200, 42, opts);
    CHECK_FALSE(r.passed(opts));
  }

  TEST_CASE("random nonnegative u against the extended cross-section eigenfunction") {
    const Cylinder cyl(3.0, 12);
    const Problem prob = Problem::full(cyl.full, cyl.spec, 3.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int t = 0; t < 5; ++t) {
      Field u = Field::zeros(cyl.full);
      for (auto& v : u.values) v = uni(rng);
      u.apply_mask();
      const PiconeReport r = picone_check(u, cyl.w_ext, prob);
      CHECK(r.cells == cyl.full->cell_count());
      CHECK(r.min_L >= -1e-9);
      CHECK(r.max_rel_L_minus_R <= 1e-9);
      CHECK(r.equality_locus_fraction >= 0.0);
      CHECK(r.equality_locus_fraction <= 1.0);
    }
  }

  TEST_CASE("u = c v puts every interior cell on the equality locus") {
    const Cylinder cyl(2.0, 10);
    const auto sec_grid = build_grid({1, 1.0, {{0.0, 1.0}}, 10, Boundary::Mixed});
    // On the mixed grid the extended W is positive on every unmasked node.
    const Problem mixed = Problem::full(sec_grid, cyl.spec, 2.0);
    const std::vector<Interval> sec{{0.0, 1.0}};
    const auto sg = build_section_grid(sec, 10);
    const Field w = extend_section(cross_section_mu1(Problem::section(sg, cyl.spec, 2.0)).eigenfunction, sec_grid);
    Field u = w;
    for (auto& x : u.values) x *= 3.0;
    const PiconeReport r = picone_check(u, w, mixed);
    CHECK(r.equality_locus_fraction == 1.0);
    CHECK(r.grad_ratio_deviation <= 1e-8);
    CHECK(r.ratio_violations == 0);
  }

  TEST_CASE("v vanishing on an unmasked node is rejected") {
    const Cylinder cyl(2.0, 8);
    const auto mixed = build_grid({1, 1.0, {{0.0, 1.0}}, 8, Boundary::Mixed});
    const Problem prob = Problem::full(mixed, cyl.spec, 2.0);
    Field v = Field::from_function(mixed, [](auto x) { return x[1] * (1.0 - x[1]); });
    Field u = v;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!mixed->masked(k)) {
        v.values[k] = 0.0;
        break;
      }
    }
    try {
      picone_check(u, v, prob);
      FAIL("expected NonpositiveV");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonpositiveV);
    }
  }

  TEST_CASE("lower-bound pipeline: admissible fields stay above mu1") {
    // Integrating L >= 0 against the cross-section equation gives
    // energy(u) >= mu1 int |u|^p for every Dirichlet-admissible u >= 0, up to
    // the cross-section discretization error.
    for (double p : {2.0, 3.0}) {
      const Cylinder cyl(p, 12);
      const Problem prob = Problem::full(cyl.full, cyl.spec, p);
      const std::vector<Interval> sec{{0.0, 1.0}};
      const double eps_h = cross_section_error(cyl.spec, p, sec, 12).error;
      std::mt19937_64 rng(8);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      for (int t = 0; t < 10; ++t) {
        Field u = Field::zeros(cyl.full);
        for (std::size_t k = 0; k < u.size(); ++k) u.values[k] = uni(rng) * (0.2 + cyl.w_ext[k]);
        u.apply_mask();
        const double norm = lp_norm_p(prob, u);
        CHECK(energy(prob, u) >= (cyl.mu1 - eps_h) * norm);
        CHECK(picone_check(u, cyl.w_ext, prob).min_L >= -1e-9);
      }
      const EigenResult r = minimize_rayleigh(prob);
      CHECK(r.lambda >= cyl.mu1 - eps_h);
    }
  }
}
