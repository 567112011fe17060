#include "plap/picone.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "plap/errors.hpp"

namespace plap {

namespace {

constexpr double kVFloor = 1e-12;

struct Terms {
  double first;   // |A du.du|^(p/2)
  double middle;  // p u^(p-1) |A dv.dv|^((p-2)/2) (A dv.du) / v^(p-1)
  double last;    // (p-1) u^p |A dv.dv|^((p-2)/2) (A dv.dv) / v^p
};

void check_point(const PiconePoint& pt, const Eigen::MatrixXd& a) {
  if (!(pt.v >= kVFloor)) throw Error(ErrorCode::NonpositiveV, "v must be positive, got " + std::to_string(pt.v));
  if (pt.u < 0.0) throw Error(ErrorCode::InvalidArgument, "u must be nonnegative");
  const auto n = static_cast<Eigen::Index>(pt.grad_u.size());
  if (static_cast<Eigen::Index>(pt.grad_v.size()) != n || a.rows() != n || a.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "gradient and matrix dimensions differ");
  }
}

Eigen::Map<const Eigen::VectorXd> as_vec(std::span<const double> s) {
  return {s.data(), static_cast<Eigen::Index>(s.size())};
}

Terms terms(const PiconePoint& pt, const Eigen::MatrixXd& a, double p) {
  check_point(pt, a);
  const auto du = as_vec(pt.grad_u);
  const auto dv = as_vec(pt.grad_v);
  const Eigen::VectorXd adv = a * dv;
  const double quv = std::max(du.dot(a * du), 0.0);
  const double qv = std::max(dv.dot(adv), 0.0);
  const double weight = std::pow(qv, 0.5 * (p - 2.0));
  const double ratio = pt.u / pt.v;
  return {std::pow(quv, 0.5 * p), p * std::pow(ratio, p - 1.0) * weight * adv.dot(du),
          (p - 1.0) * std::pow(ratio, p) * weight * qv};
}

double norm(std::span<const double> s) { return as_vec(s).norm(); }

}  // namespace

double picone_L(const PiconePoint& pt, const Eigen::MatrixXd& a, double p, const PiconeOptions& opts) {
  const Terms t = terms(pt, a, p);
  return t.first - (opts.flip_sign ? -t.middle : t.middle) + t.last;
}

double picone_R(const PiconePoint& pt, const Eigen::MatrixXd& a, double p) {
  check_point(pt, a);
  const auto du = as_vec(pt.grad_u);
  const auto dv = as_vec(pt.grad_v);
  const Eigen::VectorXd adv = a * dv;
  const double qv = std::max(dv.dot(adv), 0.0);
  // grad(u^p / v^(p-1)) = p u^(p-1) du / v^(p-1) - (p-1) u^p dv / v^p
  const Eigen::VectorXd grad_quot = p * std::pow(pt.u, p - 1.0) / std::pow(pt.v, p - 1.0) * du -
                                    (p - 1.0) * std::pow(pt.u, p) / std::pow(pt.v, p) * dv;
  return std::pow(std::max(du.dot(a * du), 0.0), 0.5 * p) - std::pow(qv, 0.5 * (p - 2.0)) * grad_quot.dot(adv);
}

double picone_scale(const PiconePoint& pt, const Eigen::MatrixXd& a, double p) {
  const Terms t = terms(pt, a, p);
  return std::max(1.0, std::abs(t.first) + std::abs(t.middle) + std::abs(t.last));
}

namespace {

struct Accumulator {
  PiconeReport report;
  std::size_t locus_candidates = 0;
  std::size_t locus_cells = 0;

  Accumulator() {
    report.min_L = std::numeric_limits<double>::infinity();
    report.min_L_scaled = std::numeric_limits<double>::infinity();
  }

  void add(const PiconePoint& pt, const Eigen::MatrixXd& a, double p, const PiconeOptions& opts, bool locus_eligible) {
    const double l = picone_L(pt, a, p, opts);
    const double r = picone_R(pt, a, p);
    const double scale = picone_scale(pt, a, p);
    auto& rep = report;
    ++rep.cells;
    rep.max_abs_L_minus_R = std::max(rep.max_abs_L_minus_R, std::abs(l - r));
    rep.max_rel_L_minus_R = std::max(rep.max_rel_L_minus_R, std::abs(l - r) / scale);
    rep.min_L = std::min(rep.min_L, l);
    rep.min_L_scaled = std::min(rep.min_L_scaled, l / scale);
    if (!locus_eligible) return;
    ++locus_candidates;
    if (l >= opts.eq_tol * scale) return;
    ++locus_cells;
    // grad(u / v) = du / v - u dv / v^2
    const auto du = as_vec(pt.grad_u);
    const auto dv = as_vec(pt.grad_v);
    const double dev = (du / pt.v - pt.u / (pt.v * pt.v) * dv).norm();
    rep.grad_ratio_deviation = std::max(rep.grad_ratio_deviation, dev);
    if (dev > opts.ratio_tol * (norm(pt.grad_u) + norm(pt.grad_v))) ++rep.ratio_violations;
  }

  PiconeReport finish() {
    if (report.cells == 0) {
      report.min_L = 0.0;
      report.min_L_scaled = 0.0;
    }
    report.equality_locus_fraction =
        locus_candidates == 0 ? 0.0 : static_cast<double>(locus_cells) / static_cast<double>(locus_candidates);
    return report;
  }
};

}  // namespace

PiconeReport picone_check(const Field& u, const Field& v, const Problem& prob, const PiconeOptions& opts) {
  const Grid& grid = prob.grid();
  if (u.size() != grid.node_count() || v.size() != grid.node_count()) {
    throw Error(ErrorCode::InvalidArgument, "fields do not match the problem grid");
  }
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!grid.masked(k) && !(v[k] >= kVFloor)) {
      throw Error(ErrorCode::NonpositiveV, "v must be positive on unmasked nodes");
    }
    if (u[k] < 0.0) throw Error(ErrorCode::InvalidArgument, "u must be nonnegative");
  }

  const int n = grid.dim();
  const auto& corners = grid.corner_offsets();
  std::vector<double> gu(n);
  std::vector<double> gv(n);
  Eigen::MatrixXd a(n, n);
  Accumulator acc;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const std::size_t base = grid.cell_base_node(c);
    double um = 0.0;
    double vm = 0.0;
    bool touches_zero = false;
    for (const std::size_t off : corners) {
      um += u[base + off];
      vm += v[base + off];
      touches_zero = touches_zero || !(v[base + off] >= kVFloor);
    }
    um /= static_cast<double>(corners.size());
    vm /= static_cast<double>(corners.size());
    grid.gradient_at(u.values.data(), c, gu.data());
    grid.gradient_at(v.values.data(), c, gv.data());
    const double* m = prob.cell_matrix(c);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = m[i * n + j];
    }
    acc.add(PiconePoint{um, gu, vm, gv}, a, prob.p(), opts, !touches_zero);
  }
  return acc.finish();
}

PiconeReport picone_fuzz(int draws, std::uint64_t seed, const PiconeOptions& opts) {
  if (draws < 1) throw Error(ErrorCode::InvalidArgument, "fuzz needs at least one draw");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr std::array<double, 4> exponents{2.0, 2.5, 3.0, 4.0};

  auto random_direction = [&](int n) {
    Eigen::VectorXd d(n);
    do {
      for (int i = 0; i < n; ++i) d(i) = normal(rng);
    } while (d.norm() < 1e-3);
    return Eigen::VectorXd(d / d.norm());
  };
  auto magnitude = [&] { return 0.1 * std::pow(100.0, unit(rng)); };  // log-uniform in [0.1, 10]

  Accumulator acc;
  for (int t = 0; t < draws; ++t) {
    const int n = 1 + static_cast<int>(rng() % 3);
    const double p = exponents[rng() % exponents.size()];

    // A = Q diag(e) Q^T with eigenvalues in [0.2, 5].
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) g(i, j) = normal(rng);
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd e(n);
    for (int i = 0; i < n; ++i) e(i) = 0.2 * std::pow(25.0, unit(rng));
    const Eigen::MatrixXd a = q * e.asDiagonal() * q.transpose();

    const double v = 0.1 + 2.9 * unit(rng);
    const Eigen::VectorXd dv = magnitude() * random_direction(n);
    double u = 0.0;
    Eigen::VectorXd du(n);
    if (t % 4 == 3) {
      const double c = 0.1 + 2.9 * unit(rng);
      u = c * v;
      du = c * dv;
    } else {
      u = 3.0 * unit(rng);
      du = magnitude() * random_direction(n);
    }
    const std::vector<double> gu(du.data(), du.data() + n);
    const std::vector<double> gv(dv.data(), dv.data() + n);
    acc.add(PiconePoint{u, gu, v, gv}, a, p, opts, true);
  }
  return acc.finish();
}

}  // namespace plap
