#include "plap/anisotropy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "plap/errors.hpp"

namespace plap {

namespace {

bool depends_on_axes(const Polynomial& poly, int first, int last) {
  for (const auto& m : poly) {
    if (m.coef == 0.0) continue;
    for (int d = first; d < last && d < static_cast<int>(m.powers.size()); ++d) {
      if (m.powers[d] != 0) return true;
    }
  }
  return false;
}

std::vector<double> full_point(const CoeffSpec& spec, std::span<const double> section_point) {
  if (static_cast<int>(section_point.size()) != spec.dim_section()) {
    throw Error(ErrorCode::InvalidArgument, "section point has wrong dimension");
  }
  std::vector<double> x(spec.dim(), 0.0);
  std::copy(section_point.begin(), section_point.end(), x.begin() + spec.dim_axial());
  return x;
}

std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

}  // namespace

double evaluate(const Polynomial& poly, std::span<const double> x) {
  double s = 0.0;
  for (const auto& m : poly) {
    double t = m.coef;
    for (std::size_t d = 0; d < m.powers.size(); ++d) {
      if (m.powers[d] == 0) continue;
      if (d >= x.size()) throw Error(ErrorCode::InvalidArgument, "monomial refers to a missing coordinate");
      t *= std::pow(x[d], m.powers[d]);
    }
    s += t;
  }
  return s;
}

Polynomial constant_polynomial(double c) { return {Monomial{c, {}}}; }

CoeffSpec::CoeffSpec(int dim, int dim_axial, std::vector<Polynomial> upper, double lambda_min,
                     double bound)
    : dim_(dim), dim_axial_(dim_axial), upper_(std::move(upper)), lambda_min_(lambda_min), bound_(bound) {
  if (dim < 1 || dim_axial < 0 || dim_axial >= dim) {
    throw Error(ErrorCode::InvalidArgument, "coefficient needs 0 <= m < n");
  }
  if (static_cast<int>(upper_.size()) != dim * (dim + 1) / 2) {
    throw Error(ErrorCode::InvalidArgument, "expected n(n+1)/2 upper-triangular entries");
  }
  if (!(lambda_min > 0.0) || !(bound >= lambda_min)) {
    throw Error(ErrorCode::InvalidArgument, "declared bounds need 0 < lambda_min <= M");
  }
  for (const auto& poly : upper_) {
    for (const auto& m : poly) {
      if (static_cast<int>(m.powers.size()) > dim) {
        throw Error(ErrorCode::InvalidArgument, "monomial has more exponents than coordinates");
      }
      for (int e : m.powers) {
        if (e < 0) throw Error(ErrorCode::InvalidArgument, "negative exponent");
      }
    }
  }
  // A12 and A22 may depend on X2 only.
  for (int i = 0; i < dim; ++i) {
    for (int j = std::max(i, dim_axial); j < dim; ++j) {
      if (depends_on_axes(entry(i, j), 0, dim_axial)) {
        throw Error(ErrorCode::InvalidArgument, "A12 and A22 must not depend on the axial coordinates");
      }
    }
  }
}

CoeffSpec CoeffSpec::identity(int dim, int dim_axial) {
  std::vector<Polynomial> upper;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) upper.push_back(constant_polynomial(i == j ? 1.0 : 0.0));
  }
  return CoeffSpec(dim, dim_axial, std::move(upper), 1.0, 1.0);
}

CoeffSpec CoeffSpec::constant(const Eigen::MatrixXd& a, int dim_axial, double lambda_min, double bound) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::InvalidArgument, "coefficient matrix must be square");
  const int n = static_cast<int>(a.rows());
  std::vector<Polynomial> upper;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > 1e-14 * std::max(1.0, std::abs(a(i, j)))) {
        throw Error(ErrorCode::InvalidArgument, "coefficient matrix must be symmetric");
      }
      upper.push_back(constant_polynomial(a(i, j)));
    }
  }
  return CoeffSpec(n, dim_axial, std::move(upper), lambda_min, bound);
}

CoeffSpec CoeffSpec::constant(const Eigen::MatrixXd& a, int dim_axial) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw Error(ErrorCode::EllipticityViolation, "constant coefficient is not positive definite");
  return constant(a, dim_axial, lo, hi);
}

int CoeffSpec::index(int i, int j) const {
  if (i > j) std::swap(i, j);
  // Row i of the upper triangle starts after rows 0..i-1 of lengths n, n-1, ...
  return i * dim_ - i * (i - 1) / 2 + (j - i);
}

const Polynomial& CoeffSpec::entry(int i, int j) const { return upper_[index(i, j)]; }

bool CoeffSpec::a11_depends_on_axial() const {
  for (int i = 0; i < dim_axial_; ++i) {
    for (int j = i; j < dim_axial_; ++j) {
      if (depends_on_axes(entry(i, j), 0, dim_axial_)) return true;
    }
  }
  return false;
}

bool CoeffSpec::coupling_is_zero() const {
  for (int i = 0; i < dim_axial_; ++i) {
    for (int j = dim_axial_; j < dim_; ++j) {
      for (const auto& m : entry(i, j)) {
        if (m.coef != 0.0) return false;
      }
    }
  }
  return true;
}

Eigen::MatrixXd CoeffSpec::at(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw Error(ErrorCode::InvalidArgument, "point has wrong dimension");
  Eigen::MatrixXd a(dim_, dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int j = i; j < dim_; ++j) {
      a(i, j) = evaluate(entry(i, j), x);
      a(j, i) = a(i, j);
    }
  }
  return a;
}

Eigen::MatrixXd eval_matrix(const CoeffSpec& spec, std::span<const double> point) { return spec.at(point); }

Eigen::MatrixXd section_block(const CoeffSpec& spec, std::span<const double> section_point) {
  const auto x = full_point(spec, section_point);
  const int k = spec.dim_section();
  return spec.at(x).bottomRightCorner(k, k);
}

EllipticityStats validate_ellipticity(const CoeffSpec& spec, const Grid& grid, int probes, std::uint64_t seed) {
  if (probes < 100) throw Error(ErrorCode::InvalidArgument, "ellipticity validation needs at least 100 probes");
  if (grid.dim() != spec.dim()) throw Error(ErrorCode::InvalidArgument, "grid and coefficient dimensions differ");
  const int n = spec.dim();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // At most 256 cells, evenly strided, keep the cost bounded on large grids.
  const std::size_t cells = grid.cell_count();
  const std::size_t stride = std::max<std::size_t>(1, cells / 256);

  EllipticityStats stats{std::numeric_limits<double>::infinity(), 0.0};
  std::vector<double> x(n);
  Eigen::VectorXd xi(n);
  for (std::size_t c = 0; c < cells; c += stride) {
    grid.cell_center(c, x);
    const Eigen::MatrixXd a = spec.at(x);
    double local_min = std::numeric_limits<double>::infinity();
    for (int t = 0; t < probes; ++t) {
      for (int d = 0; d < n; ++d) xi(d) = normal(rng);
      const double len = xi.norm();
      if (len == 0.0) continue;
      xi /= len;
      local_min = std::min(local_min, xi.dot(a * xi));
      stats.max_norm = std::max(stats.max_norm, (a * xi).norm());
    }
    stats.min_rayleigh = std::min(stats.min_rayleigh, local_min);
    if (local_min < spec.lambda_min() - 1e-9) {
      throw Error(ErrorCode::EllipticityViolation,
                  "A(x) xi.xi = " + std::to_string(local_min) + " below declared lambda_min at " + format_point(x));
    }
    if (stats.max_norm > spec.bound() + 1e-9) {
      throw Error(ErrorCode::EllipticityViolation,
                  "|A(x)| estimate " + std::to_string(stats.max_norm) + " above declared M at " + format_point(x));
    }
  }
  return stats;
}

Eigen::MatrixXd schur_reduced(const CoeffSpec& spec, std::span<const double> section_point) {
  if (spec.dim_axial() != 1) throw Error(ErrorCode::InvalidArgument, "Schur reduction needs exactly one axial axis");
  const auto x = full_point(spec, section_point);
  const Eigen::MatrixXd a = spec.at(x);
  const double a11 = a(0, 0);
  if (!(a11 > 0.0)) throw Error(ErrorCode::ZeroA11, "a11 must be positive at " + format_point(section_point));
  const int k = spec.dim_section();
  const Eigen::RowVectorXd a12 = a.block(0, 1, 1, k);
  return a.bottomRightCorner(k, k) - a12.transpose() * a12 / a11;
}

}  // namespace plap
