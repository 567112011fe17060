#include "plap/energy.hpp"

#include <algorithm>
#include <cmath>

#include "plap/errors.hpp"

namespace plap {

namespace {

void check_size(const Problem& prob, std::size_t n) {
  if (n != prob.grid().node_count()) throw Error(ErrorCode::InvalidArgument, "field does not match the grid");
}

void check_grid(const Problem& prob, const Field& u) {
  if (u.grid.get() != prob.grid_ptr().get()) {
    check_size(prob, u.size());
  }
}

// |q|^(p/2) with the common exponents special-cased.
inline double density(double q, double half_p) {
  q = std::max(q, 0.0);
  if (half_p == 1.0) return q;
  if (half_p == 1.5) return q * std::sqrt(q);
  if (half_p == 2.0) return q * q;
  return std::pow(q, half_p);
}

inline double density_slope(double q, double half_p) {
  // q^((p-2)/2)
  q = std::max(q, 0.0);
  if (half_p == 1.0) return 1.0;
  if (half_p == 1.5) return std::sqrt(q);
  if (half_p == 2.0) return q;
  return std::pow(q, half_p - 1.0);
}

inline double quad_form(const double* a, const double* g, int n, double* ag) {
  double q = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a[i * n + j] * g[j];
    ag[i] = s;
    q += s * g[i];
  }
  return q;
}

inline double abs_pow(double v, double p) {
  const double a = std::abs(v);
  if (p == 2.0) return a * a;
  if (p == 3.0) return a * a * a;
  if (p == 4.0) {
    const double s = a * a;
    return s * s;
  }
  return std::pow(a, p);
}

}  // namespace

Problem::Problem(GridPtr grid, const CellCoefficient& coeff, double p) : grid_(std::move(grid)), p_(p) {
  if (!(p >= 2.0) || !std::isfinite(p)) {
    throw Error(ErrorCode::InvalidExponent, "p must be >= 2, got " + std::to_string(p));
  }
  const int n = grid_->dim();
  matrices_.resize(grid_->cell_count() * static_cast<std::size_t>(n * n));
  std::vector<double> x(n);
  for (std::size_t c = 0; c < grid_->cell_count(); ++c) {
    grid_->cell_center(c, x);
    const Eigen::MatrixXd a = coeff(x);
    if (a.rows() != n || a.cols() != n) throw Error(ErrorCode::InvalidArgument, "coefficient has wrong shape");
    double* out = matrices_.data() + c * static_cast<std::size_t>(n * n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out[i * n + j] = 0.5 * (a(i, j) + a(j, i));
    }
  }
}

Problem Problem::full(GridPtr grid, const CoeffSpec& coeff, double p) {
  if (grid->dim() != coeff.dim() || grid->dim_axial() != coeff.dim_axial()) {
    throw Error(ErrorCode::InvalidArgument, "grid and coefficient block layout differ");
  }
  if (grid->bc() == Boundary::Mixed && coeff.a11_depends_on_axial()) {
    throw Error(ErrorCode::InvalidArgument, "mixed problems need a11 independent of x1");
  }
  return Problem(std::move(grid), [&coeff](std::span<const double> x) { return coeff.at(x); }, p);
}

Problem Problem::section(GridPtr section_grid, const CoeffSpec& coeff, double p) {
  if (section_grid->dim() != coeff.dim_section()) {
    throw Error(ErrorCode::InvalidArgument, "section grid dimension differs from the coefficient's X2 block");
  }
  return Problem(std::move(section_grid),
                 [&coeff](std::span<const double> x) { return section_block(coeff, x); }, p);
}

Problem Problem::reduced(GridPtr section_grid, const CoeffSpec& coeff, double p) {
  if (section_grid->dim() != coeff.dim_section()) {
    throw Error(ErrorCode::InvalidArgument, "section grid dimension differs from the coefficient's X2 block");
  }
  return Problem(std::move(section_grid),
                 [&coeff](std::span<const double> x) { return schur_reduced(coeff, x); }, p);
}

double energy(const Problem& prob, std::span<const double> u) {
  check_size(prob, u.size());
  const Grid& grid = prob.grid();
  const int n = grid.dim();
  const int nq = grid.quadrature_points();
  const double half_p = 0.5 * prob.p();
  double local[64];
  double g[6];
  double ag[6];
  double s = 0.0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    grid.gather_corners(u.data(), c, local);
    const double* a = prob.cell_matrix(c);
    for (int q = 0; q < nq; ++q) {
      grid.quadrature_gradient(local, q, g);
      s += density(quad_form(a, g, n, ag), half_p);
    }
  }
  return grid.cell_volume() / nq * s;
}

double energy(const Problem& prob, const Field& u) {
  check_grid(prob, u);
  return energy(prob, std::span<const double>(u.values));
}

double lp_norm_p(const Problem& prob, std::span<const double> u) {
  check_size(prob, u.size());
  const Grid& grid = prob.grid();
  const double p = prob.p();
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k] != 0.0) s += grid.node_weight(k) * abs_pow(u[k], p);
  }
  return s;
}

double lp_norm_p(const Problem& prob, const Field& u) {
  check_grid(prob, u);
  return lp_norm_p(prob, std::span<const double>(u.values));
}

double rayleigh(const Problem& prob, const Field& u) {
  const double denom = lp_norm_p(prob, u);
  if (!(denom > 0.0)) throw Error(ErrorCode::ZeroDenominator, "Rayleigh quotient of a zero field");
  return energy(prob, u) / denom;
}

double energy_and_gradient(const Problem& prob, std::span<const double> u, std::span<double> out) {
  check_size(prob, u.size());
  check_size(prob, out.size());
  const Grid& grid = prob.grid();
  const int n = grid.dim();
  const int nq = grid.quadrature_points();
  const std::size_t nc = grid.corner_offsets().size();
  const auto& corners = grid.corner_offsets();
  const double p = prob.p();
  const double half_p = 0.5 * p;
  const double wq = grid.cell_volume() / nq;

  std::fill(out.begin(), out.end(), 0.0);
  double local[64];
  double flux_sum[64];
  double g[6];
  double ag[6];
  double e = 0.0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    grid.gather_corners(u.data(), c, local);
    const double* a = prob.cell_matrix(c);
    std::fill(flux_sum, flux_sum + nc, 0.0);
    bool any = false;
    for (int q = 0; q < nq; ++q) {
      const double* dq = grid.quadrature_derivatives(q);
      grid.quadrature_gradient(local, q, g);
      const double qf = quad_form(a, g, n, ag);
      e += density(qf, half_p);
      const double w = wq * p * density_slope(qf, half_p);
      if (w == 0.0) continue;
      any = true;
      for (int d = 0; d < n; ++d) {
        const double f = w * ag[d];
        const double* row = dq + d * nc;
        for (std::size_t b = 0; b < nc; ++b) flux_sum[b] += f * row[b];
      }
    }
    if (!any) continue;
    const std::size_t base = grid.cell_base_node(c);
    for (std::size_t b = 0; b < nc; ++b) out[base + corners[b]] += flux_sum[b];
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (grid.masked(k)) out[k] = 0.0;
  }
  return wq * e;
}

Field energy_gradient(const Problem& prob, const Field& u) {
  check_grid(prob, u);
  Field out = Field::zeros(u.grid);
  energy_and_gradient(prob, u.values, out.values);
  return out;
}

void mass_gradient(const Problem& prob, std::span<const double> u, std::span<double> out) {
  check_size(prob, u.size());
  check_size(prob, out.size());
  const Grid& grid = prob.grid();
  const double p = prob.p();
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (grid.masked(k) || u[k] == 0.0) {
      out[k] = 0.0;
      continue;
    }
    const double a = std::abs(u[k]);
    const double mag = (p == 2.0) ? a : std::pow(a, p - 1.0);
    out[k] = grid.node_weight(k) * (u[k] > 0.0 ? mag : -mag);
  }
}

Field mass_gradient(const Problem& prob, const Field& u) {
  check_grid(prob, u);
  Field out = Field::zeros(u.grid);
  mass_gradient(prob, u.values, out.values);
  return out;
}

double weak_residual(const Problem& prob, const Field& u, double lam) {
  const double norm = lp_norm_p(prob, u);
  if (std::abs(norm - 1.0) > 1e-8) {
    throw Error(ErrorCode::InvalidArgument, "weak_residual needs int |u|^p = 1, got " + std::to_string(norm));
  }
  std::vector<double> ge(u.size());
  std::vector<double> gm(u.size());
  energy_and_gradient(prob, u.values, ge);
  mass_gradient(prob, u.values, gm);
  const double inv_p = 1.0 / prob.p();
  double r = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (prob.grid().masked(k)) continue;
    r = std::max(r, std::abs(ge[k] * inv_p - lam * gm[k]));
  }
  return r;
}

}  // namespace plap
