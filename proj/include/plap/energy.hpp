#pragma once

// Discrete energy E[u] = sum_cells (vol / 2^n) sum_q |A g_q.g_q|^(p/2) with
// g_q the gradient of the multilinear interpolant at the 2^n Gauss points of
// the cell and A sampled at the cell center, the L^p mass sum_k w_k |u_k|^p, their nodal derivatives and the
// weak-form residual of the eigenvalue equation.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "plap/anisotropy.hpp"
#include "plap/grid.hpp"

namespace plap {

using CellCoefficient = std::function<Eigen::MatrixXd(std::span<const double>)>;

/// A grid, a coefficient sampled once per cell center, and the exponent p >= 2.
class Problem {
 public:
  Problem(GridPtr grid, const CellCoefficient& coeff, double p);

  /// Full problem on Omega_l. For mixed grids A11 must not vary with x1.
  static Problem full(GridPtr grid, const CoeffSpec& coeff, double p);
  /// Cross-section problem on omega_2 with coefficient A22.
  static Problem section(GridPtr section_grid, const CoeffSpec& coeff, double p);
  /// Cross-section problem with the Schur-reduced coefficient (m = 1).
  static Problem reduced(GridPtr section_grid, const CoeffSpec& coeff, double p);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  double p() const { return p_; }
  int dim() const { return grid_->dim(); }

  /// Row-major dim x dim coefficient at the center of `cell`.
  const double* cell_matrix(std::size_t cell) const {
    return matrices_.data() + cell * static_cast<std::size_t>(dim() * dim());
  }

 private:
  GridPtr grid_;
  double p_;
  std::vector<double> matrices_;
};

double energy(const Problem& prob, const Field& u);
double energy(const Problem& prob, std::span<const double> u);

/// Returns the integral of |u|^p (not its p-th root).
double lp_norm_p(const Problem& prob, const Field& u);
double lp_norm_p(const Problem& prob, std::span<const double> u);

double rayleigh(const Problem& prob, const Field& u);

/// Nodal derivative of the energy, zero on masked nodes.
Field energy_gradient(const Problem& prob, const Field& u);
/// Writes the energy derivative into `out` and returns the energy.
double energy_and_gradient(const Problem& prob, std::span<const double> u, std::span<double> out);

/// Nodal derivative of (1/p) * integral |u|^p, zero on masked nodes.
Field mass_gradient(const Problem& prob, const Field& u);
void mass_gradient(const Problem& prob, std::span<const double> u, std::span<double> out);

/// max over unmasked nodes k of |dE/du_k / p - lam * d((1/p) int |u|^p)/du_k|.
/// Requires int |u|^p = 1 within 1e-8.
double weak_residual(const Problem& prob, const Field& u, double lam);

}  // namespace plap
