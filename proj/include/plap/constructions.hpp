#pragma once

// Explicit test functions whose Rayleigh quotients bound eigenvalues from
// above: the axial cutoff times the cross-section eigenfunction (Dirichlet),
// the odd-in-x1 correction W - x1 rho F (mixed, small l), and the five-piece
// field that transports that correction to long cylinders (gap certificate).

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plap/anisotropy.hpp"
#include "plap/eigensolver.hpp"
#include "plap/energy.hpp"
#include "plap/grid.hpp"

namespace plap {

/// Axial cutoff: 1 on [-l/2, l/2], linear down to 0 at +-l, slope 2/l.
double cutoff_value(double ell, double x);
/// The cutoff sampled on a 1D Dirichlet grid over (-l, l).
Field cutoff_v_ell(double ell, int resolution);
/// v_l(X1) W(X2) on a full grid, with v_l(X1) = min over axial axes.
Field cutoff_test_function(const GridPtr& full, const Field& section_eigenfunction);
/// Rayleigh quotient of v_l W: an upper bound for the Dirichlet eigenvalue.
double dirichlet_upper_bound(const Problem& prob, const Field& section_eigenfunction);

/// Width of the boundary collar where rho_ell ramps from 0 to 1.
enum class CollarPolicy {
  Length,  ///< max(l, 2h): thin collar, slope 1/l
  Power,   ///< max(l^beta, 2h): slope at most 1/l^beta, wider collar
};

double collar_width(double ell, double beta, const Grid& section_grid, CollarPolicy policy = CollarPolicy::Length);
/// min(1, dist(X2, boundary) / width) on the cross-section grid. Throws
/// CollarTooWide when the collar swallows the section.
Field rho_ell(double ell, double beta, const GridPtr& section_grid, CollarPolicy policy = CollarPolicy::Length);

/// Nodal average of the cell values (A12 . grad W) / a11.
Field coupling_ratio(const Field& section_eigenfunction, const CoeffSpec& coeff);
/// W(X2) - x1 rho(X2) F(X2) on a mixed grid over (-l, l) x omega_2.
Field u_eps_ell(const GridPtr& full, double beta, const Field& section_eigenfunction, const CoeffSpec& coeff,
                CollarPolicy policy = CollarPolicy::Length);

/// Five-piece field on `target` (half-length l): translated halves of u0 on
/// the end slabs of width l0, ramps xi W / alpha next to them, zero in the
/// middle. l0, alpha and l must be whole multiples of the axial spacing.
Field phi_ell(const GridPtr& target, double ell0, double alpha, const Field& u0, const Field& section_eigenfunction);

struct GapSearch {
  std::vector<double> ell0s{0.05, 0.1, 0.2, 0.4};
  std::vector<double> alphas{2.0, 4.0, 8.0, 16.0, 32.0};
  double beta = 0.5;
  CollarPolicy collar = CollarPolicy::Length;
  int resolution = 20;
  SolverOptions solver;
};

struct GapCertificate {
  bool found = false;
  double ell0 = 0.0;
  double alpha = 0.0;
  double ell = 0.0;
  double quotient = 0.0;  ///< Rayleigh quotient of phi_l
  double margin = 0.0;    ///< mu1 - quotient
  double mu1 = 0.0;
  int tried = 0;
  std::vector<std::string> skipped;  ///< l0 values that could not be built, with reasons
};

/// Scans (l0, alpha) in order and stops at the first phi_l with quotient
/// below mu1, for l = l0 + alpha + 1. A precomputed cross-section solve on
/// the same resolution can be passed to skip the inner solve.
GapCertificate gap_certificate(const CoeffSpec& coeff, double p, std::span<const Interval> section,
                               const GapSearch& search = {}, const std::optional<EigenResult>& section_result = std::nullopt);

}  // namespace plap
