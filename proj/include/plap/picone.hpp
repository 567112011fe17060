#pragma once

// Pointwise Picone identity for the anisotropic p-Laplacian. For u >= 0,
// v > 0 and SPD A:
//   L(u, v) = |A du.du|^(p/2) - p u^(p-1) |A dv.dv|^((p-2)/2) (A dv.du) / v^(p-1)
//             + (p-1) u^p |A dv.dv|^((p-2)/2) (A dv.dv) / v^p
//   R(u, v) = |A du.du|^(p/2) - d(u^p / v^(p-1)) . |A dv.dv|^((p-2)/2) A dv
// and L = R >= 0, with L = 0 exactly where grad(u / v) = 0.

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "plap/energy.hpp"
#include "plap/grid.hpp"

namespace plap {

/// Values and gradients of u and v at one point.
struct PiconePoint {
  double u = 0.0;
  std::span<const double> grad_u;
  double v = 1.0;
  std::span<const double> grad_v;
};

struct PiconeOptions {
  /// L below eq_tol * scale puts a cell on the equality locus.
  double eq_tol = 1e-10;
  /// Allowed |grad(u / v)| on the locus, relative to |grad u| + |grad v|.
  double ratio_tol = 1e-6;
  /// Identity tolerance, relative to the magnitude of the terms.
  double identity_tol = 1e-9;
  /// Test hook: flips the sign of the middle term of L.
  bool flip_sign = false;
};

double picone_L(const PiconePoint& pt, const Eigen::MatrixXd& a, double p, const PiconeOptions& opts = {});
double picone_R(const PiconePoint& pt, const Eigen::MatrixXd& a, double p);
/// max(1, sum of |terms| of L), the magnitude used for relative checks.
double picone_scale(const PiconePoint& pt, const Eigen::MatrixXd& a, double p);

struct PiconeReport {
  std::size_t cells = 0;
  double max_abs_L_minus_R = 0.0;
  double max_rel_L_minus_R = 0.0;  ///< |L - R| / scale
  double min_L = 0.0;
  double min_L_scaled = 0.0;  ///< min of L / scale
  double equality_locus_fraction = 0.0;
  double grad_ratio_deviation = 0.0;  ///< max |grad(u/v)| on the locus
  std::size_t ratio_violations = 0;   ///< locus cells above ratio_tol

  bool passed(const PiconeOptions& opts) const {
    return max_rel_L_minus_R <= opts.identity_tol && min_L_scaled >= -opts.identity_tol && ratio_violations == 0;
  }
};

/// Evaluates L and R at every cell center of the problem grid using cell
/// averages and center gradients of u and v. Cells touching a node where v
/// is zero (masked) are kept for the identity but left out of the
/// equality-locus statistics.
PiconeReport picone_check(const Field& u, const Field& v, const Problem& prob, const PiconeOptions& opts = {});

/// Randomized point draws: dimension 1..3, SPD A, p in {2, 2.5, 3, 4},
/// gradient magnitudes in [0.1, 10]; every fourth draw has u proportional to
/// v so the equality case is exercised.
PiconeReport picone_fuzz(int draws, std::uint64_t seed, const PiconeOptions& opts = {});

}  // namespace plap
