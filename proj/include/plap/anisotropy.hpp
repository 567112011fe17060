#pragma once

// Coefficient fields A(x) with the block layout
//
//     A = [ A11(x)      A12(X2) ]
//         [ A12(X2)^T   A22(X2) ]
//
// where the first m coordinates are axial. Entries come from a closed family
// of polynomials in the coordinates; constant matrices are the common case.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "plap/grid.hpp"

namespace plap {

struct Monomial {
  double coef = 0.0;
  std::vector<int> powers;  ///< exponent per coordinate; missing trailing entries are 0
};

using Polynomial = std::vector<Monomial>;

double evaluate(const Polynomial& poly, std::span<const double> x);
Polynomial constant_polynomial(double c);

class CoeffSpec {
 public:
  /// `upper` holds the n(n+1)/2 upper-triangular entries, row by row.
  CoeffSpec(int dim, int dim_axial, std::vector<Polynomial> upper, double lambda_min, double bound);

  static CoeffSpec identity(int dim, int dim_axial);
  /// Constant matrix with explicitly declared ellipticity bounds.
  static CoeffSpec constant(const Eigen::MatrixXd& a, int dim_axial, double lambda_min, double bound);
  /// Constant matrix; bounds set to its extreme eigenvalues.
  static CoeffSpec constant(const Eigen::MatrixXd& a, int dim_axial);

  int dim() const { return dim_; }
  int dim_axial() const { return dim_axial_; }
  int dim_section() const { return dim_ - dim_axial_; }
  double lambda_min() const { return lambda_min_; }
  double bound() const { return bound_; }

  const Polynomial& entry(int i, int j) const;
  /// True when any entry of A11 varies with the axial coordinates.
  bool a11_depends_on_axial() const;
  /// True when A12 is identically zero.
  bool coupling_is_zero() const;

  Eigen::MatrixXd at(std::span<const double> x) const;

 private:
  int index(int i, int j) const;

  int dim_;
  int dim_axial_;
  std::vector<Polynomial> upper_;
  double lambda_min_;
  double bound_;
};

Eigen::MatrixXd eval_matrix(const CoeffSpec& spec, std::span<const double> point);

/// A22 evaluated at a cross-section point X2.
Eigen::MatrixXd section_block(const CoeffSpec& spec, std::span<const double> section_point);

struct EllipticityStats {
  double min_rayleigh = 0.0;
  double max_norm = 0.0;
};

/// Samples A at grid cell centers against random unit probes. Throws
/// EllipticityViolation when the declared bounds are broken by more than 1e-9.
EllipticityStats validate_ellipticity(const CoeffSpec& spec, const Grid& grid, int probes,
                                      std::uint64_t seed = 1);

/// A22 - A12^T A12 / a11 at X2 (m = 1). The minimum over z1 of A z.z for
/// fixed Z2 equals this form applied to Z2, attained at z1 = -A12.Z2 / a11.
Eigen::MatrixXd schur_reduced(const CoeffSpec& spec, std::span<const double> section_point);

}  // namespace plap
