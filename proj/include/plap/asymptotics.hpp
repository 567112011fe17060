#pragma once

// Sweeps over the half-length l, the discretization-error estimate of the
// cross-section eigenvalue, the C / l^q rate fit for Dirichlet sweeps and the
// gap decision for mixed sweeps.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plap/anisotropy.hpp"
#include "plap/constructions.hpp"
#include "plap/eigensolver.hpp"
#include "plap/grid.hpp"

namespace plap {

enum class GapVerdict { Gap, NoGap, Undetermined };

std::string to_string(GapVerdict v);

struct SweepRecord {
  double ell = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Rayleigh quotient of an explicit admissible test function: v_l W for
  /// Dirichlet, the better of W and u_eps_ell for mixed.
  double upper_bound = 0.0;
  bool cold_restart = false;  ///< warm start failed to converge
  double wall_time = 0.0;     ///< seconds; not written to deterministic outputs
};

struct RichardsonEstimate {
  double value = 0.0;         ///< eigenvalue at the base resolution
  double extrapolated = 0.0;  ///< limit h -> 0
  double order = 0.0;         ///< observed convergence order, 0 if not monotone
  double error = 0.0;         ///< |value - extrapolated|
};

/// mu1 at resolutions r, 2r, 4r and a three-level Richardson extrapolation.
RichardsonEstimate cross_section_error(const CoeffSpec& coeff, double p, std::span<const Interval> section, int resolution,
                                       const SolverOptions& opts = {});

struct RateFit {
  double C = 0.0;
  double exponent = 0.0;
  std::size_t points = 0;
};

/// Least-squares fit of log(lambda - mu1) = log C - q log l over converged
/// records with lambda - mu1 > noise. Throws NonPositiveGap if some record
/// sits below mu1 - tolerance and InsufficientData with fewer than 3 points.
RateFit fit_rate(std::span<const SweepRecord> records, double mu1, double tolerance, double noise = 0.0);

/// sum_cells vol |A12(c) . grad W(c)| on the section grid (m = 1).
double coupling_measure(const Field& section_eigenfunction, const CoeffSpec& coeff);
/// sum_cells vol |grad W(c)|, the scale the coupling threshold refers to.
double gradient_scale(const Field& section_eigenfunction);

struct GapEvidence {
  double coupling = 0.0;
  double scale = 1.0;
  double threshold = 1e-3;
  bool certificate_found = false;
  double max_deviation = 0.0;  ///< max over the sweep of |lambda_M - mu1|
  double tolerance = 0.0;
};

/// Gap when coupling is above threshold * scale and a certificate exists;
/// NoGap when coupling is below it and the sweep stays at mu1; otherwise
/// Undetermined.
GapVerdict gap_detect(const GapEvidence& e);

struct SweepOptions {
  std::vector<double> ells;
  int resolution = 16;
  bool warm_start = true;
  int jobs = 1;  ///< parallel solves, only used without warm starts
  SolverOptions solver;
  double gap_threshold = 1e-3;
  GapSearch gap_search;  ///< resolution and solver are overridden by the sweep's
  bool richardson = true;
};

struct SweepReport {
  Boundary bc = Boundary::Dirichlet;
  double p = 2.0;
  std::vector<SweepRecord> records;  ///< sorted by l
  double mu1 = 0.0;
  RichardsonEstimate mu1_error;
  std::optional<double> reduced_lambda;  ///< mixed only
  double coupling_measure = 0.0;
  double gradient_scale = 0.0;
  std::optional<RateFit> fit;  ///< Dirichlet only, when the fit succeeds
  std::string fit_error;
  GapVerdict gap = GapVerdict::Undetermined;
  std::optional<GapCertificate> certificate;  ///< mixed only
};

SweepReport sweep(const CoeffSpec& coeff, double p, std::span<const Interval> section, Boundary bc,
                  const SweepOptions& opts);

}  // namespace plap
