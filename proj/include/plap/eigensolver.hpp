#pragma once

// First eigenpair by projected gradient descent on the L^p unit sphere.
//
// Each step moves along the (optionally Sobolev-preconditioned) gradient of
// the Rayleigh quotient with an Armijo backtracking line search seeded by a
// Barzilai-Borwein step, then rescales to int |u|^p = 1. The quotient
// sequence is non-increasing by construction.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "plap/energy.hpp"
#include "plap/grid.hpp"

namespace plap {

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 50000;
  /// Extra solves from randomly perturbed positive starts; the lowest wins.
  int restarts = 0;
  std::uint64_t seed = 0;
  /// Precondition the gradient with the p = 2 stiffness of the same
  /// coefficient (plus lumped mass).
  bool preconditioned = true;
  bool record_history = false;
};

struct EigenResult {
  double lambda = 0.0;
  Field eigenfunction;  ///< nonnegative, int |u|^p = 1
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  ///< accepted quotients, when requested
};

/// Product of half-period sines over the pinned axes, constant along free
/// (Neumann) axes; strictly positive on unmasked nodes.
Field default_initial_guess(const GridPtr& grid);

EigenResult minimize_rayleigh(const Problem& prob, const std::optional<Field>& init = std::nullopt,
                              const SolverOptions& opts = {});

/// (mu_1, W) of the cross-section problem built with Problem::section.
EigenResult cross_section_mu1(const Problem& section_prob, const SolverOptions& opts = {});

/// Lambda of the Schur-reduced cross-section problem built with
/// Problem::reduced. Throws when the reduced form is not positive definite.
EigenResult reduced_lambda(const Problem& reduced_prob, const SolverOptions& opts = {});

/// W(X2) extended constantly along the axial axes of `full` (unmasked).
Field extend_section(const Field& section_field, const GridPtr& full);

/// Transfers a field between two grids of the same cross-section by
/// stretching the axial coordinates (x1 -> x1 * l_src / l_dst) and
/// interpolating multilinearly.
Field resample_axial(const Field& src, const GridPtr& dst);

/// p = 2 stiffness over all nodes, integrated with the energy's Gauss rule.
Eigen::SparseMatrix<double> assemble_linear_stiffness(const Problem& prob);

}  // namespace plap
