#pragma once

// Run configuration: a JSON tree with fixed sections. Unknown keys are
// rejected so that typos cannot silently change a run.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plap/anisotropy.hpp"
#include "plap/constructions.hpp"
#include "plap/eigensolver.hpp"
#include "plap/grid.hpp"
#include "plap/picone.hpp"

namespace plap {

struct PolynomialEntry {
  int row = 0;
  int col = 0;
  Polynomial terms;
};

struct CoefficientConfig {
  std::string family = "identity";  ///< identity | constant | polynomial
  Eigen::MatrixXd matrix;           ///< constant family
  std::vector<PolynomialEntry> entries;
  std::optional<double> lambda_min;
  std::optional<double> bound;
};

struct RunConfig {
  double p = 2.0;
  Boundary bc = Boundary::Dirichlet;
  int dim_axial = 1;
  std::vector<Interval> section{{0.0, 1.0}};
  CoefficientConfig coefficient;

  SolverOptions solver;
  int resolution = 16;

  double half_length = 1.0;
  /// What `solve` computes: the full cylinder, the cross-section problem
  /// (coefficient A22) or the Schur-reduced cross-section problem.
  std::string solve_domain = "cylinder";

  std::vector<double> ells;
  bool warm_start = true;
  double gap_threshold = 1e-3;
  GapSearch gap_search;
  bool richardson = true;

  int picone_draws = 200;
  PiconeOptions picone;
  bool picone_field_check = true;

  std::string out_dir = "out";
  std::vector<std::string> formats{"csv", "json"};
  bool dump_eigenfunction = false;

  std::uint64_t seed = 0;

  int dim() const { return dim_axial + static_cast<int>(section.size()); }
  /// Builds and validates the coefficient (shape, symmetry, declared bounds).
  CoeffSpec build_coefficient() const;
};

/// Throws Error(ConfigError) with a path-qualified message on any problem.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

/// Every field with its effective value, for embedding in outputs.
nlohmann::json resolved_json(const RunConfig& cfg);

}  // namespace plap
