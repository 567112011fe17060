#pragma once

// Tensor-product grids on the stretched cylinder (-l, l)^m x omega_2 and on
// the cross-section omega_2 alone. Nodes are ordered with the last axis
// varying fastest; axial axes come first.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace plap {

enum class Boundary { Dirichlet, Mixed };

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
};

struct GridSpec {
  int dim_axial = 1;               ///< number of stretched axes m
  double half_length = 1.0;        ///< l
  std::vector<Interval> section;   ///< box cross-section omega_2
  int resolution = 16;             ///< nodes per unit length
  Boundary bc = Boundary::Dirichlet;
};

class Grid {
 public:
  int dim() const { return static_cast<int>(axes_.size()); }
  int dim_axial() const { return dim_axial_; }
  Boundary bc() const { return bc_; }

  const std::vector<double>& nodes(int axis) const { return axes_[axis]; }
  int node_count(int axis) const { return static_cast<int>(axes_[axis].size()); }
  double spacing(int axis) const { return spacing_[axis]; }
  std::size_t stride(int axis) const { return strides_[axis]; }

  std::size_t node_count() const { return mask_.size(); }
  std::size_t cell_count() const { return cell_base_.size(); }
  double cell_volume() const { return cell_volume_; }
  double measure() const { return cell_volume_ * static_cast<double>(cell_count()); }

  /// True where the field is pinned to zero.
  bool masked(std::size_t node) const { return mask_[node] != 0; }
  const std::vector<char>& dirichlet_mask() const { return mask_; }
  std::size_t unmasked_count() const;

  /// Quadrature weight of a node: sum over adjacent cells of vol / 2^n.
  double node_weight(std::size_t node) const { return weights_[node]; }
  const std::vector<double>& node_weights() const { return weights_; }

  /// Both ends of this axis carry Dirichlet data.
  bool axis_pinned(int axis) const { return pinned_[axis] != 0; }

  std::size_t node_index(std::span<const int> idx) const;
  void node_multi_index(std::size_t node, std::span<int> idx) const;
  double coord(std::size_t node, int axis) const;
  void node_coords(std::size_t node, std::span<double> x) const;

  std::size_t cell_base_node(std::size_t cell) const { return cell_base_[cell]; }
  /// Node offsets of the 2^n cell corners; bit d of the corner id selects the
  /// upper end along axis d.
  const std::vector<std::size_t>& corner_offsets() const { return corner_offsets_; }
  void cell_center(std::size_t cell, std::span<double> x) const;

  /// Multilinear-element gradient at the cell center, written to g[0..dim).
  void gradient_at(const double* u, std::size_t cell, double* g) const;
  /// Mean of |u|^power over the cell corners.
  double corner_mean_abs_pow(const double* u, std::size_t cell, double power) const;

  /// Tensor Gauss-Legendre rule with two points per axis (2^n points, equal
  /// weights vol / 2^n). Integrates products of multilinear gradients exactly.
  int quadrature_points() const { return static_cast<int>(corner_offsets_.size()); }
  /// Row-major dim x 2^n matrix mapping corner values to the gradient of the
  /// multilinear interpolant at quadrature point q.
  const double* quadrature_derivatives(int q) const {
    return quad_derivs_.data() + static_cast<std::size_t>(q) * static_cast<std::size_t>(dim()) * corner_offsets_.size();
  }
  void gather_corners(const double* u, std::size_t cell, double* out) const {
    const std::size_t base = cell_base_[cell];
    for (std::size_t b = 0; b < corner_offsets_.size(); ++b) out[b] = u[base + corner_offsets_[b]];
  }
  /// Gradient at quadrature point q from gathered corner values.
  void quadrature_gradient(const double* corners, int q, double* g) const;

 private:
  friend std::shared_ptr<const Grid> make_grid(std::vector<std::vector<double>>, int, Boundary);

  int dim_axial_ = 0;
  Boundary bc_ = Boundary::Dirichlet;
  std::vector<std::vector<double>> axes_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::vector<char> pinned_;
  std::vector<char> mask_;
  std::vector<double> weights_;
  std::vector<std::size_t> cell_base_;
  std::vector<std::size_t> corner_offsets_;
  std::vector<double> quad_derivs_;
  double cell_volume_ = 0.0;
  double gradient_scale_ = 0.0;  // 1 / 2^(n-1)
};

using GridPtr = std::shared_ptr<const Grid>;

/// Low-level constructor from explicit axis node lists (uniform per axis).
GridPtr make_grid(std::vector<std::vector<double>> axes, int dim_axial, Boundary bc);

GridPtr build_grid(const GridSpec& spec);

/// Dirichlet grid on omega_2 alone (no axial axes).
GridPtr build_section_grid(std::span<const Interval> section, int resolution);

/// Nodal scalar function on a grid.
struct Field {
  GridPtr grid;
  std::vector<double> values;

  static Field zeros(GridPtr grid);
  static Field from_function(GridPtr grid,
                             const std::function<double(std::span<const double>)>& f);

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  void apply_mask();
  /// Finite everywhere and zero on every masked node.
  bool respects_mask() const;
};

/// Per-cell gradient vectors, row-major (cell, axis).
struct CellGradients {
  int dim = 0;
  std::vector<double> data;

  std::size_t cell_count() const { return dim == 0 ? 0 : data.size() / static_cast<std::size_t>(dim); }
  std::span<const double> operator[](std::size_t cell) const {
    return {data.data() + cell * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

CellGradients cell_gradient(const Field& u);

/// Sum over cells of vol * mean_corners |f|^power.
double integrate_nodal(const Field& f, double power);

}  // namespace plap
