#include "plap/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plap/errors.hpp"

namespace plap {

namespace {

std::vector<double> uniform_axis(double lo, double hi, int resolution) {
  // Cell count rounds up so that the spacing never exceeds 1/resolution; the
  // small slack keeps exact multiples (e.g. l = 0.05 at 20 per unit) snapped.
  const double cells_exact = (hi - lo) * resolution;
  int cells = static_cast<int>(std::ceil(cells_exact - 1e-9));
  cells = std::max(cells, 1);
  std::vector<double> x(static_cast<std::size_t>(cells) + 1);
  for (int i = 0; i <= cells; ++i) {
    x[i] = lo + (hi - lo) * static_cast<double>(i) / cells;
  }
  x.back() = hi;
  return x;
}

}  // namespace

std::size_t Grid::unmasked_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), char{0}));
}

std::size_t Grid::node_index(std::span<const int> idx) const {
  std::size_t k = 0;
  for (int d = 0; d < dim(); ++d) k += static_cast<std::size_t>(idx[d]) * strides_[d];
  return k;
}

void Grid::node_multi_index(std::size_t node, std::span<int> idx) const {
  for (int d = 0; d < dim(); ++d) {
    idx[d] = static_cast<int>(node / strides_[d]);
    node %= strides_[d];
  }
}

double Grid::coord(std::size_t node, int axis) const {
  const std::size_t i = (node / strides_[axis]) % axes_[axis].size();
  return axes_[axis][i];
}

void Grid::node_coords(std::size_t node, std::span<double> x) const {
  for (int d = 0; d < dim(); ++d) {
    x[d] = axes_[d][node / strides_[d]];
    node %= strides_[d];
  }
}

void Grid::cell_center(std::size_t cell, std::span<double> x) const {
  std::size_t base = cell_base_[cell];
  for (int d = 0; d < dim(); ++d) {
    const std::size_t i = base / strides_[d];
    base %= strides_[d];
    x[d] = 0.5 * (axes_[d][i] + axes_[d][i + 1]);
  }
}

void Grid::gradient_at(const double* u, std::size_t cell, double* g) const {
  const std::size_t base = cell_base_[cell];
  const int n = dim();
  for (int d = 0; d < n; ++d) g[d] = 0.0;
  for (std::size_t b = 0; b < corner_offsets_.size(); ++b) {
    const double v = u[base + corner_offsets_[b]];
    for (int d = 0; d < n; ++d) {
      if (b & (std::size_t{1} << d)) {
        g[d] += v;
      } else {
        g[d] -= v;
      }
    }
  }
  for (int d = 0; d < n; ++d) g[d] *= gradient_scale_ / spacing_[d];
}

double Grid::corner_mean_abs_pow(const double* u, std::size_t cell, double power) const {
  const std::size_t base = cell_base_[cell];
  double s = 0.0;
  for (const std::size_t off : corner_offsets_) s += std::pow(std::abs(u[base + off]), power);
  return s / static_cast<double>(corner_offsets_.size());
}

void Grid::quadrature_gradient(const double* corners, int q, double* g) const {
  const int n = dim();
  const std::size_t nc = corner_offsets_.size();
  const double* dq = quadrature_derivatives(q);
  for (int d = 0; d < n; ++d) {
    double s = 0.0;
    for (std::size_t b = 0; b < nc; ++b) s += dq[d * nc + b] * corners[b];
    g[d] = s;
  }
}

GridPtr make_grid(std::vector<std::vector<double>> axes, int dim_axial, Boundary bc) {
  auto g = std::make_shared<Grid>();
  const int n = static_cast<int>(axes.size());
  if (n == 0) throw Error(ErrorCode::InvalidGrid, "grid needs at least one axis");
  if (n > 6) throw Error(ErrorCode::InvalidGrid, "at most 6 dimensions are supported");
  for (const auto& a : axes) {
    if (a.size() < 2) throw Error(ErrorCode::InvalidGrid, "every axis needs at least two nodes");
  }
  g->dim_axial_ = dim_axial;
  g->bc_ = bc;
  g->axes_ = std::move(axes);

  g->spacing_.resize(n);
  g->strides_.assign(n, 1);
  g->pinned_.assign(n, 1);
  for (int d = 0; d < n; ++d) {
    const auto& a = g->axes_[d];
    g->spacing_[d] = (a.back() - a.front()) / static_cast<double>(a.size() - 1);
    if (bc == Boundary::Mixed && d < dim_axial) g->pinned_[d] = 0;
  }
  for (int d = n - 2; d >= 0; --d) g->strides_[d] = g->strides_[d + 1] * g->axes_[d + 1].size();

  std::size_t nodes = 1;
  std::size_t cells = 1;
  for (const auto& a : g->axes_) {
    nodes *= a.size();
    cells *= a.size() - 1;
  }

  g->cell_volume_ = 1.0;
  for (double h : g->spacing_) g->cell_volume_ *= h;
  g->gradient_scale_ = 1.0 / static_cast<double>(std::size_t{1} << (n - 1));

  g->corner_offsets_.resize(std::size_t{1} << n);
  for (std::size_t b = 0; b < g->corner_offsets_.size(); ++b) {
    std::size_t off = 0;
    for (int d = 0; d < n; ++d) {
      if (b & (std::size_t{1} << d)) off += g->strides_[d];
    }
    g->corner_offsets_[b] = off;
  }

  // Quadrature point q sits at t_d = 1/2 +- 1/(2 sqrt 3) by bit d of q. The
  // derivative of the corner-b shape function along d is
  // (+-1 / h_d) * prod_{e != d} phi_{b_e}(t_e), phi_1(t) = t, phi_0(t) = 1 - t.
  {
    const std::size_t nc = g->corner_offsets_.size();
    const double off = 0.5 / std::sqrt(3.0);
    g->quad_derivs_.assign(nc * static_cast<std::size_t>(n) * nc, 0.0);
    for (std::size_t q = 0; q < nc; ++q) {
      for (int d = 0; d < n; ++d) {
        for (std::size_t b = 0; b < nc; ++b) {
          double v = ((b >> d) & 1 ? 1.0 : -1.0) / g->spacing_[d];
          for (int e = 0; e < n; ++e) {
            if (e == d) continue;
            const double t = 0.5 + ((q >> e) & 1 ? off : -off);
            v *= ((b >> e) & 1) ? t : 1.0 - t;
          }
          g->quad_derivs_[(q * n + d) * nc + b] = v;
        }
      }
    }
  }

  // Mask: a node is pinned when it sits on either end of a pinned axis.
  g->mask_.assign(nodes, 0);
  std::vector<int> idx(n);
  for (std::size_t k = 0; k < nodes; ++k) {
    g->node_multi_index(k, idx);
    for (int d = 0; d < n; ++d) {
      const bool on_end = idx[d] == 0 || idx[d] == static_cast<int>(g->axes_[d].size()) - 1;
      if (on_end && g->pinned_[d]) {
        g->mask_[k] = 1;
        break;
      }
    }
  }

  g->cell_base_.resize(cells);
  std::vector<int> cidx(n, 0);
  for (std::size_t c = 0; c < cells; ++c) {
    g->cell_base_[c] = g->node_index(cidx);
    for (int d = n - 1; d >= 0; --d) {
      if (++cidx[d] < static_cast<int>(g->axes_[d].size()) - 1) break;
      cidx[d] = 0;
    }
  }

  g->weights_.assign(nodes, 0.0);
  const double w = g->cell_volume_ / static_cast<double>(g->corner_offsets_.size());
  for (std::size_t c = 0; c < cells; ++c) {
    for (const std::size_t off : g->corner_offsets_) g->weights_[g->cell_base_[c] + off] += w;
  }
  return g;
}

GridPtr build_grid(const GridSpec& spec) {
  if (!(spec.half_length > 0.0)) {
    throw Error(ErrorCode::NonPositiveLength, "half_length must be positive, got " + std::to_string(spec.half_length));
  }
  if (spec.dim_axial < 1) throw Error(ErrorCode::InvalidGrid, "dim_axial must be at least 1");
  if (spec.bc == Boundary::Mixed && spec.dim_axial != 1) {
    throw Error(ErrorCode::MixedRequiresOneAxial, "mixed boundary conditions need exactly one axial axis");
  }
  if (spec.section.empty()) throw Error(ErrorCode::InvalidGrid, "cross-section needs at least one interval");
  if (spec.resolution < 4) throw Error(ErrorCode::InvalidGrid, "resolution must be at least 4 nodes per unit");
  for (const auto& iv : spec.section) {
    if (!(iv.lo < iv.hi)) throw Error(ErrorCode::InvalidGrid, "section extent needs lo < hi");
  }

  std::vector<std::vector<double>> axes;
  for (int d = 0; d < spec.dim_axial; ++d) {
    axes.push_back(uniform_axis(-spec.half_length, spec.half_length, spec.resolution));
  }
  for (const auto& iv : spec.section) axes.push_back(uniform_axis(iv.lo, iv.hi, spec.resolution));
  return make_grid(std::move(axes), spec.dim_axial, spec.bc);
}

GridPtr build_section_grid(std::span<const Interval> section, int resolution) {
  if (section.empty()) throw Error(ErrorCode::InvalidGrid, "cross-section needs at least one interval");
  if (resolution < 4) throw Error(ErrorCode::InvalidGrid, "resolution must be at least 4 nodes per unit");
  std::vector<std::vector<double>> axes;
  for (const auto& iv : section) {
    if (!(iv.lo < iv.hi)) throw Error(ErrorCode::InvalidGrid, "section extent needs lo < hi");
    axes.push_back(uniform_axis(iv.lo, iv.hi, resolution));
  }
  return make_grid(std::move(axes), 0, Boundary::Dirichlet);
}

Field Field::zeros(GridPtr grid) {
  Field f;
  f.values.assign(grid->node_count(), 0.0);
  f.grid = std::move(grid);
  return f;
}

Field Field::from_function(GridPtr grid, const std::function<double(std::span<const double>)>& f) {
  Field out = zeros(std::move(grid));
  std::vector<double> x(out.grid->dim());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.grid->node_coords(k, x);
    out.values[k] = f(x);
  }
  return out;
}

void Field::apply_mask() {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (grid->masked(k)) values[k] = 0.0;
  }
}

bool Field::respects_mask() const {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) return false;
    if (grid->masked(k) && values[k] != 0.0) return false;
  }
  return true;
}

CellGradients cell_gradient(const Field& u) {
  const Grid& g = *u.grid;
  CellGradients out;
  out.dim = g.dim();
  out.data.resize(g.cell_count() * static_cast<std::size_t>(g.dim()));
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    g.gradient_at(u.values.data(), c, out.data.data() + c * static_cast<std::size_t>(g.dim()));
  }
  return out;
}

double integrate_nodal(const Field& f, double power) {
  if (!(power >= 1.0)) throw Error(ErrorCode::InvalidArgument, "integration power must be >= 1");
  const Grid& g = *f.grid;
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double a = std::abs(f.values[k]);
    if (a != 0.0) s += g.node_weight(k) * std::pow(a, power);
  }
  return s;
}

}  // namespace plap
