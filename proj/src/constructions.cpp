#include "plap/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plap/errors.hpp"

namespace plap {

namespace {

// True when x is an integer multiple of h up to rounding.
bool snaps(double x, double h) {
  const double r = x / h;
  return std::abs(r - std::round(r)) < 1e-6;
}

std::string describe(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

double cutoff_value(double ell, double x) {
  if (!(ell > 0.0)) throw Error(ErrorCode::NonPositiveLength, "cutoff needs l > 0");
  const double a = std::abs(x);
  if (a <= 0.5 * ell) return 1.0;
  if (a >= ell) return 0.0;
  return 2.0 * (ell - a) / ell;
}

Field cutoff_v_ell(double ell, int resolution) {
  if (!(ell > 0.0)) throw Error(ErrorCode::NonPositiveLength, "cutoff needs l > 0");
  const std::vector<Interval> axis{{-ell, ell}};
  const GridPtr grid = build_section_grid(axis, resolution);
  Field f = Field::from_function(grid, [ell](std::span<const double> x) { return cutoff_value(ell, x[0]); });
  f.apply_mask();
  return f;
}

Field cutoff_test_function(const GridPtr& full, const Field& section_eigenfunction) {
  const Grid& g = *full;
  const int m = g.dim_axial();
  Field out = extend_section(section_eigenfunction, full);
  std::vector<double> x(g.dim());
  for (std::size_t k = 0; k < out.size(); ++k) {
    g.node_coords(k, x);
    double v = 1.0;
    for (int d = 0; d < m; ++d) {
      const auto& ax = g.nodes(d);
      v = std::min(v, cutoff_value(0.5 * (ax.back() - ax.front()), x[d] - 0.5 * (ax.back() + ax.front())));
    }
    out.values[k] *= v;
  }
  out.apply_mask();
  return out;
}

double dirichlet_upper_bound(const Problem& prob, const Field& section_eigenfunction) {
  return rayleigh(prob, cutoff_test_function(prob.grid_ptr(), section_eigenfunction));
}

double collar_width(double ell, double beta, const Grid& section_grid, CollarPolicy policy) {
  if (!(ell > 0.0)) throw Error(ErrorCode::NonPositiveLength, "collar needs l > 0");
  if (!(beta > 0.0 && beta < 1.0)) throw Error(ErrorCode::InvalidArgument, "beta must lie in (0, 1)");
  double h = 0.0;
  for (int d = 0; d < section_grid.dim(); ++d) h = std::max(h, section_grid.spacing(d));
  const double nominal = policy == CollarPolicy::Length ? ell : std::pow(ell, beta);
  return std::max(nominal, 2.0 * h);
}

Field rho_ell(double ell, double beta, const GridPtr& section_grid, CollarPolicy policy) {
  const Grid& g = *section_grid;
  const double width = collar_width(ell, beta, g, policy);
  double shortest = std::numeric_limits<double>::infinity();
  for (int d = 0; d < g.dim(); ++d) shortest = std::min(shortest, g.nodes(d).back() - g.nodes(d).front());
  // The region where rho = 1 must keep interior points.
  if (!(width < 0.5 * shortest)) {
    throw Error(ErrorCode::CollarTooWide, "collar width " + describe(width) + " leaves no interior in a section of width " +
                                              describe(shortest));
  }
  Field out = Field::from_function(section_grid, [&g, width](std::span<const double> x) {
    double dist = std::numeric_limits<double>::infinity();
    for (int d = 0; d < g.dim(); ++d) {
      dist = std::min({dist, x[d] - g.nodes(d).front(), g.nodes(d).back() - x[d]});
    }
    return std::clamp(dist / width, 0.0, 1.0);
  });
  out.apply_mask();
  return out;
}

Field coupling_ratio(const Field& section_eigenfunction, const CoeffSpec& coeff) {
  const Grid& g = *section_eigenfunction.grid;
  if (coeff.dim_axial() != 1) throw Error(ErrorCode::InvalidArgument, "coupling ratio needs exactly one axial axis");
  if (g.dim() != coeff.dim_section()) throw Error(ErrorCode::GeometryError, "section grid and coefficient differ");
  const int k = g.dim();
  std::vector<double> grad(k);
  std::vector<double> center(k);
  std::vector<double> point(k + 1, 0.0);
  std::vector<double> sum(g.node_count(), 0.0);
  std::vector<int> count(g.node_count(), 0);
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    g.gradient_at(section_eigenfunction.values.data(), c, grad.data());
    g.cell_center(c, center);
    std::copy(center.begin(), center.end(), point.begin() + 1);
    const Eigen::MatrixXd a = coeff.at(point);
    if (!(a(0, 0) > 0.0)) throw Error(ErrorCode::ZeroA11, "a11 must be positive");
    double s = 0.0;
    for (int d = 0; d < k; ++d) s += a(0, d + 1) * grad[d];
    const double value = s / a(0, 0);
    const std::size_t base = g.cell_base_node(c);
    for (const std::size_t off : g.corner_offsets()) {
      sum[base + off] += value;
      ++count[base + off];
    }
  }
  Field out = Field::zeros(section_eigenfunction.grid);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = count[i] ? sum[i] / count[i] : 0.0;
  return out;
}

Field u_eps_ell(const GridPtr& full, double beta, const Field& section_eigenfunction, const CoeffSpec& coeff,
                CollarPolicy policy) {
  const Grid& g = *full;
  if (g.dim_axial() != 1) throw Error(ErrorCode::InvalidArgument, "u_eps_ell needs exactly one axial axis");
  const double ell = 0.5 * (g.nodes(0).back() - g.nodes(0).front());
  const Field rho = rho_ell(ell, beta, section_eigenfunction.grid, policy);
  const Field f = coupling_ratio(section_eigenfunction, coeff);
  Field correction = rho;
  for (std::size_t i = 0; i < correction.size(); ++i) correction.values[i] *= f.values[i];

  Field out = extend_section(section_eigenfunction, full);
  const Field corr_ext = extend_section(correction, full);
  for (std::size_t k = 0; k < out.size(); ++k) out.values[k] -= g.coord(k, 0) * corr_ext.values[k];
  out.apply_mask();
  return out;
}

Field phi_ell(const GridPtr& target, double ell0, double alpha, const Field& u0, const Field& section_eigenfunction) {
  const Grid& tg = *target;
  const Grid& sg = *u0.grid;
  if (tg.dim_axial() != 1 || sg.dim_axial() != 1) throw Error(ErrorCode::GeometryError, "phi_ell needs one axial axis");
  const double h = tg.spacing(0);
  const double ell = 0.5 * (tg.nodes(0).back() - tg.nodes(0).front());
  const double src_ell = 0.5 * (sg.nodes(0).back() - sg.nodes(0).front());
  if (std::abs(src_ell - ell0) > 1e-9 * std::max(1.0, ell0)) {
    throw Error(ErrorCode::GeometryError, "u0 does not live on (-l0, l0)");
  }
  if (!(alpha > 0.0) || !(ell > ell0 + alpha)) throw Error(ErrorCode::GeometryError, "need l > l0 + alpha");
  if (std::abs(sg.spacing(0) - h) > 1e-9 * h) throw Error(ErrorCode::GeometryError, "axial spacings differ");
  if (!snaps(ell0, h) || !snaps(alpha, h) || !snaps(ell, h)) {
    throw Error(ErrorCode::GeometryError, "l0, alpha and l must be multiples of the axial spacing " + describe(h));
  }
  for (int d = 1; d < tg.dim(); ++d) {
    if (tg.node_count(d) != sg.node_count(d)) throw Error(ErrorCode::GeometryError, "section grids differ");
  }

  const Field w_ext = extend_section(section_eigenfunction, target);
  const double inner = ell - ell0 - alpha;  // start of the ramps
  const double outer = ell - ell0;          // start of the end slabs
  const int src_mid = static_cast<int>(std::lround(ell0 / h));

  Field out = Field::zeros(target);
  std::vector<int> idx(tg.dim());
  for (std::size_t k = 0; k < out.size(); ++k) {
    tg.node_multi_index(k, idx);
    const double x = tg.nodes(0)[idx[0]];
    const double a = std::abs(x);
    if (a >= outer - 1e-9 * h) {
      // x -> x - l + l0 on the right, x + l - l0 on the left; both land on
      // nodes of the source axis.
      const double shifted = x > 0.0 ? x - ell + ell0 : x + ell - ell0;
      idx[0] = std::clamp(src_mid + static_cast<int>(std::lround(shifted / h)), 0, sg.node_count(0) - 1);
      out.values[k] = u0.values[sg.node_index(idx)];
    } else if (a > inner) {
      out.values[k] = (a - inner) / alpha * w_ext.values[k];
    }
  }
  out.apply_mask();
  return out;
}

GapCertificate gap_certificate(const CoeffSpec& coeff, double p, std::span<const Interval> section,
                               const GapSearch& search, const std::optional<EigenResult>& section_result) {
  if (coeff.dim_axial() != 1) throw Error(ErrorCode::InvalidArgument, "gap certificate needs exactly one axial axis");
  const GridPtr sgrid = build_section_grid(section, search.resolution);
  EigenResult sec;
  if (section_result.has_value()) {
    sec = *section_result;
    if (sec.eigenfunction.size() != sgrid->node_count()) {
      throw Error(ErrorCode::GeometryError, "section result was computed on a different grid");
    }
  } else {
    sec = cross_section_mu1(Problem::section(sgrid, coeff, p), search.solver);
  }

  GapCertificate cert;
  cert.mu1 = sec.lambda;
  const std::vector<Interval> sec_vec(section.begin(), section.end());
  for (const double ell0 : search.ell0s) {
    GridSpec gs{1, ell0, sec_vec, search.resolution, Boundary::Mixed};
    Field u0;
    try {
      const GridPtr g0 = build_grid(gs);
      if (!snaps(ell0, g0->spacing(0))) {
        throw Error(ErrorCode::GeometryError, "l0 is not a multiple of the axial spacing");
      }
      u0 = u_eps_ell(g0, search.beta, sec.eigenfunction, coeff, search.collar);
    } catch (const Error& e) {
      cert.skipped.push_back("l0=" + describe(ell0) + ": " + e.what());
      continue;
    }
    for (const double alpha : search.alphas) {
      const double ell = ell0 + alpha + 1.0;
      gs.half_length = ell;
      const GridPtr target = build_grid(gs);
      const Problem prob = Problem::full(target, coeff, p);
      const double q = rayleigh(prob, phi_ell(target, ell0, alpha, u0, sec.eigenfunction));
      ++cert.tried;
      if (q < sec.lambda) {
        cert.found = true;
        cert.ell0 = ell0;
        cert.alpha = alpha;
        cert.ell = ell;
        cert.quotient = q;
        cert.margin = sec.lambda - q;
        return cert;
      }
    }
  }
  return cert;
}

}  // namespace plap
