#include "plap/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>

#include "plap/errors.hpp"

namespace plap {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr double kMinStep = 1e-12;
constexpr double kMaxStep = 1e3;
constexpr int kPlateau = 10;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Applies the inverse of (K + M) restricted to unmasked nodes.
class Preconditioner {
 public:
  explicit Preconditioner(const Problem& prob) : grid_(prob.grid_ptr()) {
    const Grid& g = *grid_;
    free_index_.assign(g.node_count(), -1);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
      if (!g.masked(k)) {
        free_index_[k] = static_cast<int>(free_nodes_.size());
        free_nodes_.push_back(k);
      }
    }
    const Eigen::SparseMatrix<double> k_full = assemble_linear_stiffness(prob);
    std::vector<Eigen::Triplet<double>> trips;
    for (int col = 0; col < k_full.outerSize(); ++col) {
      const int jc = free_index_[col];
      if (jc < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(k_full, col); it; ++it) {
        const int ir = free_index_[it.row()];
        if (ir >= 0) trips.emplace_back(ir, jc, it.value());
      }
      trips.emplace_back(jc, jc, g.node_weight(static_cast<std::size_t>(col)));
    }
    const auto n = static_cast<Eigen::Index>(free_nodes_.size());
    matrix_.resize(n, n);
    matrix_.setFromTriplets(trips.begin(), trips.end());
    llt_.compute(matrix_);
    if (llt_.info() != Eigen::Success) {
      throw Error(ErrorCode::InvalidArgument, "preconditioner factorization failed");
    }
    rhs_.resize(n);
  }

  void apply(std::span<const double> r, std::span<double> out) {
    for (std::size_t i = 0; i < free_nodes_.size(); ++i) rhs_(static_cast<Eigen::Index>(i)) = r[free_nodes_[i]];
    const Eigen::VectorXd z = llt_.solve(rhs_);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < free_nodes_.size(); ++i) out[free_nodes_[i]] = z(static_cast<Eigen::Index>(i));
  }

  double energy_norm(std::span<const double> x) {
    for (std::size_t i = 0; i < free_nodes_.size(); ++i) rhs_(static_cast<Eigen::Index>(i)) = x[free_nodes_[i]];
    return rhs_.dot(matrix_ * rhs_);
  }

 private:
  GridPtr grid_;
  std::vector<int> free_index_;
  std::vector<std::size_t> free_nodes_;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  Eigen::VectorXd rhs_;
};

void normalize(const Problem& prob, std::vector<double>& u) {
  const double n = lp_norm_p(prob, u);
  if (!(n > 0.0)) throw Error(ErrorCode::ZeroDenominator, "cannot normalize a zero field");
  const double s = std::pow(n, -1.0 / prob.p());
  for (double& v : u) v *= s;
}

struct State {
  std::vector<double> u;
  std::vector<double> ge;  // energy derivative
  std::vector<double> gm;  // mass derivative
  std::vector<double> r;   // gradient of the quotient
  double lambda = 0.0;
  double residual = 0.0;
};

void evaluate_state(const Problem& prob, State& s) {
  const double e = energy_and_gradient(prob, s.u, s.ge);
  mass_gradient(prob, s.u, s.gm);
  const double n = lp_norm_p(prob, s.u);
  s.lambda = e / n;
  const double p = prob.p();
  double res = 0.0;
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    s.r[k] = (s.ge[k] - s.lambda * p * s.gm[k]) / n;
    res = std::max(res, std::abs(s.ge[k] / p - s.lambda * s.gm[k]));
  }
  s.residual = res;
}

EigenResult descend(const Problem& prob, std::vector<double> u0, const SolverOptions& opts,
                    Preconditioner* pre) {
  const std::size_t n = u0.size();
  State s;
  s.u = std::move(u0);
  s.ge.resize(n);
  s.gm.resize(n);
  s.r.resize(n);
  normalize(prob, s.u);
  evaluate_state(prob, s);

  EigenResult out;
  if (opts.record_history) out.history.push_back(s.lambda);

  State cand;
  cand.ge.resize(n);
  cand.gm.resize(n);
  cand.r.resize(n);

  std::vector<double> d(n), trial(n), prev_u(n), prev_r(n), du(n), dr(n);
  double step = 0.0;
  int plateau = 0;
  int it = 0;
  bool converged = false;
  for (it = 1; it <= opts.max_iter; ++it) {
    if (pre != nullptr) {
      pre->apply(s.r, d);
    } else {
      d = s.r;
    }
    const double slope = dot(s.r, d);
    if (!(slope > 0.0)) {
      converged = s.residual < 10.0 * opts.tol;
      break;
    }

    if (it == 1) {
      step = 0.1 * std::sqrt(dot(s.u, s.u) / dot(d, d));
    } else {
      for (std::size_t k = 0; k < n; ++k) {
        du[k] = s.u[k] - prev_u[k];
        dr[k] = s.r[k] - prev_r[k];
      }
      const double den = dot(du, dr);
      const double num = pre != nullptr ? pre->energy_norm(du) : dot(du, du);
      if (den > 0.0) step = num / den;
    }
    step = std::clamp(step, kMinStep, kMaxStep);

    bool accepted = false;
    bool by_residual = false;
    double trial_lambda = s.lambda;
    // Below this decrease the quotient cannot rank two iterates in double
    // precision; the residual decides instead.
    const double noise = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(s.lambda);
    while (step >= kMinStep) {
      for (std::size_t k = 0; k < n; ++k) trial[k] = s.u[k] - step * d[k];
      const double tn = lp_norm_p(prob, trial);
      if (tn > 0.0) {
        trial_lambda = energy(prob, trial) / tn;
        if (trial_lambda <= s.lambda - kArmijo * step * slope) {
          accepted = true;
          break;
        }
        if (step * slope <= noise && trial_lambda <= s.lambda + noise) {
          cand.u = trial;
          normalize(prob, cand.u);
          evaluate_state(prob, cand);
          if (cand.residual < s.residual) {
            accepted = true;
            by_residual = true;
            break;
          }
        }
      }
      step *= kShrink;
    }
    if (!accepted) {
      converged = s.residual < 10.0 * opts.tol;
      break;
    }

    prev_u.swap(s.u);
    prev_r = s.r;
    const double old_lambda = s.lambda;
    if (by_residual) {
      std::swap(s, cand);
    } else {
      s.u = trial;
      normalize(prob, s.u);
      evaluate_state(prob, s);
    }
    if (opts.record_history) out.history.push_back(s.lambda);

    const double rel = std::abs(old_lambda - s.lambda) / std::max(std::abs(old_lambda), 1e-300);
    plateau = rel < opts.tol ? plateau + 1 : 0;
    if (plateau >= kPlateau && s.residual < 10.0 * opts.tol) {
      converged = true;
      break;
    }
  }

  out.lambda = s.lambda;
  out.residual = s.residual;
  out.iterations = std::min(it, opts.max_iter);
  out.converged = converged;
  out.eigenfunction.values = std::move(s.u);
  return out;
}

// Sign tie-break: the nodal maximum is positive; stray negative values left
// by rounding are projected to zero and the pair is re-evaluated.
void canonicalize(const Problem& prob, EigenResult& res, double tol) {
  auto& u = res.eigenfunction.values;
  const auto [mn, mx] = std::minmax_element(u.begin(), u.end());
  if (-*mn > *mx) {
    for (double& v : u) v = -v;
  }
  for (double& v : u) v = std::max(v, 0.0);
  normalize(prob, u);
  res.lambda = rayleigh(prob, res.eigenfunction);
  res.residual = weak_residual(prob, res.eigenfunction, res.lambda);
  res.converged = res.converged && res.residual < 10.0 * tol;
}

}  // namespace

Field default_initial_guess(const GridPtr& grid) {
  Field f = Field::zeros(grid);
  const int n = grid->dim();
  std::vector<double> x(n);
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (grid->masked(k)) continue;
    grid->node_coords(k, x);
    double v = 1.0;
    for (int d = 0; d < n; ++d) {
      if (!grid->axis_pinned(d)) continue;
      const auto& ax = grid->nodes(d);
      v *= std::sin(std::numbers::pi * (x[d] - ax.front()) / (ax.back() - ax.front()));
    }
    f.values[k] = v;
  }
  return f;
}

Eigen::SparseMatrix<double> assemble_linear_stiffness(const Problem& prob) {
  const Grid& g = prob.grid();
  const int n = g.dim();
  const auto& corners = g.corner_offsets();
  const auto nc = static_cast<int>(corners.size());
  const int nq = g.quadrature_points();
  const double wq = g.cell_volume() / nq;

  std::vector<Eigen::MatrixXd> grad_ops(nq, Eigen::MatrixXd(n, nc));
  for (int q = 0; q < nq; ++q) {
    const double* dq = g.quadrature_derivatives(q);
    for (int d = 0; d < n; ++d) {
      for (int b = 0; b < nc; ++b) grad_ops[q](d, b) = dq[d * nc + b];
    }
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(g.cell_count() * static_cast<std::size_t>(nc * nc));
  Eigen::MatrixXd a(n, n);
  Eigen::MatrixXd ke(nc, nc);
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const double* m = prob.cell_matrix(c);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) a(i, j) = m[i * n + j];
    }
    ke.setZero();
    for (const auto& op : grad_ops) ke.noalias() += wq * op.transpose() * a * op;
    const std::size_t base = g.cell_base_node(c);
    for (int i = 0; i < nc; ++i) {
      for (int j = 0; j < nc; ++j) {
        trips.emplace_back(static_cast<int>(base + corners[i]), static_cast<int>(base + corners[j]), ke(i, j));
      }
    }
  }
  const auto total = static_cast<Eigen::Index>(g.node_count());
  Eigen::SparseMatrix<double> k(total, total);
  k.setFromTriplets(trips.begin(), trips.end());
  return k;
}

EigenResult minimize_rayleigh(const Problem& prob, const std::optional<Field>& init, const SolverOptions& opts) {
  const GridPtr& grid = prob.grid_ptr();
  if (grid->unmasked_count() == 0) throw Error(ErrorCode::EmptyInterior, "every node is masked");
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
  if (opts.max_iter < 1) throw Error(ErrorCode::InvalidArgument, "max_iter must be positive");

  std::vector<double> start;
  if (init.has_value()) {
    if (init->size() != grid->node_count()) throw Error(ErrorCode::InvalidArgument, "initial field does not match the grid");
    start = init->values;
    for (std::size_t k = 0; k < start.size(); ++k) {
      if (grid->masked(k)) start[k] = 0.0;
    }
    if (lp_norm_p(prob, start) == 0.0) throw Error(ErrorCode::InvalidArgument, "initial field vanishes");
  } else {
    start = default_initial_guess(grid).values;
  }

  std::optional<Preconditioner> pre;
  if (opts.preconditioned) pre.emplace(prob);
  Preconditioner* pre_ptr = pre ? &*pre : nullptr;

  EigenResult best = descend(prob, start, opts, pre_ptr);
  best.eigenfunction.grid = grid;
  canonicalize(prob, best, opts.tol);

  if (opts.restarts > 0) {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> jitter(0.0, 0.5);
    for (int r = 0; r < opts.restarts; ++r) {
      std::vector<double> perturbed = start;
      for (double& v : perturbed) v = std::abs(v) * (1.0 + jitter(rng));
      EigenResult cand = descend(prob, std::move(perturbed), opts, pre_ptr);
      cand.eigenfunction.grid = grid;
      canonicalize(prob, cand, opts.tol);
      const bool better = cand.lambda < best.lambda - opts.tol * std::abs(best.lambda) ||
                          (!best.converged && cand.converged && cand.lambda <= best.lambda * (1.0 + opts.tol));
      if (better) best = std::move(cand);
    }
  }
  return best;
}

EigenResult cross_section_mu1(const Problem& section_prob, const SolverOptions& opts) {
  if (section_prob.grid().dim_axial() != 0) {
    throw Error(ErrorCode::InvalidArgument, "cross-section solve expects a section grid");
  }
  return minimize_rayleigh(section_prob, std::nullopt, opts);
}

EigenResult reduced_lambda(const Problem& reduced_prob, const SolverOptions& opts) {
  const int n = reduced_prob.dim();
  for (std::size_t c = 0; c < reduced_prob.grid().cell_count(); ++c) {
    Eigen::Map<const Eigen::MatrixXd> m(reduced_prob.cell_matrix(c), n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::InvalidArgument, "Schur-reduced coefficient is not positive definite");
    }
  }
  return cross_section_mu1(reduced_prob, opts);
}

Field extend_section(const Field& section_field, const GridPtr& full) {
  const Grid& sg = *section_field.grid;
  const Grid& fg = *full;
  const int m = fg.dim_axial();
  if (fg.dim() - m != sg.dim()) throw Error(ErrorCode::GeometryError, "section dimensions differ");
  for (int d = 0; d < sg.dim(); ++d) {
    const auto& a = sg.nodes(d);
    const auto& b = fg.nodes(m + d);
    if (a.size() != b.size() || std::abs(a.front() - b.front()) > 1e-12 || std::abs(a.back() - b.back()) > 1e-12) {
      throw Error(ErrorCode::GeometryError, "section grids do not coincide");
    }
  }
  Field out = Field::zeros(full);
  std::vector<int> idx(fg.dim());
  for (std::size_t k = 0; k < out.size(); ++k) {
    fg.node_multi_index(k, idx);
    out.values[k] = section_field.values[sg.node_index(std::span<const int>(idx).subspan(m))];
  }
  return out;
}

Field resample_axial(const Field& src, const GridPtr& dst) {
  const Grid& sg = *src.grid;
  const Grid& dg = *dst;
  const int n = dg.dim();
  const int m = dg.dim_axial();
  if (sg.dim() != n || sg.dim_axial() != m) throw Error(ErrorCode::GeometryError, "grids have different layouts");
  for (int d = m; d < n; ++d) {
    if (sg.node_count(d) != dg.node_count(d)) throw Error(ErrorCode::GeometryError, "section grids do not coincide");
  }

  Field out = Field::zeros(dst);
  std::vector<int> didx(n);
  std::vector<int> sidx(n);
  std::vector<int> lo(m);
  std::vector<double> frac(m);
  for (std::size_t k = 0; k < out.size(); ++k) {
    dg.node_multi_index(k, didx);
    for (int d = 0; d < m; ++d) {
      const auto& da = dg.nodes(d);
      const auto& sa = sg.nodes(d);
      // Map to the unit interval, then onto the source axis.
      const double t = (da[didx[d]] - da.front()) / (da.back() - da.front());
      const double pos = t * static_cast<double>(sa.size() - 1);
      int i = std::clamp(static_cast<int>(std::floor(pos)), 0, static_cast<int>(sa.size()) - 2);
      lo[d] = i;
      frac[d] = pos - i;
    }
    for (int d = m; d < n; ++d) sidx[d] = didx[d];
    double v = 0.0;
    for (int b = 0; b < (1 << m); ++b) {
      double w = 1.0;
      for (int d = 0; d < m; ++d) {
        const bool up = (b >> d) & 1;
        sidx[d] = lo[d] + (up ? 1 : 0);
        w *= up ? frac[d] : 1.0 - frac[d];
      }
      if (w != 0.0) v += w * src.values[sg.node_index(sidx)];
    }
    out.values[k] = v;
  }
  out.apply_mask();
  return out;
}

}  // namespace plap
