#include "crlab/reduce.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "crlab/error.hpp"
#include "crlab/webster.hpp"

namespace crlab {

namespace {

std::vector<double> stretched_axis(int n, double half, double h0) {
  const int m = (n - 1) / 2;
  const double ratio = half / (h0 * m);
  std::vector<double> a(n);
  if (ratio <= 1.0 + 1e-12) {
    for (int i = 0; i < n; ++i) a[i] = half * (i - m) / static_cast<double>(m);
    return a;
  }
  double lo = 1e-8, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::sinh(mid) / mid < ratio ? lo : hi) = mid;
  }
  const double b = 0.5 * (lo + hi);
  const double c = half / std::sinh(b);
  for (int i = 0; i < n; ++i) a[i] = c * std::sinh(b * (i - m) / static_cast<double>(m));
  a[0] = -half;
  a[n - 1] = half;
  a[m] = 0.0;
  return a;
}

Jet2 normalized_jet(const Jet2& j, double lambda) {
  const double l1 = 1.0 / lambda, l2 = l1 * l1;
  Jet2 r = j;
  r.Z *= l1;
  r.Zb *= l1;
  r.T *= l2;
  r.ZZ *= l2;
  r.ZbZb *= l2;
  r.ZZb *= l2;
  r.ZbZ *= l2;
  return r;
}

bool outside_support(const Deformation& d, const HPoint& p) {
  if (d.is_zero()) return true;
  if (!d.support_balls.empty()) {
    for (const auto& ball : d.support_balls)
      if (ball.contains(p)) return false;
    return true;
  }
  return std::isfinite(d.support_radius) && koranyi_distance(p, d.support_center) >= d.support_radius;
}

std::array<double, 3> metric_coefficients(cplx f) {
  const double D = 1.0 - std::norm(f);
  if (!(D > 0.0)) throw DomainError("degenerate Levi form: |f| >= 1");
  return {std::norm(1.0 + f) / (4.0 * D), std::norm(1.0 - f) / (4.0 * D), -f.imag() / (2.0 * D)};
}

constexpr std::array<double, 3> kFlat{0.25, 0.25, 0.0};

/// Visits every half-cell anchor: f(anchor, neighbours {a, bx, by, bt}, gx, gy, weight).
template <class F>
void for_each_anchor(const Grid& g, F&& visit) {
  const auto& ax = g.axis(0);
  const auto& ay = g.axis(1);
  const auto& at = g.axis(2);
  const double kappa = g.params().kappa;
  for (int i = 0; i + 1 < g.nx(); ++i)
    for (int j = 0; j + 1 < g.ny(); ++j)
      for (int k = 0; k + 1 < g.nt(); ++k) {
        const double hx = ax[i + 1] - ax[i], hy = ay[j + 1] - ay[j], ht = at[k + 1] - at[k];
        const double w = 0.5 * kappa * hx * hy * ht;
        for (int side = 0; side < 2; ++side) {
          const int di = side == 0 ? 0 : 1;
          const int ia = i + di, ja = j + di, ka = k + di;
          const int ib = i + 1 - di, jb = j + 1 - di, kb = k + 1 - di;
          const double x = ax[ia], y = ay[ja];
          const std::array<int, 4> nodes{g.full_index(ia, ja, ka), g.full_index(ib, ja, ka),
                                         g.full_index(ia, jb, ka), g.full_index(ia, ja, kb)};
          // one-sided differences share a sign that cancels in the quadratic form
          const std::array<double, 4> gx{-1.0 / hx - 2.0 * y / ht, 1.0 / hx, 0.0, 2.0 * y / ht};
          const std::array<double, 4> gy{-1.0 / hy + 2.0 * x / ht, 0.0, 1.0 / hy, -2.0 * x / ht};
          visit(nodes, gx, gy, w);
        }
      }
}

void add_local(std::vector<Eigen::Triplet<double>>& trip, const std::vector<int>& map,
               const std::array<int, 4>& nodes, const std::array<double, 4>& gx, const std::array<double, 4>& gy,
               double w, const std::array<double, 3>& c) {
  for (int a = 0; a < 4; ++a) {
    const int ra = map[nodes[a]];
    if (ra < 0) continue;
    for (int b = 0; b < 4; ++b) {
      const int cb = map[nodes[b]];
      if (cb < 0) continue;
      const double v = w * (c[0] * gx[a] * gx[b] + c[1] * gy[a] * gy[b] + c[2] * (gx[a] * gy[b] + gy[a] * gx[b]));
      if (v != 0.0) trip.emplace_back(ra, cb, v);
    }
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

GridParams GridParams::refined() const {
  GridParams r = *this;
  auto more = [](int n) {
    const int m = n + (n - 1) / 4;
    return m % 2 == 0 ? m + 1 : m;
  };
  r.n_xy = more(n_xy);
  r.n_t = more(n_t);
  r.h0_xy = h0_xy * (n_xy - 1) / (r.n_xy - 1);
  r.h0_t = h0_t * (n_t - 1) / (r.n_t - 1);
  return r;
}

void GridParams::validate() const {
  if (n_xy < 5 || n_t < 5 || n_xy % 2 == 0 || n_t % 2 == 0)
    throw ConfigError("/grid/n_xy", "node counts must be odd and at least 5");
  if (!(half_xy > 0.0) || !(half_t > 0.0)) throw ConfigError("/grid/half_xy", "half widths must be positive");
  if (!(h0_xy > 0.0) || !(h0_t > 0.0)) throw ConfigError("/grid/h0_xy", "spacings must be positive");
  if (!(kappa > 0.0)) throw ConfigError("/grid/kappa", "must be positive");
  if (solver != "cholesky" && solver != "cg") throw ConfigError("/grid/solver", "expected \"cholesky\" or \"cg\"");
  if (!(solver_tol > 0.0) || solver_max_iter < 1) throw ConfigError("/grid/solver_tol", "must be positive");
}

void to_json(nlohmann::json& j, const GridParams& g) {
  j = nlohmann::json{{"n_xy", g.n_xy},     {"n_t", g.n_t},       {"half_xy", g.half_xy},
                     {"half_t", g.half_t}, {"h0_xy", g.h0_xy},   {"h0_t", g.h0_t},
                     {"kappa", g.kappa},   {"solver", g.solver}, {"solver_tol", g.solver_tol},
                     {"solver_max_iter", g.solver_max_iter}};
}

void from_json(const nlohmann::json& j, GridParams& g) {
  if (!j.is_object()) throw ConfigError("/grid", "expected an object");
  try {
    g.n_xy = j.value("n_xy", g.n_xy);
    g.n_t = j.value("n_t", g.n_t);
    g.half_xy = j.value("half_xy", g.half_xy);
    g.half_t = j.value("half_t", g.half_t);
    g.h0_xy = j.value("h0_xy", g.h0_xy);
    g.h0_t = j.value("h0_t", g.h0_t);
    g.kappa = j.value("kappa", g.kappa);
    g.solver = j.value("solver", g.solver);
    g.solver_tol = j.value("solver_tol", g.solver_tol);
    g.solver_max_iter = j.value("solver_max_iter", g.solver_max_iter);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("/grid", e.what());
  }
  g.validate();
}

Grid::Grid(const GridParams& params) : params_(params) {
  params_.validate();
  axes_[0] = stretched_axis(params_.n_xy, params_.half_xy, params_.h0_xy);
  axes_[1] = axes_[0];
  axes_[2] = stretched_axis(params_.n_t, params_.half_t, params_.h0_t);
  full_to_interior_.assign(full_size(), -1);
  std::vector<double> w;
  for (int i = 0; i < nx(); ++i)
    for (int j = 0; j < ny(); ++j)
      for (int k = 0; k < nt(); ++k) {
        if (i == 0 || j == 0 || k == 0 || i == nx() - 1 || j == ny() - 1 || k == nt() - 1) continue;
        const int f = full_index(i, j, k);
        full_to_interior_[f] = static_cast<int>(interior_to_full_.size());
        interior_to_full_.push_back(f);
        w.push_back(params_.kappa * 0.125 * (axes_[0][i + 1] - axes_[0][i - 1]) *
                    (axes_[1][j + 1] - axes_[1][j - 1]) * (axes_[2][k + 1] - axes_[2][k - 1]));
      }
  weights_ = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

HPoint Grid::point(int full) const {
  const int k = full % nt();
  const int j = (full / nt()) % ny();
  const int i = full / (nt() * ny());
  return {axes_[0][i], axes_[1][j], axes_[2][k]};
}

GridField sample(const std::shared_ptr<const Grid>& grid, const std::function<double(const HPoint&)>& u) {
  GridField g{grid, Eigen::VectorXd(grid->interior_size())};
  for (int n = 0; n < grid->interior_size(); ++n) g.values[n] = u(grid->point(grid->full_of_interior(n)));
  return g;
}

SparseMatrix assemble_stiffness(const Grid& grid, const std::vector<std::array<double, 3>>& coeffs) {
  if (static_cast<int>(coeffs.size()) != grid.full_size()) throw DomainError("assemble_stiffness: size mismatch");
  std::vector<int> ident(grid.full_size());
  for (int i = 0; i < grid.full_size(); ++i) ident[i] = i;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(grid.full_size()) * 26);
  for_each_anchor(grid, [&](const std::array<int, 4>& nodes, const auto& gx, const auto& gy, double w) {
    add_local(trip, ident, nodes, gx, gy, w, coeffs[nodes[0]]);
  });
  SparseMatrix K(grid.full_size(), grid.full_size());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

SparseMatrix assemble_stiffness_delta(const Grid& grid, const std::vector<std::array<double, 3>>& coeffs,
                                      const std::vector<char>& active) {
  std::vector<int> map(grid.full_size());
  for (int i = 0; i < grid.full_size(); ++i) map[i] = grid.interior_index(i);
  std::vector<Eigen::Triplet<double>> trip;
  for_each_anchor(grid, [&](const std::array<int, 4>& nodes, const auto& gx, const auto& gy, double w) {
    if (!active[nodes[0]]) return;
    const auto& c = coeffs[nodes[0]];
    add_local(trip, map, nodes, gx, gy, w, {c[0] - kFlat[0], c[1] - kFlat[1], c[2] - kFlat[2]});
  });
  SparseMatrix K(grid.interior_size(), grid.interior_size());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

struct PoissonOperator::Factor {
  Eigen::SimplicialLLT<SparseMatrix> llt;
  Eigen::IncompleteCholesky<double> ic;
  bool cholesky = true;
};

PoissonOperator::PoissonOperator(std::shared_ptr<const Grid> grid) : grid_(std::move(grid)) {
  const Grid& g = *grid_;
  std::vector<int> bmap(g.full_size(), -1);
  for (int f = 0; f < g.full_size(); ++f)
    if (g.on_boundary(f)) {
      bmap[f] = static_cast<int>(boundary_nodes_.size());
      boundary_nodes_.push_back(f);
    }
  std::vector<Eigen::Triplet<double>> tii, tib;
  tii.reserve(static_cast<std::size_t>(g.interior_size()) * 26);
  for_each_anchor(g, [&](const std::array<int, 4>& nodes, const auto& gx, const auto& gy, double w) {
    for (int a = 0; a < 4; ++a) {
      const int ra = g.interior_index(nodes[a]);
      if (ra < 0) continue;
      for (int b = 0; b < 4; ++b) {
        const double v = w * (kFlat[0] * gx[a] * gx[b] + kFlat[1] * gy[a] * gy[b]);
        if (v == 0.0) continue;
        const int cb = g.interior_index(nodes[b]);
        if (cb >= 0)
          tii.emplace_back(ra, cb, v);
        else
          tib.emplace_back(ra, bmap[nodes[b]], v);
      }
    }
  });
  K_ii_.resize(g.interior_size(), g.interior_size());
  K_ii_.setFromTriplets(tii.begin(), tii.end());
  K_ib_.resize(g.interior_size(), static_cast<Eigen::Index>(boundary_nodes_.size()));
  K_ib_.setFromTriplets(tib.begin(), tib.end());
  auto f = std::make_shared<Factor>();
  f->cholesky = g.params().solver == "cholesky";
  if (f->cholesky) {
    f->llt.compute(K_ii_);
    if (f->llt.info() != Eigen::Success) throw SolverError("Poisson operator: Cholesky factorization failed");
  } else {
    f->ic.compute(K_ii_);
    if (f->ic.info() != Eigen::Success) throw SolverError("Poisson operator: incomplete Cholesky failed");
  }
  factor_ = std::move(f);
}

Eigen::VectorXd PoissonOperator::apply(const Eigen::VectorXd& u, const Eigen::VectorXd& bc) const {
  Eigen::VectorXd Ku = K_ii_ * u + K_ib_ * bc;
  return -(Ku.array() / grid_->weights().array()).matrix();
}

Eigen::VectorXd PoissonOperator::apply(const Eigen::VectorXd& u) const {
  return apply(u, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(boundary_nodes_.size())));
}

Eigen::VectorXd PoissonOperator::solve_stiffness(const Eigen::VectorXd& b, SolveReport* report) const {
  const GridParams& gp = grid_->params();
  SolveReport rep;
  const double bnorm = b.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  if (bnorm == 0.0) {
    if (report) *report = rep;
    return x;
  }
  if (factor_->cholesky) {
    x = factor_->llt.solve(b);
    Eigen::VectorXd r = b - K_ii_ * x;
    rep.history.push_back(r.norm() / bnorm);
    x += factor_->llt.solve(r);
    r = b - K_ii_ * x;
    rep.iterations = 2;
    rep.relative_residual = r.norm() / bnorm;
    rep.history.push_back(rep.relative_residual);
  } else {
    // preconditioned conjugate gradients
    Eigen::VectorXd r = b;
    Eigen::VectorXd z = factor_->ic.solve(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    rep.history.push_back(1.0);
    for (int it = 1; it <= gp.solver_max_iter; ++it) {
      const Eigen::VectorXd Ap = K_ii_ * p;
      const double alpha = rz / p.dot(Ap);
      x += alpha * p;
      r -= alpha * Ap;
      rep.iterations = it;
      rep.relative_residual = r.norm() / bnorm;
      rep.history.push_back(rep.relative_residual);
      if (rep.relative_residual < gp.solver_tol) break;
      z = factor_->ic.solve(r);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
  }
  if (report) *report = rep;
  if (!(rep.relative_residual < gp.solver_tol)) {
    std::ostringstream os;
    os << "Poisson solve did not reach relative residual " << gp.solver_tol << " in " << rep.iterations
       << " iterations; history:";
    for (double h : rep.history) os << ' ' << h;
    throw SolverError(os.str());
  }
  return x;
}

double PoissonOperator::x_inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
  return u.dot(K_ii_ * v);
}

Eigen::VectorXd PoissonOperator::boundary_values(const std::function<double(const HPoint&)>& g) const {
  Eigen::VectorXd b(static_cast<Eigen::Index>(boundary_nodes_.size()));
  for (std::size_t n = 0; n < boundary_nodes_.size(); ++n) b[static_cast<Eigen::Index>(n)] = g(grid_->point(boundary_nodes_[n]));
  return b;
}

GridField solve_poisson(const PoissonOperator& op, const GridField& rhs,
                        const std::function<double(const HPoint&)>& bc, SolveReport* report) {
  if (rhs.values.size() != op.grid().interior_size()) throw DomainError("solve_poisson: field size mismatch");
  const Eigen::VectorXd b = op.boundary_values(bc);
  const Eigen::VectorXd load =
      -(op.grid().weights().array() * rhs.values.array()).matrix() - op.boundary_coupling() * b;
  return {op.grid_ptr(), op.solve_stiffness(load, report)};
}

double functional_value(const Deformation& d, const ScalarField& u, const QuadratureRule& rule) {
  if (!u.is_real_valued()) throw DomainError("functional_value: u must be real-valued");
  return integrate(
      [&](const HPoint& p) {
        const Jet2 uj = frame_jet(u, p);
        const double uv = uj.value.real();
        const Jet2 fj = d.is_zero() ? Jet2{} : frame_jet(d.f, p);
        return uv * conformal_sublaplacian(fj, uj) - uv * uv * uv * uv;
      },
      rule);
}

MinresResult minres(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& A,
                    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& precond,
                    const Eigen::VectorXd& b, double tol, int max_iter) {
  MinresResult res;
  const Eigen::Index n = b.size();
  res.x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r1 = b, r2 = b;
  Eigen::VectorXd y = precond(r1);
  const double ry = r1.dot(y);
  if (ry < 0.0) throw SolverError("minres: preconditioner is not positive semidefinite");
  const double beta1 = std::sqrt(ry);
  if (beta1 == 0.0) {
    res.converged = true;
    return res;
  }
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n), w1(n), w2 = Eigen::VectorXd::Zero(n);
  for (int itn = 1; itn <= max_iter; ++itn) {
    const Eigen::VectorXd v = y / beta;
    y = A(v);
    if (itn >= 2) y -= (beta / oldb) * r1;
    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    y = precond(r2);
    oldb = beta;
    const double yy = r2.dot(y);
    if (yy < 0.0) throw SolverError("minres: preconditioner is not positive semidefinite");
    beta = std::sqrt(yy);
    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    const double gamma = std::max(std::hypot(gbar, beta), std::numeric_limits<double>::min());
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;
    w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gamma;
    res.x += phi * w;
    res.iterations = itn;
    res.relative_residual = phibar / beta1;
    if (res.relative_residual < tol || beta == 0.0) {
      res.converged = true;
      break;
    }
  }
  return res;
}

ReduceOptions ReduceOptions::with_frame_for(const Deformation& d) const {
  ReduceOptions r = *this;
  if (!d.support_balls.empty()) {
    r.frame_center = d.support_balls.front().center();
    r.frame_scale = 1.0 / d.support_balls.front().radius();
  } else {
    r.frame_center = HPoint{};
    r.frame_scale = 1.0;
  }
  return r;
}

void to_json(nlohmann::json& j, const ReduceOptions& o) {
  j = nlohmann::json{{"grid", o.grid},
                     {"quadrature", o.quad},
                     {"frame_center", o.frame_center},
                     {"frame_scale", o.frame_scale},
                     {"support_order", o.support_order},
                     {"support_panels", o.support_panels},
                     {"tol", o.tol},
                     {"max_outer", o.max_outer},
                     {"minres_tol", o.minres_tol},
                     {"minres_max_iter", o.minres_max_iter},
                     {"gram_condition_max", o.gram_condition_max}};
}

void from_json(const nlohmann::json& j, ReduceOptions& o) {
  if (!j.is_object()) throw ConfigError("/reduce", "expected an object");
  if (j.contains("grid")) o.grid = j.at("grid").get<GridParams>();
  if (j.contains("quadrature")) o.quad = j.at("quadrature").get<QuadratureParams>();
  try {
    if (j.contains("frame_center")) o.frame_center = j.at("frame_center").get<HPoint>();
    o.frame_scale = j.value("frame_scale", o.frame_scale);
    o.support_order = j.value("support_order", o.support_order);
    o.support_panels = j.value("support_panels", o.support_panels);
    o.tol = j.value("tol", o.tol);
    o.max_outer = j.value("max_outer", o.max_outer);
    o.minres_tol = j.value("minres_tol", o.minres_tol);
    o.minres_max_iter = j.value("minres_max_iter", o.minres_max_iter);
    o.gram_condition_max = j.value("gram_condition_max", o.gram_condition_max);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("/reduce", e.what());
  }
  if (!(o.frame_scale > 0.0)) throw ConfigError("/reduce/frame_scale", "must be positive");
  if (o.support_order < 1 || o.support_panels < 1) throw ConfigError("/reduce/support_order", "must be positive");
  if (!(o.tol > 0.0)) throw ConfigError("/reduce/tol", "must be positive");
  if (o.max_outer < 1) throw ConfigError("/reduce/max_outer", "must be positive");
  if (!(o.minres_tol > 0.0) || o.minres_max_iter < 1) throw ConfigError("/reduce/minres_tol", "must be positive");
}

void to_json(nlohmann::json& j, const ReducedState& s) {
  nlohmann::json gram = nlohmann::json::array();
  for (int a = 0; a < 4; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int b = 0; b < 4; ++b) row.push_back(s.gram(a, b));
    gram.push_back(row);
  }
  j = nlohmann::json{{"center", s.params.center},
                     {"lambda", s.params.lambda},
                     {"value", s.value},
                     {"bubble_value", s.bubble_value},
                     {"residual_norm", s.residual_norm},
                     {"iterations", s.iterations},
                     {"linear_iterations", s.linear_iterations},
                     {"residual_history", s.residual_history},
                     {"v_norm_x", s.v_norm_x},
                     {"max_u", s.max_u},
                     {"orthogonality", s.orthogonality},
                     {"gradient_norm", s.gradient_norm},
                     {"tangent_gradient_norm", s.tangent_gradient_norm},
                     {"gram", gram}};
}

Eigen::VectorXd TangentData::project(const Eigen::VectorXd& u) const {
  const Eigen::Vector4d c = G_inv * (M.transpose() * u);
  return u - Q * c;
}

Reducer::Reducer(const BubbleFamily& family, const ReduceOptions& options) : family_(family), options_(options) {
  if (!(options_.frame_scale > 0.0)) throw DomainError("Reducer: frame scale must be positive");
  grid_ = std::make_shared<const Grid>(options_.grid);
  poisson_ = std::make_shared<const PoissonOperator>(grid_);
  auto l4 = [&](const QuadratureRule& rule) {
    std::vector<double> u4(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i) u4[i] = std::pow(family_.standard(rule.nodes()[i]), 4);
    return integrate_values(u4, rule);
  };
  bubble_l4_ = l4(QuadratureRule(options_.quad));
  bubble_l4_refined_ = l4(QuadratureRule(options_.quad.refined()));
  gram_unit_ = gram_matrix(BubbleParams{});
}

BubbleParams Reducer::to_frame(const BubbleParams& params) const {
  return {dilate(options_.frame_scale, left_translate(options_.frame_center, params.center)),
          params.lambda / options_.frame_scale};
}

HPoint Reducer::from_frame(const HPoint& q) const {
  return group_mul(options_.frame_center, dilate(1.0 / options_.frame_scale, q));
}

Eigen::Matrix4d Reducer::gram_matrix(const BubbleParams& params) const {
  params.validate();
  const auto basis = family_.tangent_basis(params);
  const QuadratureRule rule = QuadratureRule(options_.quad).mapped(params.center, params.lambda);
  std::array<std::array<std::vector<double>, 4>, 4> terms;
  for (auto& row : terms)
    for (auto& t : row) t.resize(rule.size());
  for (std::size_t n = 0; n < rule.size(); ++n) {
    const HPoint& p = rule.nodes()[n];
    std::array<cplx, 4> xs, ys;
    for (int j = 0; j < 4; ++j) {
      const Dual2 d = basis[j].dual(p);
      xs[j] = d.g[0] + 2.0 * p.y * d.g[2];
      ys[j] = d.g[1] - 2.0 * p.x * d.g[2];
    }
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b)
        terms[a][b][n] = 0.25 * (xs[a] * std::conj(xs[b]) + ys[a] * std::conj(ys[b])).real() * rule.weights()[n];
  }
  Eigen::Matrix4d G;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) G(a, b) = G(b, a) = pairwise_sum(terms[a][b]);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(G);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(3);
  if (!(lo > 0.0) || hi / lo > options_.gram_condition_max)
    throw DomainError("singular tangent Gram matrix (condition " + std::to_string(hi / lo) + ")");
  return G;
}

TangentData Reducer::tangent_data(const BubbleParams& params) const {
  params.validate();
  const Grid& g = *grid_;
  const int n = g.interior_size();
  const auto basis = family_.tangent_basis(to_frame(params));
  TangentData td;
  td.M.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    const HPoint q = g.point(g.full_of_interior(i));
    for (int j = 0; j < 4; ++j) td.M(i, j) = -g.weights()[i] * sublaplacian_flat(frame_jet(basis[j], q)).real();
  }
  td.Q.resize(n, 4);
  for (int j = 0; j < 4; ++j) td.Q.col(j) = poisson_->solve_stiffness(td.M.col(j));
  td.G = td.M.transpose() * td.Q;
  td.G = 0.5 * (td.G + td.G.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(td.G);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(3);
  if (!(lo > 0.0) || hi / lo > options_.gram_condition_max)
    throw DomainError("singular discrete tangent Gram matrix (condition " + std::to_string(hi / lo) + ")");
  td.G_inv = td.G.inverse();
  return td;
}

GridField Reducer::project_E(const GridField& u, const BubbleParams& params) const {
  if (u.values.size() != grid_->interior_size()) throw DomainError("project_E: field size mismatch");
  return {grid_, tangent_data(params).project(u.values)};
}

double Reducer::bubble_functional(const BubbleParams& params, const Deformation& d, bool refined) const {
  params.validate();
  const double l4 = refined ? bubble_l4_refined_ : bubble_l4_;
  if (d.is_zero()) return l4;
  const QuadratureParams qp = refined ? options_.quad.refined() : options_.quad;
  QuadratureRule rule = QuadratureRule(qp).mapped(params.center, params.lambda);
  if (!d.support_balls.empty()) {
    const int panels = refined ? 2 * options_.support_panels : options_.support_panels;
    for (std::size_t k = 0; k < d.support_balls.size(); ++k) {
      const auto& ball = d.support_balls[k];
      QuadratureRule box = QuadratureRule::koranyi_box(ball.center(), ball.radius(), options_.support_order, panels,
                                                       options_.quad.kappa);
      if (k == 0)
        rule = std::move(box);
      else
        rule.append(box);
    }
  }
  std::vector<double> vals(rule.size(), 0.0);
  for (std::size_t n = 0; n < rule.size(); ++n) {
    const HPoint& p = rule.nodes()[n];
    if (outside_support(d, p)) continue;
    const Jet2 uj = family_.jet(params, p);
    const double u = uj.value.real();
    vals[n] = u * (conformal_sublaplacian(frame_jet(d.f, p), uj) - 2.0 * u * u * u);
  }
  return l4 + integrate_values(vals, rule);
}

CellProblem Reducer::prepare(const BubbleParams& params, const Deformation& d) const {
  params.validate();
  const Grid& g = *grid_;
  const int n = g.interior_size();
  const double mu = options_.frame_scale;
  CellProblem cell;
  cell.params = params;
  cell.frame_params = to_frame(params);
  cell.U.resize(n);
  cell.rho0.resize(n);
  cell.curvature = Eigen::VectorXd::Zero(n);
  cell.in_support.assign(n, 0);
  std::vector<std::array<double, 3>> coeffs(g.full_size(), kFlat);
  std::vector<char> active(g.full_size(), 0);
  for (int f = 0; f < g.full_size(); ++f) {
    const HPoint q = g.point(f);
    const HPoint p = from_frame(q);
    const int i = g.interior_index(f);
    const bool outside = outside_support(d, p);
    if (i < 0) {
      if (outside) continue;
      const cplx fv = d.f.value(p);
      if (fv == cplx(0.0)) continue;
      coeffs[f] = metric_coefficients(fv);
      active[f] = 1;
      continue;
    }
    const Jet2 uj = family_.jet(cell.frame_params, q);
    const double u = uj.value.real();
    cell.U[i] = u;
    Jet2 fj{};
    if (!outside) {
      cell.in_support[i] = 1;
      fj = normalized_jet(frame_jet(d.f, p), mu);
    }
    const bool zero = fj.value == cplx(0.0) && fj.Z == cplx(0.0) && fj.Zb == cplx(0.0) && fj.T == cplx(0.0) &&
                      fj.ZZ == cplx(0.0) && fj.ZbZb == cplx(0.0) && fj.ZZb == cplx(0.0) && fj.ZbZ == cplx(0.0);
    if (zero) {
      cell.rho0[i] = -4.0 * sublaplacian_flat(uj).real() - 2.0 * u * u * u;
      continue;
    }
    coeffs[f] = metric_coefficients(fj.value);
    active[f] = 1;
    const double R = webster_curvature(fj).R_exact;
    cell.curvature[i] = R;
    cell.rho0[i] = -4.0 * sublaplacian(fj, uj).real() + R * u - 2.0 * u * u * u;
  }
  cell.flat = std::none_of(active.begin(), active.end(), [](char c) { return c != 0; });
  if (!cell.flat) cell.delta_stiffness = assemble_stiffness_delta(g, coeffs, active);
  cell.tangent = tangent_data(params);
  cell.bubble_value = bubble_functional(params, d);
  return cell;
}

namespace {

Eigen::VectorXd apply_KL(const PoissonOperator& op, const CellProblem& cell, const Eigen::VectorXd& v,
                         const Eigen::VectorXd& W) {
  Eigen::VectorXd k = op.stiffness() * v;
  if (!cell.flat) k += cell.delta_stiffness * v;
  return 4.0 * k + W.cwiseProduct(cell.curvature).cwiseProduct(v);
}

}  // namespace

double Reducer::discrete_functional(const CellProblem& cell, const Eigen::VectorXd& v) const {
  const Eigen::VectorXd& W = grid_->weights();
  const Eigen::VectorXd KLv = apply_KL(*poisson_, cell, v, W);
  std::vector<double> terms(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double u = cell.U[i], x = v[i];
    terms[i] = 2.0 * W[i] * cell.rho0[i] * x + x * KLv[i] -
               W[i] * (6.0 * u * u * x * x + 4.0 * u * x * x * x + x * x * x * x);
  }
  return cell.bubble_value + pairwise_sum(terms);
}

Eigen::VectorXd Reducer::residual(const CellProblem& cell, const Eigen::VectorXd& v) const {
  const Eigen::VectorXd& W = grid_->weights();
  const Eigen::VectorXd KLv = apply_KL(*poisson_, cell, v, W);
  Eigen::VectorXd r(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double u = cell.U[i], x = v[i];
    r[i] = cell.rho0[i] + KLv[i] / W[i] - 6.0 * u * u * x - 6.0 * u * x * x - 2.0 * x * x * x;
  }
  return r;
}

GridField Reducer::functional_gradient(const CellProblem& cell, const Eigen::VectorXd& v) const {
  const Eigen::VectorXd r = residual(cell, v);
  return {grid_, 2.0 * poisson_->solve_stiffness(grid_->weights().cwiseProduct(r))};
}

ReducedState Reducer::ls_solve(const BubbleParams& params, const Deformation& d) const {
  return ls_solve(prepare(params, d));
}

ReducedState Reducer::ls_solve(const CellProblem& cell) const {
  const Grid& g = *grid_;
  const Eigen::VectorXd& W = g.weights();
  const TangentData& td = cell.tangent;
  ReducedState s;
  s.params = cell.params;
  const auto D = BubbleFamily::tangent_scaling(cell.params.lambda);
  const Eigen::Vector4d dv(D[0], D[1], D[2], D[3]);
  s.gram = dv.asDiagonal() * gram_unit_ * dv.asDiagonal();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(g.interior_size());
  int bad = 0;
  Eigen::VectorXd grad;
  for (int it = 0;; ++it) {
    const Eigen::VectorXd r = residual(cell, v);
    const Eigen::VectorXd b = W.cwiseProduct(r);
    grad = 2.0 * poisson_->solve_stiffness(b);
    const Eigen::VectorXd gp = td.project(grad);
    const double norm = std::sqrt(std::max(0.0, poisson_->x_inner(gp, gp)));
    if (!s.residual_history.empty()) {
      bad = norm >= s.residual_history.back() ? bad + 1 : 0;
      if (bad >= 3)
        throw SolverError("ls_solve: contraction factor >= 1 over 3 consecutive steps (residual " +
                          std::to_string(norm) + ")");
    }
    s.residual_history.push_back(norm);
    s.residual_norm = norm;
    s.iterations = it;
    if (norm < options_.tol) break;
    if (it >= options_.max_outer)
      throw SolverError("ls_solve: no convergence in " + std::to_string(options_.max_outer) +
                        " outer steps (residual " + std::to_string(norm) + ")");
    const Eigen::VectorXd w2 = 6.0 * W.cwiseProduct((cell.U + v).cwiseAbs2());
    auto piT = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
      return y - td.M * (td.G_inv * (td.Q.transpose() * y));
    };
    auto op = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      const Eigen::VectorXd px = td.project(x);
      return piT(apply_KL(*poisson_, cell, px, W) - w2.cwiseProduct(px));
    };
    auto pre = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
      return poisson_->solve_stiffness(y) - td.Q * (td.G_inv * (td.Q.transpose() * y));
    };
    const double eta = std::clamp(0.5 * options_.tol / norm, options_.minres_tol, 1e-2);
    const MinresResult mr = minres(op, pre, -piT(b), eta, options_.minres_max_iter);
    s.linear_iterations += mr.iterations;
    if (!mr.converged && mr.relative_residual > 0.5)
      throw SolverError("ls_solve: linearized solve stalled at relative residual " +
                        std::to_string(mr.relative_residual));
    v += td.project(mr.x);
  }
  s.v = {grid_, v};
  s.v_norm_x = std::sqrt(std::max(0.0, poisson_->x_inner(v, v)));
  const Eigen::VectorXd tang = grad - td.project(grad);
  s.gradient_norm = std::sqrt(std::max(0.0, poisson_->x_inner(grad, grad)));
  s.tangent_gradient_norm = std::sqrt(std::max(0.0, poisson_->x_inner(tang, tang)));
  if (s.v_norm_x > 0.0) {
    for (int j = 0; j < 4; ++j) {
      const double qn = std::sqrt(poisson_->x_inner(td.Q.col(j), td.Q.col(j)));
      s.orthogonality = std::max(s.orthogonality, std::abs(v.dot(td.M.col(j))) / (s.v_norm_x * qn));
    }
  }
  const bool bounded = std::any_of(cell.in_support.begin(), cell.in_support.end(), [](char c) { return c != 0; });
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!bounded || cell.in_support[i]) m = std::max(m, cell.U[i] + v[i]);
  s.max_u = options_.frame_scale * m;
  s.bubble_value = cell.bubble_value;
  s.value = discrete_functional(cell, v);
  return s;
}

double Reducer::reduced_functional(const BubbleParams& params, const Deformation& d) const {
  return ls_solve(params, d).value;
}

double Reducer::gradient_floor(const BubbleParams& params) const {
  const BubbleParams b = to_frame(params);
  const Grid& g = *grid_;
  const Eigen::VectorXd U = sample(grid_, [&](const HPoint& q) { return family_.value(b, q); }).values;
  const Eigen::VectorXd bc = poisson_->boundary_values([&](const HPoint& q) { return family_.value(b, q); });
  const Eigen::VectorXd r = -4.0 * poisson_->apply(U, bc) - 2.0 * U.cwiseProduct(U).cwiseProduct(U);
  const Eigen::VectorXd gfl = 2.0 * poisson_->solve_stiffness(g.weights().cwiseProduct(r));
  const Eigen::VectorXd tang = gfl - tangent_data(params).project(gfl);
  return std::sqrt(std::max(0.0, poisson_->x_inner(tang, tang)));
}

void ScanWindow::validate() const {
  if (!(R > 0.0)) throw ConfigError("/window/R", "must be positive");
  if (!(r > 0.0)) throw ConfigError("/window/r", "must be positive");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("/window/alpha", "alpha and beta must be positive");
  if (!(lambda_min() < lambda_max())) throw ConfigError("/window", "alpha/R must be below beta/r");
  if (n_x < 3 || n_y < 3 || n_t < 3 || n_lambda < 3)
    throw ConfigError("/window/n_x", "at least 3 points per axis");
}

void to_json(nlohmann::json& j, const ScanWindow& w) {
  j = nlohmann::json{{"center", w.center}, {"R", w.R},     {"r", w.r},     {"alpha", w.alpha},
                     {"beta", w.beta},     {"n_x", w.n_x}, {"n_y", w.n_y}, {"n_t", w.n_t},
                     {"n_lambda", w.n_lambda}};
}

void from_json(const nlohmann::json& j, ScanWindow& w) {
  if (!j.is_object()) throw ConfigError("/window", "expected an object");
  try {
    if (j.contains("center")) w.center = j.at("center").get<HPoint>();
    w.R = j.value("R", w.R);
    w.r = j.value("r", w.r);
    w.alpha = j.value("alpha", w.alpha);
    w.beta = j.value("beta", w.beta);
    w.n_x = j.value("n_x", w.n_x);
    w.n_y = j.value("n_y", w.n_y);
    w.n_t = j.value("n_t", w.n_t);
    w.n_lambda = j.value("n_lambda", w.n_lambda);
  } catch (const ConfigError& e) {
    throw ConfigError("/window/center", e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("/window", e.what());
  }
  w.validate();
}

void to_json(nlohmann::json& j, const ScanVerdict& v) {
  j = nlohmann::json{{"verdict", v.verdict},
                     {"interior_max", v.interior_max},
                     {"boundary_max", v.boundary_max},
                     {"margin", v.margin},
                     {"quadrature_noise", v.quadrature_noise},
                     {"grid_noise", v.grid_noise},
                     {"valid_fraction", v.valid_fraction},
                     {"interior_argmax", v.interior_argmax},
                     {"boundary_argmax", v.boundary_argmax},
                     {"gradient_norm", v.gradient_norm},
                     {"tangent_gradient_noise", v.tangent_gradient_noise},
                     {"gradient_ok", v.gradient_ok},
                     {"blowup_proxy", v.blowup_proxy},
                     {"exit_code", v.exit_code}};
}

namespace {

HPoint window_offset(const ScanWindow& w, int i, int j, int k) {
  return {-w.R + 2.0 * w.R * i / (w.n_x - 1), -w.R + 2.0 * w.R * j / (w.n_y - 1),
          -w.R * w.R + 2.0 * w.R * w.R * k / (w.n_t - 1)};
}

bool in_window(const ScanWindow& w, int i, int j, int k) {
  if (i < 0 || j < 0 || k < 0 || i >= w.n_x || j >= w.n_y || k >= w.n_t) return false;
  return koranyi_norm(window_offset(w, i, j, k)) <= w.R * (1.0 + 1e-12);
}

double window_lambda(const ScanWindow& w, double l) {
  return w.lambda_min() * std::pow(w.lambda_max() / w.lambda_min(), l / (w.n_lambda - 1));
}

/// Vertex of the parabola through (-1, a), (0, b), (1, c), clamped to [-1, 1].
double parabola_vertex(double a, double b, double c) {
  const double den = a - 2.0 * b + c;
  if (!(den < 0.0)) return 0.0;
  return std::clamp(0.5 * (a - c) / den, -1.0, 1.0);
}

}  // namespace

ScanResult scan_window(const Reducer& red, const ScanWindow& w, const Deformation& d, int threads) {
  w.validate();
  ScanResult res;
  res.window = w;
  std::vector<int> lookup(static_cast<std::size_t>(w.n_x * w.n_y * w.n_t * w.n_lambda), -1);
  auto key = [&](int i, int j, int k, int l) { return ((i * w.n_y + j) * w.n_t + k) * w.n_lambda + l; };
  for (int i = 0; i < w.n_x; ++i)
    for (int j = 0; j < w.n_y; ++j)
      for (int k = 0; k < w.n_t; ++k) {
        if (!in_window(w, i, j, k)) continue;
        const bool side = !in_window(w, i - 1, j, k) || !in_window(w, i + 1, j, k) || !in_window(w, i, j - 1, k) ||
                          !in_window(w, i, j + 1, k) || !in_window(w, i, j, k - 1) || !in_window(w, i, j, k + 1);
        for (int l = 0; l < w.n_lambda; ++l) {
          ScanCell c;
          c.index = {i, j, k, l};
          c.params.center = group_mul(w.center, window_offset(w, i, j, k));
          c.params.lambda = window_lambda(w, l);
          c.boundary = side || l == 0 || l == w.n_lambda - 1;
          lookup[key(i, j, k, l)] = static_cast<int>(res.cells.size());
          res.cells.push_back(c);
        }
      }

  auto run = [&](ScanCell& c) {
    try {
      const ReducedState s = red.ls_solve(c.params, d);
      c.value = s.value;
      c.residual = s.residual_norm;
      c.iterations = s.iterations;
      c.bubble_value = s.bubble_value;
      c.v_norm = s.v_norm_x;
      c.max_u = s.max_u;
      c.gradient_norm = s.gradient_norm;
      c.tangent_gradient_norm = s.tangent_gradient_norm;
      c.status = "ok";
    } catch (const SolverError&) {
      c.status = "solver_error";
    } catch (const DomainError&) {
      c.status = "domain_error";
    }
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t n = next++; n < res.cells.size(); n = next++) run(res.cells[n]);
  };
  const int nt = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ScanVerdict& v = res.verdict;
  int ok = 0;
  for (std::size_t n = 0; n < res.cells.size(); ++n) {
    const ScanCell& c = res.cells[n];
    if (c.status != "ok") continue;
    ++ok;
    if (c.boundary) {
      if (v.boundary_argmax < 0 || c.value > v.boundary_max) {
        v.boundary_max = c.value;
        v.boundary_argmax = static_cast<int>(n);
      }
    } else if (v.interior_argmax < 0 || c.value > v.interior_max) {
      v.interior_max = c.value;
      v.interior_argmax = static_cast<int>(n);
    }
  }
  v.valid_fraction = res.cells.empty() ? 0.0 : static_cast<double>(ok) / res.cells.size();
  if (d.is_zero()) {
    v.verdict = "vacuous/flat";
    v.exit_code = 2;
    v.margin = v.interior_max - v.boundary_max;
    return res;
  }
  if (v.valid_fraction < 0.95 || v.interior_argmax < 0 || v.boundary_argmax < 0) {
    v.verdict = "insufficient valid cells";
    v.exit_code = 1;
    return res;
  }
  v.margin = v.interior_max - v.boundary_max;
  for (int idx : {v.interior_argmax, v.boundary_argmax}) {
    const ScanCell& c = res.cells[idx];
    v.quadrature_noise = std::max(v.quadrature_noise, std::abs(red.bubble_functional(c.params, d, true) - c.bubble_value));
  }
  {
    ReduceOptions fine_opts = red.options();
    fine_opts.grid = fine_opts.grid.refined();
    const Reducer fine(red.family(), fine_opts);
    for (int idx : {v.interior_argmax, v.boundary_argmax}) {
      const ScanCell& c = res.cells[idx];
      try {
        v.grid_noise = std::max(v.grid_noise, std::abs(fine.ls_solve(c.params, d).value - c.value));
      } catch (const Error&) {
        v.grid_noise = std::numeric_limits<double>::infinity();
      }
    }
  }
  const double noise = std::max(v.quadrature_noise, v.grid_noise);
  const ScanCell& best = res.cells[v.interior_argmax];
  v.blowup_proxy = best.max_u;

  // refine the interior maximizer axis by axis and evaluate the gradient there
  double offset[4] = {0, 0, 0, 0};
  for (int a = 0; a < 4; ++a) {
    auto idx = best.index;
    auto at = [&](int delta) -> const ScanCell* {
      auto k = idx;
      k[a] += delta;
      if (k[0] < 0 || k[1] < 0 || k[2] < 0 || k[3] < 0 || k[0] >= w.n_x || k[1] >= w.n_y || k[2] >= w.n_t ||
          k[3] >= w.n_lambda)
        return nullptr;
      const int n = lookup[key(k[0], k[1], k[2], k[3])];
      if (n < 0 || res.cells[n].status != "ok") return nullptr;
      return &res.cells[n];
    };
    const ScanCell* lo = at(-1);
    const ScanCell* hi = at(1);
    if (lo && hi) offset[a] = parabola_vertex(lo->value, best.value, hi->value);
  }
  const HPoint off = window_offset(w, 0, 0, 0);
  const HPoint q{off.x + 2.0 * w.R * (best.index[0] + offset[0]) / (w.n_x - 1),
                 off.y + 2.0 * w.R * (best.index[1] + offset[1]) / (w.n_y - 1),
                 off.t + 2.0 * w.R * w.R * (best.index[2] + offset[2]) / (w.n_t - 1)};
  BubbleParams star{group_mul(w.center, q), window_lambda(w, best.index[3] + offset[3])};
  try {
    v.gradient_norm = red.ls_solve(star, d).gradient_norm;
  } catch (const Error&) {
    star = best.params;
    v.gradient_norm = best.gradient_norm;
  }
  v.tangent_gradient_noise = red.gradient_floor(star);
  v.gradient_ok = v.gradient_norm < 3.0 * v.tangent_gradient_noise;
  if (v.margin > 3.0 * noise) {
    v.verdict = "interior max exceeds boundary";
    v.exit_code = v.gradient_ok ? 0 : 1;
  } else if (v.margin < -3.0 * noise) {
    v.verdict = "boundary max dominates";
    v.exit_code = 1;
  } else {
    v.verdict = "inconclusive";
    v.exit_code = 2;
  }
  return res;
}

std::string scan_csv(const ScanResult& s) {
  std::string out = "x,y,t,lambda,value,residual,iterations,cell_status,boundary,bubble_value,v_norm,max_u\n";
  for (const ScanCell& c : s.cells) {
    out += fmt(c.params.center.x) + ',' + fmt(c.params.center.y) + ',' + fmt(c.params.center.t) + ',' +
           fmt(c.params.lambda) + ',' + fmt(c.value) + ',' + fmt(c.residual) + ',' + std::to_string(c.iterations) +
           ',' + c.status + ',' + (c.boundary ? "1" : "0") + ',' + fmt(c.bubble_value) + ',' + fmt(c.v_norm) + ',' +
           fmt(c.max_u) + '\n';
  }
  return out;
}

}  // namespace crlab
