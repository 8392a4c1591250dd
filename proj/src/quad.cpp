#include "crlab/quad.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

namespace crlab {

namespace {

struct Rule1D {
  std::vector<double> x, w;
};

Rule1D gauss_legendre(int n) {
  // Golub-Welsch
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule1D r;
  for (int k = 0; k < n; ++k) {
    r.x.push_back(es.eigenvalues()(k));
    const double v = es.eigenvectors()(0, k);
    r.w.push_back(2.0 * v * v);
  }
  return r;
}

// Panels on (-1, 1) mapped by xi -> L xi / (1 - xi^2).
Rule1D stretched(int order, int panels, double L) {
  const Rule1D g = gauss_legendre(order);
  Rule1D r;
  const double h = 2.0 / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = -1.0 + p * h;
    for (int k = 0; k < order; ++k) {
      const double xi = a + 0.5 * h * (g.x[k] + 1.0);
      const double wx = 0.5 * h * g.w[k];
      const double d = 1.0 - xi * xi;
      r.x.push_back(L * xi / d);
      r.w.push_back(wx * L * (1.0 + xi * xi) / (d * d));
    }
  }
  return r;
}

}  // namespace

QuadratureParams QuadratureParams::refined() const {
  QuadratureParams q = *this;
  q.panels_xy *= 2;
  q.panels_t *= 2;
  return q;
}

void to_json(nlohmann::json& j, const QuadratureParams& q) {
  j = nlohmann::json{{"order", q.order},       {"panels_xy", q.panels_xy}, {"panels_t", q.panels_t},
                     {"scale_xy", q.scale_xy}, {"scale_t", q.scale_t},     {"kappa", q.kappa}};
}

void from_json(const nlohmann::json& j, QuadratureParams& q) {
  const QuadratureParams d;
  q.order = j.value("order", d.order);
  q.panels_xy = j.value("panels_xy", d.panels_xy);
  q.panels_t = j.value("panels_t", d.panels_t);
  q.scale_xy = j.value("scale_xy", d.scale_xy);
  q.scale_t = j.value("scale_t", d.scale_t);
  q.kappa = j.value("kappa", d.kappa);
  if (q.order < 1) throw ConfigError("/quadrature/order", "must be positive");
  if (q.panels_xy < 1 || q.panels_t < 1) throw ConfigError("/quadrature/panels", "must be positive");
  if (!(q.scale_xy > 0.0) || !(q.scale_t > 0.0)) throw ConfigError("/quadrature/scale", "must be positive");
  if (!(q.kappa > 0.0)) throw ConfigError("/quadrature/kappa", "must be positive");
}

QuadratureRule::QuadratureRule(const QuadratureParams& params) : params_(params) {
  if (params.order < 1 || params.panels_xy < 1 || params.panels_t < 1)
    throw DomainError("quadrature rule needs positive order and panel counts");
  const Rule1D rx = stretched(params.order, params.panels_xy, params.scale_xy);
  const Rule1D rt = stretched(params.order, params.panels_t, params.scale_t);
  const std::size_t n = rx.x.size();
  nodes_.reserve(n * n * rt.x.size());
  weights_.reserve(n * n * rt.x.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < rt.x.size(); ++k) {
        nodes_.push_back({rx.x[i], rx.x[j], rt.x[k]});
        weights_.push_back(params.kappa * rx.w[i] * rx.w[j] * rt.w[k]);
      }
}

QuadratureRule QuadratureRule::mapped(const HPoint& center, double lambda) const {
  if (!(lambda > 0.0)) throw DomainError("QuadratureRule::mapped: lambda must be positive");
  QuadratureRule r{Empty{}};
  r.params_ = params_;
  r.nodes_.reserve(nodes_.size());
  r.weights_.reserve(nodes_.size());
  const double jac = std::pow(lambda, -4.0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    r.nodes_.push_back(group_mul(center, dilate(1.0 / lambda, nodes_[i])));
    r.weights_.push_back(weights_[i] * jac);
  }
  return r;
}

QuadratureRule QuadratureRule::koranyi_box(const HPoint& center, double a, int order, int panels, double kappa) {
  if (!(a > 0.0) || order < 1 || panels < 1) throw DomainError("koranyi_box: bad radius, order or panel count");
  const Rule1D g = gauss_legendre(order);
  auto axis = [&](double half) {
    Rule1D r;
    const double h = 2.0 * half / panels;
    for (int p = 0; p < panels; ++p)
      for (int k = 0; k < order; ++k) {
        r.x.push_back(-half + p * h + 0.5 * h * (g.x[k] + 1.0));
        r.w.push_back(0.5 * h * g.w[k]);
      }
    return r;
  };
  const Rule1D rx = axis(a), rt = axis(a * a);
  QuadratureRule r{Empty{}};
  QuadratureParams q;
  q.order = order;
  q.kappa = kappa;
  r.params_ = q;
  for (std::size_t i = 0; i < rx.x.size(); ++i)
    for (std::size_t j = 0; j < rx.x.size(); ++j)
      for (std::size_t k = 0; k < rt.x.size(); ++k) {
        r.nodes_.push_back(group_mul(center, {rx.x[i], rx.x[j], rt.x[k]}));
        r.weights_.push_back(kappa * rx.w[i] * rx.w[j] * rt.w[k]);
      }
  return r;
}

void QuadratureRule::append(const QuadratureRule& other) {
  nodes_.insert(nodes_.end(), other.nodes_.begin(), other.nodes_.end());
  weights_.insert(weights_.end(), other.weights_.begin(), other.weights_.end());
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

double integrate_values(std::span<const double> values, const QuadratureRule& rule) {
  if (values.size() != rule.size()) throw DomainError("integrate_values: size mismatch");
  std::vector<double> terms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      const HPoint& p = rule.nodes()[i];
      throw DomainError("non-finite integrand at node " + std::to_string(i) + " (" + std::to_string(p.x) + ", " +
                        std::to_string(p.y) + ", " + std::to_string(p.t) + ")");
    }
    terms[i] = values[i] * rule.weights()[i];
  }
  return pairwise_sum(terms);
}

double integrate(const std::function<double(const HPoint&)>& u, const QuadratureRule& rule) {
  std::vector<double> vals(rule.size());
  for (std::size_t i = 0; i < rule.size(); ++i) vals[i] = u(rule.nodes()[i]);
  return integrate_values(vals, rule);
}

double x_inner(const ScalarField& u, const ScalarField& v, const QuadratureRule& rule) {
  return integrate(
      [&](const HPoint& p) {
        const Dual2 du = u.dual(p);
        const Dual2 dv = v.dual(p);
        // X = d/dx + 2y d/dt, Y = d/dy - 2x d/dt; Re(Zu conj Zv) = (Xu Xv + Yu Yv) / 4
        const cplx xu = du.g[0] + 2.0 * p.y * du.g[2], yu = du.g[1] - 2.0 * p.x * du.g[2];
        const cplx xv = dv.g[0] + 2.0 * p.y * dv.g[2], yv = dv.g[1] - 2.0 * p.x * dv.g[2];
        return 0.25 * (xu * std::conj(xv) + yu * std::conj(yv)).real();
      },
      rule);
}

double lp_norm(const std::function<double(const HPoint&)>& u, double p, const QuadratureRule& rule) {
  if (!(p >= 1.0)) throw DomainError("lp_norm: p must be >= 1");
  const double s = integrate([&](const HPoint& q) { return std::pow(std::abs(u(q)), p); }, rule);
  return std::pow(s, 1.0 / p);
}

void to_json(nlohmann::json& j, const VolumeCalibration& v) {
  j = nlohmann::json{{"kappa", v.kappa},
                     {"integral_U4", v.integral},
                     {"target", v.target},
                     {"relative_error", v.relative_error},
                     {"refined_relative_error", v.refined_relative_error},
                     {"pass", v.pass}};
}

VolumeCalibration calibrate_volume(const BubbleFamily& fam, const QuadratureParams& q, double tol,
                                   double refined_tol) {
  VolumeCalibration c;
  c.kappa = q.kappa;
  c.target = 4.0 * std::numbers::pi * std::numbers::pi;
  auto u4 = [&](const HPoint& p) {
    const double u = fam.standard(p);
    return u * u * u * u;
  };
  c.integral = integrate(u4, QuadratureRule(q));
  c.relative_error = std::abs(c.integral - c.target) / c.target;
  const double fine = integrate(u4, QuadratureRule(q.refined()));
  c.refined_relative_error = std::abs(fine - c.target) / c.target;
  c.pass = c.relative_error < tol && c.refined_relative_error < refined_tol;
  return c;
}

}  // namespace crlab
