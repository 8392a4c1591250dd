#include "crlab/deform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crlab {

namespace {

constexpr cplx I{0.0, 1.0};

Dual2 phi_dual(const Dual2& x, const Dual2& y, const Dual2& t) {
  const Dual2 a = 1.0 + x * x + y * y;
  const Dual2 q = (t - I * a) / (t + I * a);
  return q * q * q;
}

// chi composed with the Koranyi gauge of q = L_c p, scaled by r.
std::array<double, 3> smooth_cutoff_derivatives(double u) {
  if (u <= 0.0) return {1.0, 0.0, 0.0};
  if (u >= 1.0) return {0.0, 0.0, 0.0};
  // psi(x) = exp(-1/x), chi = psi(1-u) / (psi(1-u) + psi(u))
  auto psi = [](double x) -> std::array<double, 3> {
    const double e = std::exp(-1.0 / x);
    return {e, e / (x * x), e * (1.0 / (x * x * x * x) - 2.0 / (x * x * x))};
  };
  const auto p = psi(1.0 - u);
  const auto q = psi(u);
  const double N = p[0], N1 = -p[1], N2 = p[2];
  const double S = p[0] + q[0], S1 = -p[1] + q[1], S2 = p[2] + q[2];
  return {N / S, N1 / S - N * S1 / (S * S),
          N2 / S - 2.0 * N1 * S1 / (S * S) - N * S2 / (S * S) + 2.0 * N * S1 * S1 / (S * S * S)};
}

Dual2 cutoff_dual(const Dual2& px, const Dual2& py, const Dual2& pt, const HPoint& c, double r, double A,
                  bool smooth) {
  const detail::Coords<Dual2> ci{Dual2(-c.x), Dual2(-c.y), Dual2(-c.t)};
  const auto q = detail::mul(ci, detail::Coords<Dual2>{px, py, pt});
  const Dual2 r2 = q.x * q.x + q.y * q.y;
  const Dual2 n4 = r2 * r2 + q.t * q.t;
  const double inner = std::pow(r, 4.0);
  const double outer = std::pow(A * r, 4.0);
  if (n4.v.real() <= inner) return Dual2(1.0);
  if (n4.v.real() >= outer) return Dual2(0.0);
  const Dual2 u = (pow(n4, 0.25) / r - 1.0) / (A - 1.0);
  const double uv = u.v.real();
  if (smooth) {
    const auto c = smooth_cutoff_derivatives(uv);
    return chain(u, c[0], c[1], c[2]);
  }
  const double u2 = uv * uv;
  const double c0 = quintic_cutoff(uv);
  const double c1 = -30.0 * u2 * (1.0 - uv) * (1.0 - uv);
  const double c2 = -60.0 * uv * (1.0 - uv) * (1.0 - 2.0 * uv);
  return chain(u, c0, c1, c2);
}

}  // namespace

Deformation zero_deformation() {
  Deformation d;
  d.f = constant_field(0.0);
  d.support_radius = 0.0;
  d.kind = "zero";
  return d;
}

cplx rossi_phi(const HPoint& p) {
  const double a = 1.0 + p.x * p.x + p.y * p.y;
  const cplx q = cplx(p.t, -a) / cplx(p.t, a);
  return q * q * q;
}

ScalarField rossi_phi_field() { return ScalarField(phi_dual, false); }

Deformation rossi_deformation(double s) {
  if (!(std::abs(s) < 1.0)) throw DomainError("rossi_deformation: |s| must be < 1 for a CR structure");
  if (s == 0.0) return zero_deformation();
  Deformation d;
  d.f = ScalarField([s](const Dual2& x, const Dual2& y, const Dual2& t) { return s * phi_dual(x, y, t); }, false);
  d.sup_bound = std::abs(s);
  d.kind = "rossi";
  return d;
}

double smooth_cutoff(double u) { return smooth_cutoff_derivatives(u)[0]; }

double quintic_cutoff(double u) {
  if (u <= 0.0) return 1.0;
  if (u >= 1.0) return 0.0;
  const double u3 = u * u * u;
  return 1.0 - u3 * (10.0 - 15.0 * u + 6.0 * u * u);
}

void GluingSpec::validate() const {
  const std::size_t n = centers.size();
  if (n == 0) throw ConfigError("/deformation/centers", "at least one ball is required");
  if (radii.size() != n) throw ConfigError("/deformation/radii", "length differs from centers");
  if (amplitudes.size() != n) throw ConfigError("/deformation/amplitudes", "length differs from centers");
  if (!(annulus > 1.0)) throw ConfigError("/deformation/A", "annulus factor must exceed 1");
  if (profile != "quintic" && profile != "smooth") throw ConfigError("/deformation/profile", "unknown cutoff profile '" + profile + "'");
  for (std::size_t k = 0; k < n; ++k) {
    const std::string at = "/" + std::to_string(k);
    if (!centers[k].finite()) throw ConfigError("/deformation/centers" + at, "non-finite center");
    if (!(radii[k] > 0.0)) throw ConfigError("/deformation/radii" + at, "radius must be positive");
    if (!(std::abs(amplitudes[k]) < 1.0)) throw ConfigError("/deformation/amplitudes" + at, "|s| must be < 1");
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k)
      if (koranyi_distance(centers[j], centers[k]) < annulus * (radii[j] + radii[k]))
        throw ConfigError("/deformation/centers",
                          "balls " + std::to_string(j) + " and " + std::to_string(k) + " overlap");
}

void to_json(nlohmann::json& j, const GluingSpec& g) {
  j = nlohmann::json{{"centers", g.centers},
                     {"radii", g.radii},
                     {"amplitudes", g.amplitudes},
                     {"A", g.annulus},
                     {"profile", g.profile}};
}

void from_json(const nlohmann::json& j, GluingSpec& g) {
  try {
    g.centers = j.at("centers").get<std::vector<HPoint>>();
    g.radii = j.at("radii").get<std::vector<double>>();
    g.amplitudes = j.at("amplitudes").get<std::vector<double>>();
    g.annulus = j.value("A", 2.0);
    g.profile = j.value("profile", std::string("quintic"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("/deformation", e.what());
  }
}

Deformation glued_deformation(const GluingSpec& spec) {
  spec.validate();
  Deformation d;
  const double A = spec.annulus;
  auto centers = spec.centers;
  auto radii = spec.radii;
  auto amps = spec.amplitudes;
  d.f = ScalarField(
      [centers, radii, amps, A, smooth = spec.profile == "smooth"](const Dual2& x, const Dual2& y, const Dual2& t) {
        Dual2 chi_sum(0.0);
        bool any = false;
        for (std::size_t k = 0; k < centers.size(); ++k) {
          const Dual2 c = cutoff_dual(x, y, t, centers[k], radii[k], A, smooth);
          if (c.v == cplx(0.0) && c.g == std::array<cplx, 3>{}) continue;
          chi_sum += amps[k] * c;
          any = true;
        }
        if (!any) return Dual2(0.0);
        return chi_sum * phi_dual(x, y, t);
      },
      false);
  double reach = 0.0;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    reach = std::max(reach, koranyi_norm(centers[k]) + A * radii[k]);
    d.support_balls.emplace_back(centers[k], A * radii[k]);
    d.sup_bound = std::max(d.sup_bound, std::abs(amps[k]));
  }
  d.support_radius = reach;
  d.kind = "glued";
  return d;
}

void to_json(nlohmann::json& j, const DeformationReport& r) {
  j = nlohmann::json{{"sup_f", r.sup_f},
                     {"gamma2", r.gamma2},
                     {"gamma2_components", r.gamma2_components},
                     {"admissible", r.admissible},
                     {"support_ok", r.support_ok},
                     {"alpha", r.alpha},
                     {"pass", r.pass}};
}

DeformationReport validate_deformation(const Deformation& d, std::span<const HPoint> probes, double alpha) {
  DeformationReport r;
  r.alpha = alpha;
  if (probes.empty()) {
    r.pass = false;
    return r;
  }
  r.gamma2_components = gamma2_components(d.f, probes);
  for (double v : r.gamma2_components) r.gamma2 += v;
  for (const auto& p : probes) {
    const double m = std::abs(d.f.value(p));
    r.sup_f = std::max(r.sup_f, m);
    if (!(m < 1.0)) r.admissible = false;
    if (koranyi_distance(p, d.support_center) > d.support_radius && m != 0.0) r.support_ok = false;
  }
  r.pass = r.admissible && r.support_ok && r.gamma2 <= alpha;
  return r;
}

}  // namespace crlab
