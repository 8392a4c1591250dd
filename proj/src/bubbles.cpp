#include "crlab/bubbles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace crlab {

namespace {

constexpr cplx I{0.0, 1.0};

// rho = t^2 + (1 + |z|^2)^2 and a = 1 + |z|^2 as jets.
struct Profile {
  Dual2 a, rho;
};

Profile profile_parts(const Dual2& x, const Dual2& y, const Dual2& t) {
  Profile p;
  p.a = 1.0 + x * x + y * y;
  p.rho = t * t + p.a * p.a;
  return p;
}

// Closed forms of the frame derivatives of U = c1 rho^{-1/2}.
Dual2 zu_closed(double c1, const Dual2& x, const Dual2& y, const Dual2& t) {
  const Profile q = profile_parts(x, y, t);
  const Dual2 zbar = x - I * y;
  return (-c1) * zbar * (q.a + I * t) * pow(q.rho, -1.5);
}

Dual2 tu_closed(double c1, const Dual2& x, const Dual2& y, const Dual2& t) {
  const Profile q = profile_parts(x, y, t);
  return (-c1) * t * pow(q.rho, -1.5);
}

Dual2 xiu_closed(double c1, const Dual2& x, const Dual2& y, const Dual2& t) {
  const Profile q = profile_parts(x, y, t);
  const Dual2 r2 = x * x + y * y;
  return (-2.0 * c1) * pow(q.rho, -1.5) * (r2 * q.a + t * t);
}

// p -> g(delta_lambda(L_x p)) on jets.
ScalarField recentre(ScalarField::Fn g, const BubbleParams& b, double factor, bool real) {
  const HPoint x = b.center;
  const double lam = b.lambda;
  return ScalarField(
      [g = std::move(g), x, lam, factor](const Dual2& px, const Dual2& py, const Dual2& pt) {
        const detail::Coords<Dual2> xi{Dual2(-x.x), Dual2(-x.y), Dual2(-x.t)};
        const auto q = detail::dil(lam, detail::mul(xi, detail::Coords<Dual2>{px, py, pt}));
        return factor * g(q.x, q.y, q.t);
      },
      real);
}

double laplace0(const Jet2& j) { return (0.5 * (j.ZZb + j.ZbZ)).real(); }

}  // namespace

void BubbleParams::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("bubble scale must be positive");
  if (!center.finite()) throw DomainError("bubble center must be finite");
}

void to_json(nlohmann::json& j, const BubbleConstant& c) {
  j = nlohmann::json{{"c1", c.c1},
                     {"rho", c.rho},
                     {"rho_spread", c.rho_spread},
                     {"max_relative_residual", c.residual},
                     {"probes", c.probes}};
}

ScalarField bubble_profile() {
  return ScalarField(
      [](const Dual2& x, const Dual2& y, const Dual2& t) { return pow(profile_parts(x, y, t).rho, -0.5); },
      true);
}

BubbleConstant calibrate_c1(int nprobes, double spread_tol, double residual_tol) {
  if (nprobes < 1) throw DomainError("calibrate_c1: need at least one probe");
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  BubbleConstant out;
  out.probes.push_back({0.0, 0.0, 0.0});
  while (static_cast<int>(out.probes.size()) < nprobes) out.probes.push_back({unif(rng), unif(rng), unif(rng)});

  const ScalarField w = bubble_profile();
  std::vector<double> ratios;
  for (const auto& p : out.probes) {
    const Jet2 j = frame_jet(w, p);
    const double wv = j.value.real();
    ratios.push_back(-4.0 * laplace0(j) / (2.0 * wv * wv * wv));
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  double mean = 0.0;
  for (double r : ratios) mean += r;
  mean /= static_cast<double>(ratios.size());
  out.rho = mean;
  out.rho_spread = (*hi - *lo) / std::abs(mean);
  if (!(mean > 0.0) || out.rho_spread > spread_tol)
    throw CalibrationError("bubble ratio L w / 2w^3 is not constant (spread " + std::to_string(out.rho_spread) +
                           "); frame or sublaplacian convention is inconsistent");
  out.c1 = std::sqrt(mean);

  BubbleFamily fam(out);
  for (const auto& p : out.probes) {
    const Jet2 j = fam.standard_jet(p);
    const double u = j.value.real();
    out.residual = std::max(out.residual, std::abs(-4.0 * laplace0(j) - 2.0 * u * u * u) / (u * u * u));
  }
  if (out.residual > residual_tol)
    throw CalibrationError("bubble residual " + std::to_string(out.residual) + " exceeds tolerance");
  return out;
}

BubbleFamily::BubbleFamily(const BubbleConstant& c) : c1_(c.c1) {
  if (!(c1_ > 0.0) || !std::isfinite(c1_)) throw CalibrationError("bubble constant is not calibrated");
}

double BubbleFamily::standard(const HPoint& p) const {
  const double a = 1.0 + p.x * p.x + p.y * p.y;
  return c1_ / std::sqrt(p.t * p.t + a * a);
}

Jet2 BubbleFamily::standard_jet(const HPoint& p) const { return frame_jet(standard_field(), p); }

double BubbleFamily::value(const BubbleParams& b, const HPoint& p) const {
  b.validate();
  return b.lambda * standard(dilate(b.lambda, left_translate(b.center, p)));
}

Jet2 BubbleFamily::jet(const BubbleParams& b, const HPoint& p) const { return frame_jet(field(b), p); }

ScalarField BubbleFamily::standard_field() const {
  const double c1 = c1_;
  return ScalarField(
      [c1](const Dual2& x, const Dual2& y, const Dual2& t) { return c1 * pow(profile_parts(x, y, t).rho, -0.5); },
      true);
}

ScalarField BubbleFamily::field(const BubbleParams& b) const {
  b.validate();
  const double c1 = c1_;
  return recentre([c1](const Dual2& x, const Dual2& y,
                       const Dual2& t) { return c1 * pow(profile_parts(x, y, t).rho, -0.5); },
                  b, b.lambda, true);
}

std::array<ScalarField, 4> BubbleFamily::tangent_fields(const BubbleParams& b) const {
  b.validate();
  const double c1 = c1_;
  const double l = b.lambda;
  auto zu = [c1](const Dual2& x, const Dual2& y, const Dual2& t) { return zu_closed(c1, x, y, t); };
  auto zbu = [c1](const Dual2& x, const Dual2& y, const Dual2& t) { return conj(zu_closed(c1, x, y, t)); };
  auto tu = [c1](const Dual2& x, const Dual2& y, const Dual2& t) { return tu_closed(c1, x, y, t); };
  auto xiu = [c1](const Dual2& x, const Dual2& y, const Dual2& t) { return xiu_closed(c1, x, y, t); };
  return {recentre(zu, b, l * l, false), recentre(zbu, b, l * l, false), recentre(tu, b, l * l * l, true),
          recentre(xiu, b, l, true)};
}

std::array<ScalarField, 4> BubbleFamily::tangent_basis(const BubbleParams& b) const {
  b.validate();
  const double c1 = c1_;
  const double l = b.lambda;
  auto re = [c1](const Dual2& x, const Dual2& y, const Dual2& t) { return real(zu_closed(c1, x, y, t)); };
  auto im = [c1](const Dual2& x, const Dual2& y, const Dual2& t) { return imag(zu_closed(c1, x, y, t)); };
  auto tu = [c1](const Dual2& x, const Dual2& y, const Dual2& t) { return tu_closed(c1, x, y, t); };
  auto scale = [c1](const Dual2& x, const Dual2& y, const Dual2& t) {
    return c1 * pow(profile_parts(x, y, t).rho, -0.5) + xiu_closed(c1, x, y, t);
  };
  return {recentre(re, b, l * l, true), recentre(im, b, l * l, true), recentre(tu, b, l * l * l, true),
          recentre(scale, b, l, true)};
}

std::array<double, 4> BubbleFamily::tangent_scaling(double lambda) {
  if (!(lambda > 0.0)) throw DomainError("tangent_scaling: lambda must be positive");
  return {lambda, lambda, lambda * lambda, 1.0};
}

const BubbleFamily& default_bubbles() {
  static const BubbleFamily fam(calibrate_c1());
  return fam;
}

}  // namespace crlab
