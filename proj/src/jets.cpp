#include "crlab/jets.hpp"

#include <algorithm>
#include <cmath>

namespace crlab {

namespace {
constexpr cplx I{0.0, 1.0};
}

Dual2 Dual2::variable(int axis, double value) {
  Dual2 d(value);
  d.g[static_cast<std::size_t>(axis)] = 1.0;
  return d;
}

Dual2& Dual2::operator+=(const Dual2& o) {
  v += o.v;
  for (int i = 0; i < 3; ++i) g[i] += o.g[i];
  for (int i = 0; i < 6; ++i) h[i] += o.h[i];
  return *this;
}

Dual2& Dual2::operator-=(const Dual2& o) {
  v -= o.v;
  for (int i = 0; i < 3; ++i) g[i] -= o.g[i];
  for (int i = 0; i < 6; ++i) h[i] -= o.h[i];
  return *this;
}

Dual2& Dual2::operator*=(const Dual2& o) { return *this = *this * o; }
Dual2& Dual2::operator/=(const Dual2& o) { return *this = *this / o; }

Dual2 operator-(const Dual2& a) {
  Dual2 r;
  r -= a;
  return r;
}
Dual2 operator+(Dual2 a, const Dual2& b) { return a += b; }
Dual2 operator-(Dual2 a, const Dual2& b) { return a -= b; }

Dual2 operator*(const Dual2& a, const Dual2& b) {
  Dual2 r;
  r.v = a.v * b.v;
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      const int k = Dual2::hidx(i, j);
      r.h[k] = a.h[k] * b.v + a.v * b.h[k] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
    }
  }
  return r;
}

Dual2 operator/(const Dual2& a, const Dual2& b) { return a * reciprocal(b); }

Dual2 operator+(Dual2 a, double b) {
  a.v += b;
  return a;
}
Dual2 operator+(double b, Dual2 a) { return a + b; }
Dual2 operator-(Dual2 a, double b) {
  a.v -= b;
  return a;
}
Dual2 operator-(double b, const Dual2& a) { return -a + b; }

Dual2 operator*(Dual2 a, cplx b) {
  a.v *= b;
  for (auto& x : a.g) x *= b;
  for (auto& x : a.h) x *= b;
  return a;
}
Dual2 operator*(cplx b, Dual2 a) { return std::move(a) * b; }
Dual2 operator*(Dual2 a, double b) { return std::move(a) * cplx(b); }
Dual2 operator*(double b, Dual2 a) { return std::move(a) * cplx(b); }
Dual2 operator/(Dual2 a, double b) { return std::move(a) * cplx(1.0 / b); }

Dual2 chain(const Dual2& a, cplx g0, cplx g1, cplx g2) {
  Dual2 r;
  r.v = g0;
  for (int i = 0; i < 3; ++i) r.g[i] = g1 * a.g[i];
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      const int k = Dual2::hidx(i, j);
      r.h[k] = g1 * a.h[k] + g2 * a.g[i] * a.g[j];
    }
  }
  return r;
}

Dual2 pow(const Dual2& a, double p) {
  const cplx v0 = std::pow(a.v, p);
  const cplx v1 = p * std::pow(a.v, p - 1.0);
  const cplx v2 = p * (p - 1.0) * std::pow(a.v, p - 2.0);
  return chain(a, v0, v1, v2);
}

Dual2 sqrt(const Dual2& a) {
  const cplx s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

Dual2 exp(const Dual2& a) {
  const cplx e = std::exp(a.v);
  return chain(a, e, e, e);
}

Dual2 log(const Dual2& a) { return chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }

Dual2 reciprocal(const Dual2& a) {
  const cplx r = 1.0 / a.v;
  return chain(a, r, -r * r, 2.0 * r * r * r);
}

Dual2 conj(const Dual2& a) {
  Dual2 r;
  r.v = std::conj(a.v);
  for (int i = 0; i < 3; ++i) r.g[i] = std::conj(a.g[i]);
  for (int i = 0; i < 6; ++i) r.h[i] = std::conj(a.h[i]);
  return r;
}

Dual2 real(const Dual2& a) {
  Dual2 r;
  r.v = a.v.real();
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i].real();
  for (int i = 0; i < 6; ++i) r.h[i] = a.h[i].real();
  return r;
}

Dual2 imag(const Dual2& a) {
  Dual2 r;
  r.v = a.v.imag();
  for (int i = 0; i < 3; ++i) r.g[i] = a.g[i].imag();
  for (int i = 0; i < 6; ++i) r.h[i] = a.h[i].imag();
  return r;
}

Dual2 abs2(const Dual2& a) { return real(a * conj(a)); }

Jet2 Jet2::conjugate() const {
  // conj(Z u) = Zb conj(u), and the second-order entries swap accordingly.
  Jet2 r;
  r.value = std::conj(value);
  r.Z = std::conj(Zb);
  r.Zb = std::conj(Z);
  r.T = std::conj(T);
  r.ZZ = std::conj(ZbZb);
  r.ZbZb = std::conj(ZZ);
  r.ZZb = std::conj(ZbZ);
  r.ZbZ = std::conj(ZZb);
  return r;
}

Jet2 Jet2::scaled(cplx c) const {
  return {c * value, c * Z, c * Zb, c * T, c * ZZ, c * ZbZb, c * ZZb, c * ZbZ};
}

namespace {

// A frame vector field a d/dx + b d/dy + c(x, y) d/dt with constant a, b and
// c affine in (x, y); dc holds (dc/dx, dc/dy).
struct FrameField {
  cplx a, b, c;
  cplx dcx, dcy;
};

FrameField field_Z(const HPoint& p) {
  // i conj(z) = y + i x
  return {0.5, -0.5 * I, cplx(p.y, p.x), I, 1.0};
}
FrameField field_Zb(const HPoint& p) {
  // -i z = y - i x
  return {0.5, 0.5 * I, cplx(p.y, -p.x), -I, 1.0};
}

cplx apply1(const FrameField& e, const Dual2& u) { return e.a * u.g[0] + e.b * u.g[1] + e.c * u.g[2]; }

// e1(e2 u) = e1(c2) u_t + sum_kj c1_k c2_j u_kj
cplx apply2(const FrameField& e1, const FrameField& e2, const Dual2& u) {
  const std::array<cplx, 3> c1{e1.a, e1.b, e1.c};
  const std::array<cplx, 3> c2{e2.a, e2.b, e2.c};
  cplx s = (e1.a * e2.dcx + e1.b * e2.dcy) * u.g[2];
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) s += c1[k] * c2[j] * u.hess(k, j);
  return s;
}

}  // namespace

Jet2 frame_from_dual(const Dual2& u, const HPoint& p) {
  const FrameField Z = field_Z(p);
  const FrameField Zb = field_Zb(p);
  Jet2 j;
  j.value = u.v;
  j.Z = apply1(Z, u);
  j.Zb = apply1(Zb, u);
  j.T = u.g[2];
  j.ZZ = apply2(Z, Z, u);
  j.ZbZb = apply2(Zb, Zb, u);
  j.ZZb = apply2(Z, Zb, u);
  j.ZbZ = apply2(Zb, Z, u);
  return j;
}

Dual2 ScalarField::dual(const HPoint& p) const {
  return fn_(Dual2::variable(0, p.x), Dual2::variable(1, p.y), Dual2::variable(2, p.t));
}

cplx ScalarField::value(const HPoint& p) const { return fn_(Dual2(p.x), Dual2(p.y), Dual2(p.t)).v; }

ScalarField translate_field(const ScalarField& u, const HPoint& x) {
  return ScalarField(
      [u, x](const Dual2& px, const Dual2& py, const Dual2& pt) {
        const detail::Coords<Dual2> xi{Dual2(-x.x), Dual2(-x.y), Dual2(-x.t)};
        const auto q = detail::mul(xi, detail::Coords<Dual2>{px, py, pt});
        return u(q.x, q.y, q.t);
      },
      u.is_real_valued());
}

ScalarField dilate_field(const ScalarField& u, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("dilate_field: lambda must be positive");
  return ScalarField([u, lambda](const Dual2& x, const Dual2& y,
                                 const Dual2& t) { return u(lambda * x, lambda * y, (lambda * lambda) * t); },
                     u.is_real_valued());
}

ScalarField constant_field(cplx c) {
  return ScalarField([c](const Dual2&, const Dual2&, const Dual2&) { return Dual2(c); }, c.imag() == 0.0);
}

ScalarField scale_field(const ScalarField& u, cplx c) {
  return ScalarField([u, c](const Dual2& x, const Dual2& y, const Dual2& t) { return c * u(x, y, t); },
                     u.is_real_valued() && c.imag() == 0.0);
}

Jet2 frame_jet(const ScalarField& u, const HPoint& p) { return frame_from_dual(u.dual(p), p); }

cplx xi_apply(const Jet2& j, const HPoint& p) {
  const cplx z = p.z();
  return z * j.Z + std::conj(z) * j.Zb + 2.0 * p.t * j.T;
}

cplx xi_apply(const ScalarField& u, const HPoint& p) { return xi_apply(frame_jet(u, p), p); }

namespace {

// Coordinate gradient and Hessian by central differences at step h.
Dual2 central_dual(const PointwiseField& u, const HPoint& p, double h) {
  auto at = [&](double dx, double dy, double dt) { return u({p.x + dx, p.y + dy, p.t + dt}); };
  const std::array<std::array<double, 3>, 3> e{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  Dual2 d;
  d.v = u(p);
  for (int i = 0; i < 3; ++i) {
    const cplx fp = at(h * e[i][0], h * e[i][1], h * e[i][2]);
    const cplx fm = at(-h * e[i][0], -h * e[i][1], -h * e[i][2]);
    d.g[i] = (fp - fm) / (2.0 * h);
    d.h[Dual2::hidx(i, i)] = (fp - 2.0 * d.v + fm) / (h * h);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      auto off = [&](double si, double sj) {
        return at(h * (si * e[i][0] + sj * e[j][0]), h * (si * e[i][1] + sj * e[j][1]),
                  h * (si * e[i][2] + sj * e[j][2]));
      };
      d.h[Dual2::hidx(i, j)] = (off(1, 1) - off(1, -1) - off(-1, 1) + off(-1, -1)) / (4.0 * h * h);
    }
  }
  return d;
}

}  // namespace

Jet2 fd_fallback_jet(const PointwiseField& u, const HPoint& p, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("fd_fallback_jet: step must be positive and finite");
  if (h < 1e-150 || p.x + h == p.x || p.y + h == p.y || p.t + h == p.t)
    throw DomainError("fd_fallback_jet: step underflow at this point");
  const Dual2 coarse = central_dual(u, p, h);
  const Dual2 fine = central_dual(u, p, 0.5 * h);
  Dual2 r = fine;
  for (int i = 0; i < 3; ++i) r.g[i] = (4.0 * fine.g[i] - coarse.g[i]) / 3.0;
  for (int i = 0; i < 6; ++i) r.h[i] = (4.0 * fine.h[i] - coarse.h[i]) / 3.0;
  return frame_from_dual(r, p);
}

std::array<double, 7> gamma2_components(const ScalarField& f, std::span<const HPoint> probes) {
  if (probes.empty()) throw DomainError("gamma2_norm_estimate: empty probe set");
  std::array<double, 7> sup{};
  for (const auto& p : probes) {
    const Jet2 j = frame_jet(f, p);
    const std::array<double, 7> a{std::abs(j.value), std::abs(j.Z),   std::abs(j.Zb), std::abs(j.ZZ),
                                  std::abs(j.ZbZb),  std::abs(j.ZZb), std::abs(j.ZbZ)};
    for (std::size_t k = 0; k < 7; ++k) sup[k] = std::max(sup[k], a[k]);
  }
  return sup;
}

double gamma2_norm_estimate(const ScalarField& f, std::span<const HPoint> probes) {
  double s = 0.0;
  for (double v : gamma2_components(f, probes)) s += v;
  return s;
}

}  // namespace crlab
