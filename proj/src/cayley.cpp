#include "crlab/cayley.hpp"

#include <array>
#include <cmath>

namespace crlab {

namespace {

constexpr cplx I{0.0, 1.0};

SpherePoint normalized(const SpherePoint& w) {
  const double n = std::sqrt(w.norm2());
  return {w.w1 / n, w.w2 / n};
}

// Real directional derivative of F along a tangent direction (d1, d2) on the sphere,
// central differences at h and h/2 with one Richardson level.
std::array<double, 3> directional(const SpherePoint& w, cplx d1, cplx d2, double h) {
  auto diff = [&](double step) {
    const HPoint fp = cayley(normalized({w.w1 + step * d1, w.w2 + step * d2}));
    const HPoint fm = cayley(normalized({w.w1 - step * d1, w.w2 - step * d2}));
    return std::array<double, 3>{(fp.x - fm.x) / (2 * step), (fp.y - fm.y) / (2 * step), (fp.t - fm.t) / (2 * step)};
  };
  const auto a = diff(h);
  const auto b = diff(0.5 * h);
  return {(4 * b[0] - a[0]) / 3, (4 * b[1] - a[1]) / 3, (4 * b[2] - a[2]) / 3};
}

// Holomorphic derivative sum_k a_k dF/dw_k = (D_a F - i D_{ia} F) / 2.
FrameComponents holomorphic_push(const HPoint& p, cplx a1, cplx a2, double h) {
  const SpherePoint w = cayley_inv(p);
  const auto da = directional(w, a1, a2, h);
  const auto dia = directional(w, I * a1, I * a2, h);
  std::array<cplx, 3> v;
  for (int k = 0; k < 3; ++k) v[k] = 0.5 * (da[k] - I * dia[k]);
  return decompose_frame(p, v[0], v[1], v[2]);
}

// Antiholomorphic derivative sum_k conj(a_k) dF/dconj(w_k) = (D_a F + i D_{ia} F) / 2.
FrameComponents antiholomorphic_push(const HPoint& p, cplx a1, cplx a2, double h) {
  const SpherePoint w = cayley_inv(p);
  const auto da = directional(w, a1, a2, h);
  const auto dia = directional(w, I * a1, I * a2, h);
  std::array<cplx, 3> v;
  for (int k = 0; k < 3; ++k) v[k] = 0.5 * (da[k] + I * dia[k]);
  return decompose_frame(p, v[0], v[1], v[2]);
}

}  // namespace

HPoint cayley(const SpherePoint& w) {
  const cplx den = 1.0 + w.w2;
  if (std::abs(den) < 1e-14) throw DomainError("cayley: w2 = -1 is the pole of the transform");
  const cplx z = w.w1 / den;
  const double t = (I * (1.0 - w.w2) / den).real();
  return from_complex(z, t);
}

SpherePoint cayley_inv(const HPoint& p) {
  const double r2 = p.x * p.x + p.y * p.y;
  const cplx den(p.t, 1.0 + r2);
  return {2.0 * I * p.z() / den, cplx(-p.t, 1.0 - r2) / den};
}

FrameComponents decompose_frame(const HPoint& p, cplx vx, cplx vy, cplx vt) {
  const cplx z = p.z();
  FrameComponents c;
  c.z = vx + I * vy;
  c.zb = vx - I * vy;
  c.t = vt - c.z * (I * std::conj(z)) - c.zb * (-I * z);
  return c;
}

cplx pushforward_coefficient(const HPoint& p) {
  const double a = 1.0 + p.x * p.x + p.y * p.y;
  const cplx w(p.t, a);
  return 0.5 * I * w * w * w / (p.t * p.t + a * a);
}

PushforwardCheck pushforward_W_check(const HPoint& p, double h) {
  if (!(h > 0.0)) throw DomainError("pushforward_W_check: step must be positive");
  const SpherePoint w = cayley_inv(p);
  if (std::abs(1.0 + w.w2) < 1e3 * h) throw DomainError("pushforward_W_check: too close to the pole");
  PushforwardCheck out;
  out.measured = holomorphic_push(p, std::conj(w.w2), -std::conj(w.w1), h);
  out.predicted = pushforward_coefficient(p);
  return out;
}

FrameComponents pushforward_Wbar(const HPoint& p, double h) {
  const SpherePoint w = cayley_inv(p);
  return antiholomorphic_push(p, std::conj(w.w2), -std::conj(w.w1), h);
}

cplx rossi_pushforward_ratio(const HPoint& p, double s, double h) {
  const FrameComponents a = pushforward_W_check(p, h).measured;
  const FrameComponents b = pushforward_Wbar(p, h);
  return (a.zb + s * b.zb) / (a.z + s * b.z);
}

}  // namespace crlab
