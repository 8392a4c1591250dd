#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crlab/jets.hpp"

using namespace crlab;

namespace {

constexpr cplx I{0.0, 1.0};

HPoint random_point(std::mt19937_64& rng, double r = 1.5) {
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng), u(rng)};
}

// A non-polynomial complex test field.
ScalarField sample_field() {
  return ScalarField(
      [](const Dual2& x, const Dual2& y, const Dual2& t) {
        return x * x * y + I * t * x + exp(0.3 * y - 0.2 * t) + 1.0 / (2.0 + x * x + t * t) + sqrt(3.0 + y * y);
      },
      false);
}

ScalarField real_field() {
  return ScalarField(
      [](const Dual2& x, const Dual2& y, const Dual2& t) {
        return pow(1.0 + x * x + y * y + t * t, -0.5) * (x - 2.0 * y * t);
      },
      true);
}

ScalarField abs2_z() {
  return ScalarField([](const Dual2& x, const Dual2& y, const Dual2&) { return x * x + y * y; }, true);
}

cplx close_abs(cplx a, cplx b) { return std::abs(a - b); }

// Frame field applied to a pointwise function by central differences:
// Z g = (g_x - i g_y)/2 + i conj(z) g_t.
cplx fd_apply(const std::function<cplx(const HPoint&)>& g, const HPoint& p, bool bar, double h = 1e-5) {
  auto d = [&](double dx, double dy, double dt) {
    return (g({p.x + dx, p.y + dy, p.t + dt}) - g({p.x - dx, p.y - dy, p.t - dt})) / (2 * h);
  };
  const cplx gx = d(h, 0, 0), gy = d(0, h, 0), gt = d(0, 0, h);
  if (!bar) return 0.5 * (gx - I * gy) + I * std::conj(p.z()) * gt;
  return 0.5 * (gx + I * gy) - I * p.z() * gt;
}

}  // namespace

TEST_CASE("frame derivatives of coordinate functions") {
  const ScalarField t([](const Dual2&, const Dual2&, const Dual2& t) { return t; }, true);
  const HPoint p{0.7, -0.4, 1.1};
  const Jet2 j = frame_jet(t, p);
  CHECK(close_abs(j.Z, I * std::conj(p.z())).real() < 1e-15);
  CHECK(close_abs(j.Zb, -I * p.z()).real() < 1e-15);
  CHECK(close_abs(j.T, 1.0).real() < 1e-15);

  const Jet2 k = frame_jet(abs2_z(), p);
  CHECK(close_abs(k.Z, std::conj(p.z())).real() < 1e-14);
  CHECK(close_abs(k.Zb, p.z()).real() < 1e-14);
  CHECK(close_abs(k.ZZb, 1.0).real() < 1e-14);
  CHECK(close_abs(k.ZbZ, 1.0).real() < 1e-14);
  CHECK(std::abs(k.ZZ) < 1e-14);
}

TEST_CASE("second-order entries match differences of first-order frame fields") {
  const ScalarField u = sample_field();
  std::mt19937_64 rng(11);
  for (int n = 0; n < 20; ++n) {
    const HPoint p = random_point(rng);
    const Jet2 j = frame_jet(u, p);
    auto Zu = [&](const HPoint& q) { return frame_jet(u, q).Z; };
    auto Zbu = [&](const HPoint& q) { return frame_jet(u, q).Zb; };
    const double s = 1.0 + std::abs(j.ZZ) + std::abs(j.ZZb);
    CHECK(std::abs(j.ZZ - fd_apply(Zu, p, false)) / s < 1e-8);
    CHECK(std::abs(j.ZZb - fd_apply(Zbu, p, false)) / s < 1e-8);
    CHECK(std::abs(j.ZbZ - fd_apply(Zu, p, true)) / s < 1e-8);
    CHECK(std::abs(j.ZbZb - fd_apply(Zbu, p, true)) / s < 1e-8);
  }
}

TEST_CASE("commutator [Z, Zb] = -2i T") {
  std::mt19937_64 rng(12);
  for (const ScalarField& u : {sample_field(), real_field(), abs2_z()}) {
    for (int n = 0; n < 50; ++n) {
      const HPoint p = random_point(rng);
      const Jet2 j = frame_jet(u, p);
      const double s = std::max({1.0, std::abs(j.ZZb), std::abs(j.ZbZ)});
      CHECK(std::abs(j.ZZb - j.ZbZ + 2.0 * I * j.T) / s < 1e-10);
    }
  }
}

TEST_CASE("Xi generates the dilations") {
  const HPoint p{0.3, 0.8, -0.6};
  const ScalarField t([](const Dual2&, const Dual2&, const Dual2& t) { return t; }, true);
  CHECK(std::abs(xi_apply(t, p) - 2.0 * p.t) < 1e-14);
  CHECK(std::abs(xi_apply(constant_field(3.0), p)) == 0.0);
  std::mt19937_64 rng(13);
  for (int n = 0; n < 20; ++n) {
    const HPoint q = random_point(rng);
    CHECK(std::abs(xi_apply(abs2_z(), q) - 2.0 * abs2_z().value(q)) < 1e-13);
    for (const ScalarField& u : {sample_field(), real_field()}) {
      const double h = 1e-5;
      const cplx fd = (u.value(dilate(std::exp(h), q)) - u.value(dilate(std::exp(-h), q))) / (2 * h);
      CHECK(std::abs(xi_apply(u, q) - fd) < 1e-8);
    }
  }
}

TEST_CASE("left invariance and dilation covariance") {
  std::mt19937_64 rng(14);
  const ScalarField u = sample_field();
  for (int n = 0; n < 30; ++n) {
    const HPoint x = random_point(rng), p = random_point(rng);
    const Jet2 a = frame_jet(translate_field(u, x), p);
    const Jet2 b = frame_jet(u, left_translate(x, p));
    CHECK(std::abs(a.Z - b.Z) < 1e-10);
    CHECK(std::abs(a.ZbZ - b.ZbZ) < 1e-9);
    const double l = 0.5 + 0.1 * n;
    const Jet2 c = frame_jet(dilate_field(u, l), p);
    const Jet2 d = frame_jet(u, dilate(l, p));
    CHECK(std::abs(c.Z - l * d.Z) < 1e-9 * (1 + std::abs(d.Z)));
    CHECK(std::abs(c.ZZb - l * l * d.ZZb) < 1e-9 * (1 + std::abs(l * l * d.ZZb)));
  }
  CHECK_THROWS_AS(dilate_field(u, 0.0), DomainError);
}

TEST_CASE("real fields satisfy the conjugation symmetries exactly") {
  std::mt19937_64 rng(15);
  for (int n = 0; n < 30; ++n) {
    const HPoint p = random_point(rng);
    const Jet2 j = frame_jet(real_field(), p);
    CHECK(j.Zb == std::conj(j.Z));
    CHECK(j.ZbZb == std::conj(j.ZZ));
    CHECK(j.ZbZ == std::conj(j.ZZb));
    const Jet2 c = j.conjugate();
    CHECK(c.Z == j.Z);
  }
}

TEST_CASE("finite-difference fallback") {
  const HPoint p{0.4, -0.3, 0.9};
  const ScalarField a = abs2_z();
  const Jet2 exact = frame_jet(a, p);
  const Jet2 fd = fd_fallback_jet([&](const HPoint& q) { return a.value(q); }, p, 1e-3);
  CHECK(std::abs(fd.Z - exact.Z) < 1e-8);
  CHECK(std::abs(fd.ZZb - exact.ZZb) < 1e-8);
  CHECK(std::abs(fd.ZZ - exact.ZZ) < 1e-8);
  const ScalarField u = sample_field();
  const Jet2 e2 = frame_jet(u, p);
  const Jet2 f2 = fd_fallback_jet([&](const HPoint& q) { return u.value(q); }, p, 1e-2);
  CHECK(std::abs(f2.ZbZ - e2.ZbZ) < 1e-6);
  CHECK(std::abs(f2.T - e2.T) < 1e-7);
  CHECK_THROWS_AS(fd_fallback_jet([&](const HPoint& q) { return u.value(q); }, p, 0.0), DomainError);
}

TEST_CASE("gamma2 estimate") {
  std::vector<HPoint> probes{{0, 0, 0}, {1, 0, 0}};
  CHECK(gamma2_norm_estimate(constant_field(cplx(0.0, -2.5)), probes) == doctest::Approx(2.5));
  std::vector<HPoint> none;
  CHECK_THROWS_AS(gamma2_norm_estimate(constant_field(1.0), none), DomainError);
  std::mt19937_64 rng(16);
  std::vector<HPoint> cloud;
  double prev = 0.0;
  for (int n = 0; n < 40; ++n) {
    cloud.push_back(random_point(rng));
    const double g = gamma2_norm_estimate(sample_field(), cloud);
    CHECK(g >= prev);
    prev = g;
  }
}
