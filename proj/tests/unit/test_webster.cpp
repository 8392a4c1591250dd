#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crlab/bubbles.hpp"
#include "crlab/deform.hpp"
#include "crlab/quad.hpp"
#include "crlab/webster.hpp"

using namespace crlab;

namespace {

constexpr cplx I{0.0, 1.0};

HPoint random_point(std::mt19937_64& rng, double r = 1.5) {
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng), u(rng)};
}

Deformation polynomial_deformation(double s) {
  Deformation d;
  d.f = ScalarField(
      [s](const Dual2& x, const Dual2& y, const Dual2& t) {
        const Dual2 z = x + I * y;
        return s * (x + 2.0 * I * y * t + x * y + I * t * t + z * z / 3.0);
      },
      false);
  d.sup_bound = 0.5;
  d.kind = "polynomial";
  return d;
}

Deformation constant_deformation(cplx c) {
  Deformation d;
  d.f = constant_field(c);
  d.sup_bound = std::abs(c);
  d.kind = "constant";
  return d;
}

GluingSpec one_ball() {
  GluingSpec g;
  g.centers = {{0.2, -0.1, 0.1}};
  g.radii = {0.4};
  g.amplitudes = {0.1};
  return g;
}

}  // namespace

TEST_CASE("flat and constant structures") {
  const HPoint p{0.4, 0.2, -0.3};
  const ConnectionData z = connection_form(zero_deformation(), p);
  CHECK(std::abs(z.omega_theta) + std::abs(z.omega_1) + std::abs(z.omega_1bar) + std::abs(z.torsion) == 0.0);
  CHECK(z.levi == 2.0);
  CHECK(webster_curvature(zero_deformation(), p).R_exact == 0.0);
  const cplx c(0.3, -0.2);
  const ConnectionData k = connection_form(constant_deformation(c), p);
  CHECK(std::abs(k.omega_1bar) + std::abs(k.omega_1) == 0.0);
  CHECK(k.levi == doctest::Approx(2 * (1 - std::norm(c))));
  CHECK(webster_curvature(constant_deformation(c), p).R_exact == 0.0);
  CHECK_THROWS_AS(connection_form(constant_deformation(1.0), p), DomainError);
  CHECK_THROWS_AS(webster_curvature(constant_deformation(cplx(0.8, 0.8)), p), DomainError);
}

TEST_CASE("closed-form connection equals the bracket solution") {
  std::mt19937_64 rng(51);
  for (const Deformation& d : {rossi_deformation(0.1), polynomial_deformation(0.1), glued_deformation(one_ball())}) {
    for (int n = 0; n < 100; ++n) {
      const Jet2 f = frame_jet(d.f, random_point(rng, 0.8));
      const ConnectionData a = connection_closed(f), b = connection_brackets(f);
      CHECK(std::abs(a.omega_theta - b.omega_theta) < 1e-12);
      CHECK(std::abs(a.omega_1 - b.omega_1) < 1e-12);
      CHECK(std::abs(a.omega_1bar - b.omega_1bar) < 1e-12);
      CHECK(std::abs(a.torsion - b.torsion) < 1e-12);
    }
  }
}

TEST_CASE("structure equations") {
  std::mt19937_64 rng(52);
  const auto g = one_ball();
  for (const Deformation& d : {rossi_deformation(0.05), rossi_deformation(0.1), glued_deformation(g)}) {
    for (int n = 0; n < 200; ++n) {
      const HPoint p = d.kind == "glued" ? group_mul(g.centers[0], random_point(rng, 0.8)) : random_point(rng, 3.0);
      const StructureResiduals r = structure_residuals(d, p);
      CHECK(r.first < 1e-8);
      CHECK(r.second < 1e-8);
    }
  }
  CHECK(structure_residuals(rossi_deformation(0.05), {1, 0, 0}).first < 1e-8);
}

TEST_CASE("curvature against symbolic values") {
  // high-precision values of the structure-equation curvature from a computer algebra system
  struct Case {
    double s;
    HPoint p;
    double R;
  };
  const Case rossi[] = {{0.1, {0.3, -0.2, 0.5}, 0.36052270584142087},
                        {0.1, {1.0, 0.0, 0.0}, 1.2},
                        {0.1, {-0.7, 0.4, -1.1}, -0.76897647806738713},
                        {0.05, {0.3, -0.2, 0.5}, 0.18026135292071043}};
  for (const auto& c : rossi) CHECK(webster_curvature(rossi_deformation(c.s), c.p).R_exact == doctest::Approx(c.R).epsilon(1e-12));
  const Case poly[] = {{0.1, {0.3, -0.2, 0.5}, -0.042427575287653035},
                       {0.1, {1.0, 0.0, 0.0}, -0.040666653016932495},
                       {0.1, {-0.7, 0.4, -1.1}, 0.065346216408329995},
                       {0.05, {1.0, 0.0, 0.0}, -0.008731265943877551},
                       {0.05, {-0.7, 0.4, -1.1}, 0.1140581800703674}};
  for (const auto& c : poly)
    CHECK(webster_curvature(polynomial_deformation(c.s), c.p).R_exact == doctest::Approx(c.R).epsilon(1e-12));
}

TEST_CASE("curvature is real and vanishes with the deformation") {
  std::mt19937_64 rng(53);
  for (int n = 0; n < 100; ++n) {
    const HPoint p = random_point(rng, 1.0);
    const CurvatureValue v = webster_curvature(polynomial_deformation(0.1), p);
    CHECK(v.imag_residue < 1e-10);
  }
  const HPoint p{0.3, 0.1, 0.2};
  double prev = 1e9;
  for (double s : {1e-1, 1e-2, 1e-3}) {
    const double r = std::abs(webster_curvature(rossi_deformation(s), p).R_exact);
    CHECK(r < prev);
    prev = r;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("curvature remainder for a generic deformation is cubic") {
  const HPoint p{0.3, -0.2, 0.5};
  std::vector<double> rem;
  for (double s : {1e-1, 1e-2}) {
    const CurvatureValue v = webster_curvature(polynomial_deformation(s), p);
    rem.push_back(std::abs(v.R_exact - v.R_leading));
  }
  const double slope = std::log10(rem[0] / rem[1]);
  CHECK(slope == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("sublaplacian on simple fields") {
  const ScalarField t([](const Dual2&, const Dual2&, const Dual2& t) { return t; }, true);
  const ScalarField r2([](const Dual2& x, const Dual2& y, const Dual2&) { return x * x + y * y; }, true);
  const HPoint p{0.5, -0.25, 0.75};
  CHECK(std::abs(sublaplacian(zero_deformation(), t, p)) < 1e-15);
  CHECK(std::abs(sublaplacian(zero_deformation(), r2, p) - 1.0) < 1e-14);
}

TEST_CASE("closed-form and defining sublaplacians agree") {
  std::mt19937_64 rng(54);
  const BubbleFamily& fam = default_bubbles();
  const ScalarField u = fam.field({{0.1, 0.2, -0.1}, 1.3});
  for (const Deformation& d : {rossi_deformation(0.1), polynomial_deformation(0.2), glued_deformation(one_ball())}) {
    for (int n = 0; n < 100; ++n) {
      const HPoint p = random_point(rng, 0.8);
      const Jet2 f = frame_jet(d.f, p), j = frame_jet(u, p);
      const cplx a = sublaplacian(f, j), b = sublaplacian_closed(f, j);
      CHECK(std::abs(a - b) / std::abs(a) < 1e-8);
      CHECK(std::abs(a.imag()) < 1e-10 * std::abs(a));
    }
  }
}

TEST_CASE("first-order part of the sublaplacian difference") {
  const BubbleFamily& fam = default_bubbles();
  const ScalarField u = fam.standard_field();
  const HPoint p{0.4, -0.3, 0.6};
  const Jet2 j = frame_jet(u, p);
  std::vector<double> reconciled, statement;
  for (double s : {0.08, 0.04, 0.02}) {
    const Jet2 f = frame_jet(polynomial_deformation(s).f, p);
    const cplx exact = sublaplacian(f, j);
    reconciled.push_back(std::abs(exact - sublaplacian_linear(f, j, 1.0, 1.0)));
    statement.push_back(std::abs(exact - sublaplacian_linear(f, j, 0.5, 0.75)));
  }
  const double slope_r = std::log2(reconciled[1] / reconciled[2]);
  const double slope_s = std::log2(statement[1] / statement[2]);
  CHECK(slope_r == doctest::Approx(2.0).epsilon(0.05));
  CHECK(slope_s == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("integration by parts for the deformed sublaplacian") {
  // -int v Delta_J u = int Re(Z~u conj Z~v) / (1 - |f|^2) for rapidly decaying u, v
  Deformation d;
  d.f = ScalarField(
      [](const Dual2& x, const Dual2& y, const Dual2& t) {
        return 0.3 * (x + I * y * t + t) * exp(-(x * x + y * y + t * t));
      },
      false);
  auto gauss = [](double a, double cx) {
    return ScalarField(
        [a, cx](const Dual2& x, const Dual2& y, const Dual2& t) {
          return exp(-a * ((x - cx) * (x - cx) + y * y + t * t));
        },
        true);
  };
  const ScalarField u = gauss(4.0, 0.1), v = gauss(3.0, -0.1);
  QuadratureParams q;
  q.scale_xy = 0.4;
  q.scale_t = 0.4;
  q.panels_xy = 8;
  q.panels_t = 8;
  q.order = 14;
  const QuadratureRule rule(q);
  const double lhs = -integrate(
      [&](const HPoint& p) { return (v.value(p) * sublaplacian(d, u, p)).real(); }, rule);
  const double rhs = integrate(
      [&](const HPoint& p) {
        const Jet2 f = frame_jet(d.f, p), ju = frame_jet(u, p), jv = frame_jet(v, p);
        const cplx zu = ju.Z + f.value * ju.Zb, zv = jv.Z + f.value * jv.Zb;
        return (zu * std::conj(zv)).real() / (1 - std::norm(f.value));
      },
      rule);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("conformal sublaplacian") {
  const BubbleFamily& fam = default_bubbles();
  const ScalarField U = fam.standard_field();
  std::mt19937_64 rng(55);
  for (int n = 0; n < 50; ++n) {
    const HPoint p = random_point(rng);
    const double u = fam.standard(p);
    CHECK(conformal_sublaplacian(zero_deformation(), U, p) == doctest::Approx(2 * u * u * u).epsilon(1e-10));
    CHECK(std::abs(conformal_sublaplacian(zero_deformation(), constant_field(1.0), p)) < 1e-15);
  }
  // all-difference recomputation at the origin
  const Deformation d = rossi_deformation(0.05);
  const HPoint o{};
  const Jet2 f = fd_fallback_jet([&](const HPoint& q) { return d.f.value(q); }, o, 1e-2);
  const Jet2 j = fd_fallback_jet([&](const HPoint& q) { return U.value(q); }, o, 1e-2);
  CHECK(conformal_sublaplacian(f, j) == doctest::Approx(conformal_sublaplacian(d, U, o)).epsilon(1e-6));
  CHECK_THROWS_AS(conformal_sublaplacian(d, d.f, o), DomainError);
}
