#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crlab/deform.hpp"

using namespace crlab;

namespace {

HPoint random_point(std::mt19937_64& rng, double r = 3.0) {
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng), u(rng)};
}

GluingSpec one_ball(double r = 0.1, double s = 0.1) {
  GluingSpec g;
  g.centers = {{0.5, 0.0, 0.2}};
  g.radii = {r};
  g.amplitudes = {s};
  g.annulus = 2.0;
  return g;
}

}  // namespace

TEST_CASE("Rossi phi") {
  CHECK(std::abs(rossi_phi({}) - cplx(-1.0)) < 1e-15);
  std::mt19937_64 rng(31);
  for (int n = 0; n < 1000; ++n) CHECK(std::abs(std::abs(rossi_phi(random_point(rng))) - 1.0) < 1e-14);
  CHECK(std::abs(rossi_phi({0, 0, 1e8}) - cplx(1.0)) < 1e-7);
  const HPoint p{0.4, 0.1, -0.7};
  CHECK(std::abs(rossi_phi_field().value(p) - rossi_phi(p)) < 1e-15);
}

TEST_CASE("Rossi deformation") {
  CHECK(rossi_deformation(0.0).is_zero());
  const Deformation d = rossi_deformation(0.1);
  std::mt19937_64 rng(32);
  double sup = 0.0;
  for (int n = 0; n < 200; ++n) sup = std::max(sup, std::abs(d.f.value(random_point(rng))));
  CHECK(sup == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(d.sup_bound == 0.1);
  CHECK(std::isinf(d.support_radius));
  CHECK_THROWS_AS(rossi_deformation(1.0), DomainError);
  CHECK_THROWS_AS(rossi_deformation(-1.2), DomainError);
}

TEST_CASE("quintic cutoff is C2 and monotone") {
  CHECK(quintic_cutoff(0.0) == 1.0);
  CHECK(quintic_cutoff(1.0) == 0.0);
  CHECK(quintic_cutoff(0.5) == doctest::Approx(0.5));
  double prev = 1.0;
  for (int i = 1; i <= 100; ++i) {
    const double v = quintic_cutoff(i / 100.0);
    CHECK(v <= prev);
    prev = v;
  }
  const double h = 1e-4;
  for (double e : {0.0, 1.0}) {
    const double d1 = (quintic_cutoff(e + h) - quintic_cutoff(e - h)) / (2 * h);
    const double d2 = (quintic_cutoff(e + h) - 2 * quintic_cutoff(e) + quintic_cutoff(e - h)) / (h * h);
    CHECK(std::abs(d1) < 1e-6);
    CHECK(std::abs(d2) < 1e-3);
  }
}

TEST_CASE("glued deformation") {
  const GluingSpec g = one_ball();
  const Deformation d = glued_deformation(g);
  const HPoint c = g.centers[0];
  CHECK(std::abs(d.f.value(c) - 0.1 * rossi_phi(c)) < 1e-15);
  CHECK(std::abs(d.f.value({3, 3, 3})) == 0.0);
  std::mt19937_64 rng(33);
  for (int n = 0; n < 500; ++n) {
    const HPoint p = group_mul(c, random_point(rng, 0.25));
    const double m = std::abs(d.f.value(p));
    CHECK(m <= 0.1 + 1e-15);
    if (koranyi_distance(p, c) >= 0.2) CHECK(m == 0.0);
  }
}

TEST_CASE("glued jets are continuous across the seams") {
  const GluingSpec g = one_ball(0.3, 0.2);
  const Deformation d = glued_deformation(g);
  const HPoint c = g.centers[0];
  for (const double rho : {0.3, 0.6}) {
    for (const HPoint dir : {HPoint{1, 0, 0}, HPoint{0.3, 0.5, 0.4}, HPoint{0, 0, 1}}) {
      const HPoint unit = dilate(1.0 / koranyi_norm(dir), dir);
      const Jet2 a = frame_jet(d.f, group_mul(c, dilate(rho * (1 - 1e-7), unit)));
      const Jet2 b = frame_jet(d.f, group_mul(c, dilate(rho * (1 + 1e-7), unit)));
      CHECK(std::abs(a.Z - b.Z) < 1e-6);
      CHECK(std::abs(a.ZZb - b.ZZb) < 1e-5);
      CHECK(std::abs(a.ZbZb - b.ZbZb) < 1e-5);
      // exact jets against differences of values across the seam
      const HPoint q = group_mul(c, dilate(rho, unit));
      const Jet2 e = frame_jet(d.f, q);
      const Jet2 fd = fd_fallback_jet([&](const HPoint& p) { return d.f.value(p); }, q, 1e-4);
      CHECK(std::abs(e.Z - fd.Z) < 1e-6);
    }
  }
}

TEST_CASE("gluing validation") {
  GluingSpec g = one_ball();
  g.amplitudes = {1.0};
  CHECK_THROWS_AS(glued_deformation(g), ConfigError);
  GluingSpec two;
  two.centers = {{0, 0, 0}, {0.3, 0, 0}};
  two.radii = {0.1, 0.1};
  two.amplitudes = {0.1, 0.1};
  CHECK_THROWS_AS(glued_deformation(two), ConfigError);
  two.centers[1] = {1.0, 0, 0};
  CHECK_NOTHROW(glued_deformation(two));
  GluingSpec bad = one_ball();
  bad.annulus = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  nlohmann::json j = one_ball();
  CHECK(j.get<GluingSpec>().radii == one_ball().radii);
  CHECK_THROWS_AS(nlohmann::json::object().get<GluingSpec>(), ConfigError);
}

TEST_CASE("deformation reports") {
  std::vector<HPoint> probes;
  std::mt19937_64 rng(34);
  for (int n = 0; n < 300; ++n) probes.push_back(random_point(rng, 1.0));
  const DeformationReport z = validate_deformation(zero_deformation(), probes, 1.0);
  CHECK(z.gamma2 == 0.0);
  CHECK(z.pass);
  const DeformationReport r = validate_deformation(rossi_deformation(0.1), probes, 10.0);
  CHECK(r.pass);
  CHECK(r.gamma2 >= 0.1);
  CHECK(r.sup_f == doctest::Approx(0.1));
  std::vector<double> g2;
  for (double rad : {0.4, 0.2, 0.1}) {
    GluingSpec g = one_ball(rad, 0.1);
    std::vector<HPoint> local;
    for (int n = 0; n < 400; ++n) local.push_back(group_mul(g.centers[0], random_point(rng, 2.5 * rad)));
    g2.push_back(validate_deformation(glued_deformation(g), local, 1e9).gamma2);
  }
  CHECK(g2[1] > g2[0]);
  CHECK(g2[2] > g2[1]);
}
