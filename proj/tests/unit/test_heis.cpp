#include <doctest.h>

#include <cmath>
#include <random>

#include "crlab/heis.hpp"

using namespace crlab;

namespace {

HPoint random_point(std::mt19937_64& rng, double r = 3.0) {
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng), u(rng)};
}

void check_close(const HPoint& a, const HPoint& b, double tol = 1e-12) {
  CHECK(std::abs(a.x - b.x) <= tol);
  CHECK(std::abs(a.y - b.y) <= tol);
  CHECK(std::abs(a.t - b.t) <= tol);
}

}  // namespace

TEST_CASE("group law on simple points") {
  const HPoint p = group_mul({0, 1, 0}, {1, 0, 0});
  check_close(p, {1, 1, 2});
  check_close(group_mul({0.3, -1.2, 0.7}, {}), {0.3, -1.2, 0.7});
  const HPoint q{0.4, 2.0, -1.5};
  check_close(group_mul(q, group_inv(q)), {});
  check_close(group_mul(group_inv(q), q), {});
}

TEST_CASE("inverse") {
  check_close(group_inv({1, 1, 2}), {-1, -1, -2});
  check_close(group_inv({}), {});
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const HPoint p = random_point(rng);
    check_close(group_inv(group_inv(p)), p);
  }
}

TEST_CASE("associativity and dilation automorphism") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> lam(0.1, 5.0);
  for (int i = 0; i < 200; ++i) {
    const HPoint p = random_point(rng), q = random_point(rng), r = random_point(rng);
    check_close(group_mul(group_mul(p, q), r), group_mul(p, group_mul(q, r)), 1e-11);
    const double l = lam(rng);
    check_close(dilate(l, group_mul(p, q)), group_mul(dilate(l, p), dilate(l, q)), 1e-10);
  }
}

TEST_CASE("dilations") {
  check_close(dilate(2.0, {1, 0, 1}), {2, 0, 4});
  const HPoint p{0.3, 0.1, -0.8};
  check_close(dilate(1.0, p), p);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lam(0.1, 4.0);
  for (int i = 0; i < 50; ++i) {
    const HPoint q = random_point(rng);
    const double a = lam(rng), b = lam(rng);
    check_close(dilate(a, dilate(b, q)), dilate(a * b, q), 1e-10);
  }
  CHECK_THROWS_AS(dilate(0.0, p), DomainError);
  CHECK_THROWS_AS(dilate(-1.0, p), DomainError);
}

TEST_CASE("left translation") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const HPoint x = random_point(rng), y = random_point(rng);
    check_close(left_translate(x, x), {});
    check_close(left_translate({}, y), y);
    check_close(left_translate(x, group_mul(x, y)), y, 1e-11);
  }
}

TEST_CASE("Koranyi norm") {
  CHECK(koranyi_norm({1, 0, 1}) == doctest::Approx(std::pow(2.0, 0.25)));
  CHECK(koranyi_norm({}) == 0.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lam(0.1, 6.0);
  for (int i = 0; i < 100; ++i) {
    const HPoint p = random_point(rng);
    const double l = lam(rng);
    CHECK(koranyi_norm(dilate(l, p)) == doctest::Approx(l * koranyi_norm(p)).epsilon(1e-12));
    CHECK(koranyi_norm(group_inv(p)) == doctest::Approx(koranyi_norm(p)).epsilon(1e-14));
  }
}

TEST_CASE("Koranyi distance is a metric on samples") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    const HPoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
    CHECK(koranyi_distance(a, b) == doctest::Approx(koranyi_distance(b, a)).epsilon(1e-12));
    CHECK(koranyi_distance(a, c) <= koranyi_distance(a, b) + koranyi_distance(b, c) + 1e-12);
  }
}

TEST_CASE("balls") {
  const KoranyiBall b({1, 0, 0}, 0.5);
  CHECK(b.contains({1, 0, 0}));
  CHECK_FALSE(b.contains({2, 0, 0}));
  CHECK_THROWS_AS(KoranyiBall({}, 0.0), DomainError);
}

TEST_CASE("json round trip") {
  const HPoint p{0.5, -1.25, 3.0};
  nlohmann::json j = p;
  CHECK(j.dump() == "[0.5,-1.25,3.0]");
  CHECK(j.get<HPoint>() == p);
  CHECK_THROWS(nlohmann::json::array({1, 2}).get<HPoint>());
}
