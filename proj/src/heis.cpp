#include "crlab/heis.hpp"

#include <string>

namespace crlab {

namespace {
detail::Coords<double> c(const HPoint& p) { return {p.x, p.y, p.t}; }
HPoint h(const detail::Coords<double>& q) { return {q.x, q.y, q.t}; }
}  // namespace

HPoint group_mul(const HPoint& p, const HPoint& q) { return h(detail::mul(c(p), c(q))); }

HPoint group_inv(const HPoint& p) { return h(detail::inv(c(p))); }

HPoint dilate(double lambda, const HPoint& p) {
  if (!(lambda > 0.0)) throw DomainError("dilate: lambda must be positive, got " + std::to_string(lambda));
  return h(detail::dil(lambda, c(p)));
}

HPoint left_translate(const HPoint& x, const HPoint& y) { return group_mul(group_inv(x), y); }

double koranyi_norm(const HPoint& p) {
  const double r2 = p.x * p.x + p.y * p.y;
  return std::sqrt(std::sqrt(r2 * r2 + p.t * p.t));
}

double koranyi_distance(const HPoint& p, const HPoint& q) { return koranyi_norm(left_translate(q, p)); }

KoranyiBall::KoranyiBall(HPoint center, double radius) : center_(center), radius_(radius) {
  if (!(radius > 0.0)) throw DomainError("KoranyiBall: radius must be positive");
  if (!center.finite()) throw DomainError("KoranyiBall: center must be finite");
}

void to_json(nlohmann::json& j, const HPoint& p) { j = nlohmann::json::array({p.x, p.y, p.t}); }

void from_json(const nlohmann::json& j, HPoint& p) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("", "point must be an array [x, y, t]");
  p = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace crlab
