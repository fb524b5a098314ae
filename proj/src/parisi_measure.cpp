#include "rsb/parisi_measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsb {

namespace {

constexpr int kProbePoints = 10000;

double plateau_value(const std::vector<DiscreteParisiMeasure::Level>& levels, double q) {
  if (q >= 1.0) return 1.0;
  // first level whose right endpoint lies strictly beyond q
  auto it = std::upper_bound(levels.begin() + 1, levels.end(), q,
                             [](double v, const auto& lv) { return v < lv.first; });
  return it->second;
}

}  // namespace

DiscreteParisiMeasure::DiscreteParisiMeasure(std::vector<Level> levels) : levels_(std::move(levels)) {
  if (levels_.size() < 2) throw std::invalid_argument("parisi measure: need at least levels 0 and K+1");
  if (levels_.front() != Level{0.0, 0.0}) throw std::invalid_argument("parisi measure: level 0 must be (0,0)");
  if (levels_.back() != Level{1.0, 1.0}) throw std::invalid_argument("parisi measure: last level must be (1,1)");
  for (std::size_t l = 1; l < levels_.size(); ++l) {
    const auto [q, x] = levels_[l];
    if (!(q >= 0.0 && q <= 1.0 && x >= 0.0 && x <= 1.0))
      throw std::invalid_argument("parisi measure: q and x must lie in [0,1]");
    if (q < levels_[l - 1].first) throw std::invalid_argument("parisi measure: q must be non-decreasing");
    if (l >= 2 && x < levels_[l - 1].second)
      throw std::invalid_argument("parisi measure: x must be non-decreasing");
  }
}

DiscreteParisiMeasure DiscreteParisiMeasure::from_grid(std::span<const double> q, std::span<const double> x) {
  if (q.size() != x.size()) throw std::invalid_argument("parisi measure: grid and exponents differ in length");
  std::vector<Level> levels;
  for (std::size_t l = 0; l < q.size(); ++l) levels.emplace_back(q[l], x[l]);
  return DiscreteParisiMeasure(std::move(levels));
}

DiscreteParisiMeasure DiscreteParisiMeasure::step_at_zero() {
  return DiscreteParisiMeasure({{0.0, 0.0}, {1.0, 1.0}});
}

DiscreteParisiMeasure DiscreteParisiMeasure::point_mass_at_one() {
  return DiscreteParisiMeasure({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}});
}

std::vector<double> DiscreteParisiMeasure::grid() const {
  std::vector<double> out;
  for (const auto& lv : levels_) out.push_back(lv.first);
  return out;
}

std::vector<double> DiscreteParisiMeasure::exponents() const {
  std::vector<double> out;
  for (const auto& lv : levels_) out.push_back(lv.second);
  return out;
}

DiscreteParisiMeasure DiscreteParisiMeasure::normalized() const {
  std::vector<Level> out{{0.0, 0.0}};
  for (std::size_t l = 1; l < levels_.size(); ++l) {
    const auto [q, x] = levels_[l];
    if (q == levels_[l - 1].first) continue;  // empty plateau
    if (out.size() > 1 && out.back().second == x)
      out.back().first = q;
    else
      out.emplace_back(q, x);
  }
  if (out.back().second < 1.0) out.emplace_back(1.0, 1.0);  // atom at 1
  return DiscreteParisiMeasure(std::move(out));
}

DiscreteParisiMeasure DiscreteParisiMeasure::refined(std::span<const double> times) const {
  std::vector<Level> out = levels_;
  for (double t : times) {
    if (!(t > 0.0 && t < 1.0)) continue;
    const bool present = std::any_of(out.begin(), out.end(), [t](const Level& lv) { return lv.first == t; });
    if (present) continue;
    const double v = plateau_value(out, t);
    auto pos = std::upper_bound(out.begin(), out.end(), t, [](double a, const Level& lv) { return a < lv.first; });
    out.insert(pos, Level{t, v});
  }
  return DiscreteParisiMeasure(std::move(out));
}

GeneralParisiMeasure GeneralParisiMeasure::from_cdf(std::function<double(double)> cdf) {
  double prev = 0.0;
  for (int i = 0; i <= kProbePoints; ++i) {
    const double v = cdf(static_cast<double>(i) / kProbePoints);
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw std::invalid_argument("general measure: cdf outside [0,1]");
    if (v < prev - 1e-12) throw std::invalid_argument("general measure: cdf is not monotone");
    prev = v;
  }
  if (std::abs(cdf(1.0) - 1.0) > 1e-12) throw std::invalid_argument("general measure: cdf(1) must be 1");
  GeneralParisiMeasure out;
  out.cdf_ = std::move(cdf);
  return out;
}

GeneralParisiMeasure GeneralParisiMeasure::from_discrete(DiscreteParisiMeasure mu) {
  GeneralParisiMeasure out;
  out.cdf_ = [mu](double q) { return cdf_at(mu, q); };
  out.discrete_ = std::move(mu);
  return out;
}

double GeneralParisiMeasure::cdf(double q) const {
  if (q >= 1.0) return 1.0;
  return std::clamp(cdf_(q), 0.0, 1.0);
}

double cdf_at(const DiscreteParisiMeasure& mu, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("cdf_at: q outside [0,1]");
  return plateau_value(mu.levels(), q);
}

double sup_distance(const DiscreteParisiMeasure& a, const DiscreteParisiMeasure& b) {
  std::vector<double> points = a.grid();
  const auto gb = b.grid();
  points.insert(points.end(), gb.begin(), gb.end());
  double worst = 0.0;
  for (double q : points) worst = std::max(worst, std::abs(cdf_at(a, q) - cdf_at(b, q)));
  return worst;
}

double sup_distance(const GeneralParisiMeasure& a, const DiscreteParisiMeasure& b) {
  std::vector<double> points;
  for (int i = 0; i <= kProbePoints; ++i) points.push_back(static_cast<double>(i) / kProbePoints);
  for (double q : b.grid()) {
    points.push_back(q);
    if (q > 0.0) points.push_back(std::nextafter(q, 0.0));
  }
  double worst = 0.0;
  for (double q : points) worst = std::max(worst, std::abs(a.cdf(q) - cdf_at(b, q)));
  return worst;
}

DiscreteParisiMeasure discretize(const GeneralParisiMeasure& mu, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("discretize: tol must be positive");
  if (mu.discrete()) return mu.discrete()->normalized();

  const auto slices = static_cast<std::size_t>(std::ceil(1.0 / tol - 1e-12));
  std::vector<DiscreteParisiMeasure::Level> levels{{0.0, 0.0}};
  for (std::size_t k = 1; k < slices; ++k) {
    const double target = static_cast<double>(k) * tol;
    // generalized inverse: smallest q with cdf(q) >= target
    double lo = 0.0, hi = 1.0;
    if (mu.cdf(0.0) >= target) {
      hi = 0.0;
    } else {
      for (int it = 0; it < 200 && std::nextafter(lo, 1.0) < hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mu.cdf(mid) >= target)
          hi = mid;
        else
          lo = mid;
      }
    }
    levels.emplace_back(std::max(hi, levels.back().first), std::min(target, 1.0));
  }
  levels.emplace_back(1.0, 1.0);
  return DiscreteParisiMeasure(std::move(levels)).normalized();
}

double support_infimum(const DiscreteParisiMeasure& mu, double x) {
  if (!(x > 0.0 && x <= 1.0)) throw std::domain_error("support_infimum: x must lie in (0,1]");
  const auto& lv = mu.levels();
  for (std::size_t l = 1; l < lv.size(); ++l)
    if (lv[l].second >= x) return lv[l - 1].first;
  return 1.0;
}

void to_json(nlohmann::json& j, const DiscreteParisiMeasure& mu) {
  j = nlohmann::json::object();
  j["levels"] = nlohmann::json::array();
  for (const auto& [q, x] : mu.levels()) j["levels"].push_back({q, x});
}

DiscreteParisiMeasure measure_from_json(const nlohmann::json& j) {
  std::vector<DiscreteParisiMeasure::Level> levels;
  for (const auto& pair : j.at("levels")) levels.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
  return DiscreteParisiMeasure(std::move(levels));
}

}  // namespace rsb
