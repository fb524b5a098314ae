#pragma once

#include <json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace rsb {

/// Staircase Parisi measure. levels()[l] = (q_l, x_l) for l = 0..K+1 and
///
///   mu([0,q]) = x_l  for q in [q_{l-1}, q_l),   mu([0,1]) = 1.
///
/// Invariants: q_0 = 0, q_{K+1} = 1, q non-decreasing; x_0 = 0, x
/// non-decreasing, x_{K+1} = 1. Leading plateaus may carry x = 0 (mass
/// concentrated further right); callers that divide by x_1 check
/// has_positive_x1(). Degenerate levels (empty intervals, repeated x) are
/// allowed and removed by normalized().
class DiscreteParisiMeasure {
 public:
  using Level = std::pair<double, double>;

  explicit DiscreteParisiMeasure(std::vector<Level> levels);

  /// Builds the measure with plateaus x_1..x_{K+1} on the grid q_0..q_{K+1}.
  /// x has K+2 entries with x[0] = 0, as the RSB exponent sequence.
  static DiscreteParisiMeasure from_grid(std::span<const double> q, std::span<const double> x);
  /// mu([0,q]) = 1 for all q (unit mass at 0).
  static DiscreteParisiMeasure step_at_zero();
  /// mu([0,q]) = 0 for q < 1 (unit mass at 1).
  static DiscreteParisiMeasure point_mass_at_one();

  const std::vector<Level>& levels() const { return levels_; }
  std::size_t plateau_count() const { return levels_.size() - 1; }
  double q(std::size_t l) const { return levels_[l].first; }
  double x(std::size_t l) const { return levels_[l].second; }
  std::vector<double> grid() const;
  std::vector<double> exponents() const;

  bool has_positive_x1() const { return levels_.size() > 1 && levels_[1].second > 0.0; }

  /// Drops empty plateaus (except a terminal atom at 1) and merges
  /// neighbouring plateaus with equal x.
  DiscreteParisiMeasure normalized() const;

  /// Inserts breakpoints, duplicating the plateau value they split.
  DiscreteParisiMeasure refined(std::span<const double> times) const;

  friend bool operator==(const DiscreteParisiMeasure&, const DiscreteParisiMeasure&) = default;

 private:
  std::vector<Level> levels_;
};

/// Arbitrary Parisi measure given by its CDF q -> mu([0,q]).
class GeneralParisiMeasure {
 public:
  /// Validates monotonicity on a 10^4-point probe grid and cdf(1) == 1.
  static GeneralParisiMeasure from_cdf(std::function<double(double)> cdf);
  static GeneralParisiMeasure from_discrete(DiscreteParisiMeasure mu);

  double cdf(double q) const;
  const std::optional<DiscreteParisiMeasure>& discrete() const { return discrete_; }

 private:
  std::function<double(double)> cdf_;
  std::optional<DiscreteParisiMeasure> discrete_;
};

double cdf_at(const DiscreteParisiMeasure& mu, double q);

/// Exact sup-norm distance between two staircases (evaluated on the union
/// of breakpoints).
double sup_distance(const DiscreteParisiMeasure& a, const DiscreteParisiMeasure& b);
/// Dense-grid scan (10^4 points plus the staircase breakpoints and their
/// left limits) of |cdf difference|.
double sup_distance(const GeneralParisiMeasure& a, const DiscreteParisiMeasure& b);

/// Staircase within sup distance tol of mu, built by slicing the value axis
/// at multiples of tol. Already-discrete inputs are returned normalized.
DiscreteParisiMeasure discretize(const GeneralParisiMeasure& mu, double tol);

/// q_x = sup{ q : mu([0,q)) < x }, with sup of the empty set = 0.
double support_infimum(const DiscreteParisiMeasure& mu, double x);

void to_json(nlohmann::json& j, const DiscreteParisiMeasure& mu);
DiscreteParisiMeasure measure_from_json(const nlohmann::json& j);

}  // namespace rsb
