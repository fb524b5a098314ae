#include "rsb/parisi_measure.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

using namespace rsb;
using Levels = std::vector<DiscreteParisiMeasure::Level>;

namespace {

DiscreteParisiMeasure three_level() { return DiscreteParisiMeasure(Levels{{0, 0}, {0.3, 0.4}, {1, 1}}); }

// staircase value from the defining indicator sum, written out directly
double indicator_cdf(const DiscreteParisiMeasure& mu, double q) {
  if (q == 1.0) return 1.0;
  double v = 0;
  for (std::size_t l = 1; l < mu.levels().size(); ++l)
    if (q >= mu.q(l - 1) && q < mu.q(l)) v += mu.x(l);
  return v;
}

double grid_scan(const GeneralParisiMeasure& a, const DiscreteParisiMeasure& b, int n = 100000) {
  double w = 0;
  for (int i = 0; i <= n; ++i) {
    double q = double(i) / n;
    w = std::max(w, std::abs(a.cdf(q) - cdf_at(b, q)));
  }
  return w;
}

DiscreteParisiMeasure random_staircase(std::mt19937_64& g, int K) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> q, x;
  for (int i = 0; i < K; ++i) q.push_back(u(g)), x.push_back(u(g));
  std::sort(q.begin(), q.end());
  std::sort(x.begin(), x.end());
  Levels lv{{0, 0}};
  for (int i = 0; i < K; ++i) lv.emplace_back(q[i], x[i]);
  lv.emplace_back(1, 1);
  return DiscreteParisiMeasure(lv);
}

}  // namespace

TEST_CASE("staircase values") {
  auto mu = three_level();
  CHECK(cdf_at(mu, 0.1) == 0.4);
  CHECK(cdf_at(mu, 0.0) == 0.4);
  CHECK(cdf_at(mu, 0.3) == 1.0);
  CHECK(cdf_at(mu, 1.0) == 1.0);
  CHECK(cdf_at(DiscreteParisiMeasure::step_at_zero(), 0.5) == 1.0);
  CHECK(cdf_at(DiscreteParisiMeasure::point_mass_at_one(), 0.999) == 0.0);
  CHECK(cdf_at(DiscreteParisiMeasure::point_mass_at_one(), 1.0) == 1.0);
  CHECK_THROWS_AS(cdf_at(mu, 1.2), std::domain_error);
  CHECK_THROWS_AS(cdf_at(mu, -0.1), std::domain_error);
}

TEST_CASE("staircase agrees with the indicator sum and is monotone") {
  std::mt19937_64 g(3);
  for (int k = 0; k < 50; ++k) {
    auto mu = random_staircase(g, 1 + k % 5);
    double prev = 0;
    for (std::size_t l = 0; l < mu.levels().size(); ++l)
      for (double d : {-1e-9, 0.0, 1e-9}) {
        double q = std::clamp(mu.q(l) + d, 0.0, 1.0);
        CHECK(cdf_at(mu, q) == indicator_cdf(mu, q));
      }
    for (int i = 0; i <= 1000; ++i) {
      double v = cdf_at(mu, i / 1000.0);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("constructor guards") {
  CHECK_THROWS(DiscreteParisiMeasure(Levels{{0, 0}}));
  CHECK_THROWS(DiscreteParisiMeasure(Levels{{0, 0}, {0.5, 0.6}, {0.4, 0.7}, {1, 1}}));
  CHECK_THROWS(DiscreteParisiMeasure(Levels{{0, 0}, {0.5, 0.6}, {0.7, 0.5}, {1, 1}}));
  CHECK_THROWS(DiscreteParisiMeasure(Levels{{0, 0}, {0.5, 0.6}, {1, 0.9}}));
  CHECK_THROWS(DiscreteParisiMeasure(Levels{{0, 0.1}, {1, 1}}));
  CHECK_THROWS(GeneralParisiMeasure::from_cdf([](double q) { return 1 - q; }));
  CHECK_THROWS(GeneralParisiMeasure::from_cdf([](double q) { return 0.5 * q; }));
}

TEST_CASE("sup distance") {
  auto a = three_level();
  CHECK(sup_distance(a, a) == 0.0);
  auto b = DiscreteParisiMeasure(Levels{{0, 0}, {0.3, 0.45}, {1, 1}});
  CHECK(sup_distance(a, b) == doctest::Approx(0.05));
  auto uni = GeneralParisiMeasure::from_cdf([](double q) { return q; });
  auto mid = DiscreteParisiMeasure(Levels{{0, 0}, {0.25, 0.125}, {0.5, 0.375}, {0.75, 0.625}, {1, 0.875}, {1, 1}});
  CHECK(sup_distance(uni, mid) == doctest::Approx(0.125).epsilon(1e-9));
  CHECK(grid_scan(uni, mid) == doctest::Approx(0.125).epsilon(1e-4));
}

TEST_CASE("sup distance is a metric on staircases") {
  std::mt19937_64 g(8);
  for (int k = 0; k < 100; ++k) {
    auto a = random_staircase(g, 3), b = random_staircase(g, 2), c = random_staircase(g, 4);
    CHECK(sup_distance(a, b) == sup_distance(b, a));
    CHECK(sup_distance(a, c) <= sup_distance(a, b) + sup_distance(b, c) + 1e-15);
    // exact value against a dense scan including left limits
    double scan = 0;
    for (int i = 0; i <= 20000; ++i) scan = std::max(scan, std::abs(cdf_at(a, i / 20000.0) - cdf_at(b, i / 20000.0)));
    CHECK(sup_distance(a, b) >= scan - 1e-15);
  }
}

TEST_CASE("discretize") {
  auto uni = GeneralParisiMeasure::from_cdf([](double q) { return q; });
  auto d = discretize(uni, 0.25);
  CHECK(grid_scan(uni, d) <= 0.25 + 1e-12);
  auto sq = GeneralParisiMeasure::from_cdf([](double q) { return q * q; });
  auto d2 = discretize(sq, std::ldexp(1.0, -6));
  CHECK(grid_scan(sq, d2) <= std::ldexp(1.0, -6) + 1e-12);
  CHECK(sup_distance(sq, d2) <= std::ldexp(1.0, -6) + 1e-12);

  auto mu = three_level();
  CHECK(discretize(GeneralParisiMeasure::from_discrete(mu), 0.01) == mu);
  CHECK_THROWS(discretize(uni, 0.0));
}

TEST_CASE("discretize random monotone cdfs") {
  std::mt19937_64 g(21);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 100; ++k) {
    // mixture of a power law, a smooth ramp and an atom
    double p = 0.2 + 4 * u(g), w1 = u(g), w2 = u(g) * (1 - w1), atom = u(g), c = 0.1 + 0.8 * u(g);
    auto cdf = [=](double q) {
      if (q >= 1.0) return 1.0;
      return w1 * std::pow(q, p) + w2 * (q >= atom ? 1.0 : 0.0) + (1 - w1 - w2) * std::min(1.0, q / c);
    };
    auto mu = GeneralParisiMeasure::from_cdf(cdf);
    double tol = std::ldexp(1.0, -(2 + k % 6));
    auto d = discretize(mu, tol);
    CHECK(sup_distance(mu, d) <= tol + 1e-12);
    CHECK(grid_scan(mu, d, 20000) <= tol + 1e-12);
  }
}

TEST_CASE("support infimum") {
  auto mu = three_level();
  CHECK(support_infimum(mu, 0.5) == 0.3);
  CHECK(support_infimum(mu, 0.3) == 0.0);
  CHECK(support_infimum(mu, 1.0) == 0.3);
  for (double x : {0.01, 0.5, 1.0}) CHECK(support_infimum(DiscreteParisiMeasure::step_at_zero(), x) == 0.0);
  CHECK(support_infimum(DiscreteParisiMeasure::point_mass_at_one(), 0.5) == 1.0);
  // direct form of the definition on a fine grid
  std::mt19937_64 g(2);
  for (int k = 0; k < 30; ++k) {
    auto m = random_staircase(g, 3);
    for (double x : {0.1, 0.37, 0.8, 1.0}) {
      double sup = 0;
      for (int i = 0; i <= 100000; ++i) {
        double q = i / 100000.0;
        double left = q == 0 ? 0.0 : cdf_at(m, std::nextafter(q, 0.0));
        if (left < x) sup = q;
      }
      CHECK(support_infimum(m, x) == doctest::Approx(sup).epsilon(2e-5));
    }
  }
  CHECK_THROWS(support_infimum(mu, 0.0));
}

TEST_CASE("normalize and refine") {
  auto mu = DiscreteParisiMeasure(Levels{{0, 0}, {0.2, 0.3}, {0.2, 0.5}, {0.5, 0.3 + 0.2}, {0.7, 0.5}, {1, 1}});
  auto n = mu.normalized();
  CHECK(n == DiscreteParisiMeasure(Levels{{0, 0}, {0.2, 0.3}, {0.7, 0.5}, {1, 1}}));
  CHECK(sup_distance(mu, n) == 0.0);
  auto r = three_level().refined(std::vector<double>{0.1, 0.3, 0.6});
  CHECK(r.plateau_count() == 4);
  CHECK(sup_distance(r, three_level()) == 0.0);
  CHECK(r.normalized() == three_level());
  CHECK(DiscreteParisiMeasure::point_mass_at_one().normalized() == DiscreteParisiMeasure::point_mass_at_one());
}

TEST_CASE("json round trip is exact") {
  std::mt19937_64 g(1);
  for (int k = 0; k < 20; ++k) {
    auto mu = random_staircase(g, 4);
    nlohmann::json j = mu;
    auto back = measure_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back == mu);
  }
  CHECK(nlohmann::json(three_level()).dump() == R"({"levels":[[0.0,0.0],[0.3,0.4],[1.0,1.0]]})");
}
