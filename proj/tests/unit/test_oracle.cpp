#include "rsb/oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <functional>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

using namespace rsb;

namespace {

// recursive sum over spins, separate from both library code paths
long double brute(const RegularGraph& g, const std::vector<int>& J, double beta) {
  std::vector<int> s(g.n_vertices);
  std::function<long double(std::size_t)> rec = [&](std::size_t i) -> long double {
    if (i == g.n_vertices) {
      long double e = 0;
      for (std::size_t k = 0; k < g.edges.size(); ++k) e += J[k] * s[g.edges[k].first] * s[g.edges[k].second];
      return std::exp((long double)beta * e);
    }
    s[i] = 1;
    long double a = rec(i + 1);
    s[i] = -1;
    return a + rec(i + 1);
  };
  return std::log(rec(0)) / g.n_vertices;
}

std::vector<int> random_couplings(std::size_t m, std::mt19937_64& gen) {
  std::vector<int> J(m);
  for (auto& v : J) v = (gen() >> 63) ? 1 : -1;
  return J;
}

}  // namespace

TEST_CASE("random regular graphs") {
  std::mt19937_64 gen(1);
  auto k4 = sample_rrg(4, 3, gen);
  std::set<std::pair<int, int>> e(k4.edges.begin(), k4.edges.end());
  CHECK(e == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  auto cyc = sample_rrg(6, 2, gen);
  CHECK(cyc.degrees() == std::vector<int>(6, 2));
  CHECK(cyc.is_simple());
  for (int k = 0; k < 20; ++k) {
    auto g = sample_rrg(16, 3, gen);
    CHECK(g.degrees() == std::vector<int>(16, 3));
    CHECK(g.is_simple());
    CHECK(g.edges.size() == 24);
  }
  CHECK_THROWS(sample_rrg(5, 3, gen));
  CHECK_THROWS(sample_rrg(3, 3, gen));
  RegularGraph multi{3, {{0, 1}, {0, 1}}};
  CHECK_FALSE(multi.is_simple());
}

TEST_CASE("log partition anchors") {
  std::mt19937_64 gen(2);
  auto g = sample_rrg(10, 3, gen);
  auto J = random_couplings(g.edges.size(), gen);
  CHECK(exact_log_partition(g, J, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  RegularGraph edge{2, {{0, 1}}};
  std::vector<int> plus{1};
  for (double b : {0.3, 1.0, 2.5})
    CHECK(exact_log_partition(edge, plus, b) == doctest::Approx(0.5 * std::log(4 * std::cosh(b))).epsilon(1e-14));
  auto k4 = sample_rrg(4, 3, gen);
  std::vector<int> ones(6, 1);
  double v = exact_log_partition(k4, ones, 1.0);
  CHECK(std::abs(v - exact_log_partition_reference(k4, ones, 1.0)) <= 1e-12);
  CHECK(std::abs(v - (double)brute(k4, ones, 1.0)) <= 1e-12);
  // K4 ferromagnet in closed form: energies 6 (x2), 0 (x8), -2 (x6)
  CHECK(v == doctest::Approx(std::log(2 * std::exp(6.0) + 8 + 6 * std::exp(-2.0)) / 4).epsilon(1e-14));
}

TEST_CASE("gray code enumeration against direct sums") {
  std::mt19937_64 gen(3);
  for (int k = 0; k < 30; ++k) {
    std::size_t n = 4 + 2 * (k % 5);
    int c = 2 + k % 2;
    auto g = sample_rrg(n, c, gen);
    auto J = random_couplings(g.edges.size(), gen);
    double beta = 0.1 + 0.1 * (k % 20);
    double a = exact_log_partition(g, J, beta);
    CHECK(std::abs(a - exact_log_partition_reference(g, J, beta)) <= 1e-12);
    CHECK(std::abs(a - (double)brute(g, J, beta)) <= 1e-12);
    CHECK(a >= std::log(2.0) - 1e-12);
  }
  // large beta stays finite
  auto g = sample_rrg(12, 3, gen);
  auto J = random_couplings(g.edges.size(), gen);
  CHECK(std::isfinite(exact_log_partition(g, J, 200.0)));
  CHECK(std::abs(exact_log_partition(g, J, 200.0) - exact_log_partition_reference(g, J, 200.0)) <= 1e-12);
}

TEST_CASE("guards") {
  RegularGraph big{25, {}};
  CHECK_THROWS(exact_log_partition(big, std::vector<int>{}, 1.0));
  RegularGraph edge{2, {{0, 1}}};
  CHECK_THROWS(exact_log_partition(edge, std::vector<int>{}, 1.0));
  CHECK_THROWS(exact_log_partition(edge, std::vector<int>{2}, 1.0));
  CHECK_THROWS(exact_log_partition(edge, std::vector<int>{1}, -1.0));
}

TEST_CASE("quenched estimates") {
  auto zero = quenched_estimate(12, 3, 0.0, 10, RngStream(1));
  CHECK(zero.value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(zero.std_error < 1e-15);

  auto a = quenched_estimate(16, 3, 0.5, 20, RngStream(9));
  auto b = quenched_estimate(16, 3, 0.5, 20, RngStream(9), false);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
  CHECK(std::isfinite(a.value));

  // SE ~ 1/sqrt(n): check ratios across 25, 100, 400 samples
  auto s25 = quenched_estimate(10, 3, 1.0, 25, RngStream(4));
  auto s100 = quenched_estimate(10, 3, 1.0, 100, RngStream(5));
  auto s400 = quenched_estimate(10, 3, 1.0, 400, RngStream(6));
  MESSAGE(s25.std_error << " " << s100.std_error << " " << s400.std_error);
  CHECK(s25.std_error / s100.std_error == doctest::Approx(2.0).epsilon(0.35));
  CHECK(s100.std_error / s400.std_error == doctest::Approx(2.0).epsilon(0.35));
}

TEST_CASE("graph json") {
  std::mt19937_64 gen(5);
  auto g = sample_rrg(8, 3, gen);
  nlohmann::json j = g;
  CHECK(j.at("n") == 8);
  auto back = graph_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.n_vertices == g.n_vertices);
  CHECK(back.edges == g.edges);
}
