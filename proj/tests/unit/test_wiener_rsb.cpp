#include "rsb/wiener_rsb.hpp"

#include "rsb/rsb_tree.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

using namespace rsb;
using Levels = std::vector<DiscreteParisiMeasure::Level>;
using Node = HierarchicalMeasure::Node;

namespace {

// Psi = f(z_1) on grid {0, 1}
WienerFunctional of_increment(std::function<double(double)> f, double sup = INFINITY) {
  WienerFunctional w;
  w.grid = {0.0, 1.0};
  w.sup_norm = sup;
  w.eval = [f](std::size_t, std::span<const double> z, std::span<double> out) { out[0] = f(z[1]); };
  return w;
}

// two copies on a three-point grid, bounded by 2
WienerFunctional bounded2(double a = 1.0) {
  WienerFunctional w;
  w.copies = 2;
  w.grid = {0.0, 0.4, 0.8};
  w.sup_norm = 2.0 * std::abs(a);
  w.eval = [a](std::size_t, std::span<const double> z, std::span<double> out) {
    double s = 0.3 * z[0] + 0.8 * z[1] - 0.5 * z[2] + 0.4 * z[3] + 0.6 * z[4] + 0.9 * z[5];
    out[0] = a * (std::tanh(s) + std::cos(z[2] * z[5]));
  };
  return w;
}

DiscreteParisiMeasure two_level() { return DiscreteParisiMeasure(Levels{{0, 0}, {0.3, 0.35}, {0.7, 0.8}, {1, 1}}); }

}  // namespace

TEST_CASE("uniform process") {
  LevelNoise zero{1, 3, {0.0, 0.0, 0.0}};
  CHECK(u_process(zero, 0) == std::vector<double>{0.5, 0.5, 0.5});
  std::mt19937_64 g(3);
  auto noise = LevelNoise::sample(1, 100000, g);
  auto u = u_process(noise, 0);
  double mean = 0;
  for (double v : u) mean += v;
  CHECK(std::abs(mean / u.size() - 0.5) <= 0.003);

  // KS statistic of 10^4 draws, 1% critical value 1.628/sqrt(n)
  std::vector<double> s(u.begin(), u.begin() + 10000);
  std::sort(s.begin(), s.end());
  double d = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    d = std::max({d, (i + 1.0) / s.size() - s[i], s[i] - double(i) / s.size()});
  CHECK(d < 1.628 / std::sqrt(10000.0));
}

TEST_CASE("tree embedding") {
  HierarchicalMeasure two(Node::internal({0.5, 0.5}, {Node::leaf(-0.5), Node::leaf(0.5)}));
  WienerEmbedding e(two);
  CHECK(e.embed(std::vector<double>{0.3}).leaf_value == -0.5);
  CHECK(e.embed(std::vector<double>{0.7, 0.1}).leaf_value == 0.5);
  CHECK(e.thresholds(0, 0).size() == 2);
  CHECK(e.thresholds(0, 0)[1] == 1.0);

  WienerEmbedding chain(HierarchicalMeasure::single_leaf(0.2, 3));
  for (double u : {1e-9, 0.5, 1 - 1e-9}) CHECK(chain.embed(std::vector<double>{u, u, u}).leaf_value == 0.2);

  // selection frequencies against the tree's own sampler
  std::mt19937_64 g(31);
  auto t = HierarchicalMeasure::random(3, 2, 1.0, g);
  WienerEmbedding emb(t);
  const int N = 100000;
  std::vector<double> a(t.leaf_count()), b(t.leaf_count());
  for (int k = 0; k < N; ++k) {
    std::vector<double> u{uniform_open(g), uniform_open(g), uniform_open(g)};
    auto p = emb.embed(u);
    CHECK(p.nodes.size() == 4);
    a[p.nodes.back()] += 1;
    b[sample_path(t, g).nodes.back()] += 1;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    double p = b[i] / N;
    double sd = std::sqrt(2 * p * (1 - p) / N);
    CHECK(std::abs(a[i] - b[i]) / N <= 3 * sd + 1e-12);
  }
}

TEST_CASE("constant functional") {
  WienerFunctional c;
  c.grid = {0.0, 0.5};
  c.eval = [](std::size_t, std::span<const double>, std::span<double> out) { out[0] = 0.75; };
  for (auto mu : {two_level(), DiscreteParisiMeasure::step_at_zero(), DiscreteParisiMeasure::point_mass_at_one()}) {
    auto e = rsb_expectation(c, mu, NestedPlan{200, {4}}, RngStream(1));
    CHECK(e.value == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(e.std_error < 1e-14);
  }
  auto rep = girsanov_diagnostics(c, two_level(), NestedPlan{100, {3}}, RngStream(2));
  CHECK(rep.weight_mean.value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rep.max_abs_log_weight < 1e-14);
}

TEST_CASE("limit anchors for a Gaussian functional") {
  auto z = of_increment([](double v) { return v; });
  auto step = rsb_expectation(z, DiscreteParisiMeasure::step_at_zero(), NestedPlan{20000, {256}}, RngStream(4));
  CHECK(std::abs(step.value - 0.5) <= 3 * step.std_error + 2e-3);
  auto mean = rsb_expectation(z, DiscreteParisiMeasure::point_mass_at_one(), NestedPlan{20000, {16}}, RngStream(5));
  CHECK(std::abs(mean.value) <= 3 * mean.std_error);

  // terminal solver on the same anchors: omega(1) has variance 2
  auto id = [](double y) { return y; };
  auto t = terminal_expectation(id, DiscreteParisiMeasure::step_at_zero(), 20000, RngStream(6));
  CHECK(std::abs(t.value - 0.5) <= 3 * t.std_error);
  auto t0 = terminal_expectation(id, DiscreteParisiMeasure::point_mass_at_one(), 20000, RngStream(6));
  CHECK(std::abs(t0.value) <= 3 * t0.std_error);
}

TEST_CASE("terminal value function closed forms") {
  TerminalGrid grid;
  auto n = static_cast<std::size_t>(std::lround(2 * grid.half_width / grid.spacing)) + 1;
  // g(y) = y with an x=1/2 plateau on [0,1): phi_0(y) = y + x/2
  auto mu = DiscreteParisiMeasure(Levels{{0, 0}, {1, 0.5}, {1, 1}});
  auto phi = terminal_value_function([](double y) { return y; }, mu, grid);
  REQUIRE(phi.size() == n);
  std::size_t mid = n / 2;
  CHECK(phi[mid] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(phi[mid + 100] == doctest::Approx(1.25).epsilon(1e-9));
  // g(y) = a y^2 / 2, x = 1 on [0, s): log E exp(a (y+W)^2/2) with Var W = s
  double a = 0.3, s = 0.6;
  auto mu2 = DiscreteParisiMeasure(Levels{{0, 0}, {s, 1.0}, {1, 1}});
  // second plateau [s,1) carries x = 1 as well, so the whole step is one Gaussian of variance 1
  auto phi2 = terminal_value_function([a](double y) { return std::min(a * y * y / 2, 5.0); }, mu2, grid);
  double y = 0.5;
  double expect = -0.5 * std::log(1 - a) + a * y * y / (2 * (1 - a));
  CHECK(phi2[mid + 50] == doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("terminal solver against nested Monte Carlo") {
  auto g = [](double y) { return std::tanh(y) + 0.3 * std::cos(2 * y); };
  auto mu = two_level();
  auto ref = terminal_expectation(g, mu, 4000, RngStream(9));
  auto mc = rsb_expectation(terminal_functional(g, 1.3), mu, NestedPlan{4000, {16}}, RngStream(9));
  MESSAGE("terminal " << ref.value << " nested " << mc.value << " se " << mc.std_error);
  // common outer draws: compare the difference against the nested SE plus inner bias allowance
  CHECK(std::abs(ref.value - mc.value) <= 3 * combined_se(ref, mc) + 2e-3);
}

TEST_CASE("kernel equals the serial reference") {
  auto f = bounded2();
  auto mu = two_level();
  NestedPlan plan{300, {5, 4, 3}};
  NestedRequest req;
  req.record_path = true;
  req.dx = {0, 0.1, -0.05, 0};
  auto a = nested_expectation(f, mu, plan, RngStream(8), req);
  auto b = nested_expectation_reference(f, mu, plan, RngStream(8), req);
  REQUIRE(a.phi0.size() == b.phi0.size());
  CHECK(a.groups == b.groups);
  for (std::size_t i = 0; i < a.phi0.size(); ++i) {
    CHECK(a.phi0[i] == doctest::Approx(b.phi0[i]).epsilon(1e-12));
    CHECK(a.mu_derivative[i] == doctest::Approx(b.mu_derivative[i]).epsilon(1e-10));
  }
  CHECK(a.path.size() == b.path.size());
  for (std::size_t i = 0; i < a.path.size(); ++i) CHECK(a.path[i] == doctest::Approx(b.path[i]).epsilon(1e-12));

  plan.stratified = false;
  auto c = nested_expectation(f, mu, plan, RngStream(8));
  auto d = nested_expectation_reference(f, mu, plan, RngStream(8));
  for (std::size_t i = 0; i < c.phi0.size(); ++i) CHECK(c.phi0[i] == doctest::Approx(d.phi0[i]).epsilon(1e-12));
}

TEST_CASE("results do not depend on parallel execution") {
  auto f = bounded2();
  NestedPlan par{400, {6, 5}}, ser = par;
  ser.parallel = false;
  auto a = nested_expectation(f, two_level(), par, RngStream(10));
  auto b = nested_expectation(f, two_level(), ser, RngStream(10));
  CHECK(a.phi0 == b.phi0);
}

TEST_CASE("tree functional reproduces the DP") {
  std::mt19937_64 g(41);
  auto t = HierarchicalMeasure::random(2, 2, 1.0, g);
  RsbExponents x({0.0, 0.4, 1.0});
  LeafFunction psi = [](std::span<const double> m) { return std::sin(2 * m[0] - m[1]) + m[0] * m[1]; };
  double exact = phi_hat_exact(psi, t, x, 2);
  std::vector<double> grid{0.0, 0.55, 1.0};
  auto values = t.leaf_values();
  auto f = tree_functional(t, grid, 2, 1, [&](std::size_t, std::span<const std::size_t> idx, std::span<double> out) {
    out[0] = psi(std::vector<double>{values[idx[0]], values[idx[1]]});
  });
  auto mu = DiscreteParisiMeasure::from_grid(grid, x.x);
  auto e = rsb_expectation(f, mu, NestedPlan{20000, {128}}, RngStream(12));
  MESSAGE("exact " << exact << " mc " << e.value << " se " << e.std_error);
  CHECK(std::abs(e.value - exact) <= 3 * e.std_error);

  auto mc = phi_hat_mc(psi, t, x, 2, NestedPlan{20000, {128}}, RngStream(12));
  CHECK(std::abs(mc.value - exact) <= 3 * mc.std_error);
}

TEST_CASE("girsanov weights") {
  std::vector<double> phi{0.2, 0.5, -0.1};
  std::vector<double> x{0.0, 0.4, 1.0};
  auto w = girsanov_weight(phi, x);
  CHECK(w.log_weight == doctest::Approx(0.4 * 0.3 + 1.0 * (-0.6)));
  CHECK(w.weight == doctest::Approx(std::exp(w.log_weight)));
  CHECK_THROWS(girsanov_weight(phi, std::vector<double>{0.0, 1.0}));

  // single level x = 1: weight e^{Psi - log E e^Psi}
  auto f = of_increment([](double v) { return std::sin(v); }, 1.0);
  auto rep = girsanov_diagnostics(f, DiscreteParisiMeasure::step_at_zero(), NestedPlan{20000, {8}}, RngStream(3));
  CHECK(std::abs(rep.weight_mean.value - 1.0) <= 3 * rep.weight_mean.std_error);
  CHECK(rep.bound_violations == 0);
  CHECK(rep.max_abs_log_weight <= 2.0);

  auto rep2 = girsanov_diagnostics(bounded2(), two_level(), NestedPlan{20000, {8}}, RngStream(4));
  CHECK(std::abs(rep2.weight_mean.value - 1.0) <= 3 * rep2.weight_mean.std_error);
  CHECK(rep2.bound_violations == 0);
  CHECK(rep2.levels.size() == 3);
  std::ostringstream os;
  write_girsanov_csv(os, rep2);
  CHECK(os.str().rfind("level,x_l,mean_dphi,weight_mean,weight_se\n", 0) == 0);
}

TEST_CASE("derivative in Psi") {
  auto f = bounded2();
  WienerFunctional k = f;
  k.eval = [](std::size_t, std::span<const double>, std::span<double> out) { out[0] = 0.6; };
  auto d = derivative_in_psi(f, k, two_level(), NestedPlan{2000, {6}}, RngStream(1));
  CHECK(d.value == doctest::Approx(0.6).epsilon(1e-12));

  // single level x = 1: E[e^Psi dPsi] / E[e^Psi] with Psi = sin z, dPsi = z
  auto psi = of_increment([](double v) { return std::sin(v); });
  auto dpsi = of_increment([](double v) { return v; });
  auto est = derivative_in_psi(psi, dpsi, DiscreteParisiMeasure::step_at_zero(), NestedPlan{4000, {512}}, RngStream(2));
  // quadrature of the Gibbs ratio
  long double num = 0, den = 0;
  for (int i = -80000; i <= 80000; ++i) {
    double z = i * 1e-4, w = std::exp(-z * z / 2) * std::exp(std::sin(z));
    num += w * z;
    den += w;
  }
  double gibbs = double(num / den);
  CHECK(std::abs(est.value - gibbs) <= 3 * est.std_error + 2e-3);

  // against central differences on shared noise
  auto mu = two_level();
  NestedPlan plan{4000, {8}};
  auto dir = bounded2(0.5);
  auto formula = derivative_in_psi(f, dir, mu, plan, RngStream(7));
  double t = 1e-3;
  auto shifted = [&](double s) {
    WienerFunctional g = f;
    g.eval = [&f, &dir, s](std::size_t o, std::span<const double> z, std::span<double> out) {
      double a, b;
      f.eval(o, z, std::span<double>(&a, 1));
      dir.eval(o, z, std::span<double>(&b, 1));
      out[0] = a + s * b;
    };
    return nested_expectation(g, mu, plan, RngStream(7));
  };
  auto up = shifted(t), dn = shifted(-t);
  std::vector<double> fd(plan.outer);
  for (std::size_t i = 0; i < plan.outer; ++i) fd[i] = (up.phi0[i] - dn.phi0[i]) / (2 * t);
  auto fde = summarize(fd);
  CHECK(std::abs(formula.value - fde.value) <= std::max(0.02 * std::abs(formula.value), 3 * combined_se(formula, fde)));
}

TEST_CASE("derivative in mu") {
  auto f = bounded2();
  auto mu = two_level();
  NestedPlan plan{4000, {8}};
  CHECK(derivative_in_mu(f, mu, mu, plan, RngStream(1)).value == 0.0);

  WienerFunctional c = f;
  c.eval = [](std::size_t, std::span<const double>, std::span<double> out) { out[0] = 1.0; };
  auto other = DiscreteParisiMeasure(Levels{{0, 0}, {0.3, 0.5}, {0.7, 0.6}, {1, 1}});
  CHECK(std::abs(derivative_in_mu(c, mu, other, plan, RngStream(1)).value) < 1e-12);

  auto dx = measure_direction(mu, other);
  CHECK(dx == std::vector<double>{0.0, 0.5 - 0.35, 0.6 - 0.8, 0.0});
  CHECK(shifted_measure(mu, dx, 1.0).x(1) == doctest::Approx(0.5));
  CHECK_THROWS(measure_direction(mu, DiscreteParisiMeasure::step_at_zero()));

  auto formula = derivative_in_mu(f, mu, other, plan, RngStream(5));
  double t = 1e-2;
  auto up = rsb_expectation_along(f, mu, dx, t, plan, RngStream(5));
  auto dn = rsb_expectation_along(f, mu, dx, -t, plan, RngStream(5));
  // the per-outer difference is what shares noise; rebuild it
  NestedRequest req;
  req.dx = dx;
  auto a = nested_expectation(f, shifted_measure(mu, dx, t), plan, RngStream(5), req);
  auto b = nested_expectation(f, shifted_measure(mu, dx, -t), plan, RngStream(5), req);
  std::vector<double> fd(plan.outer);
  for (std::size_t i = 0; i < plan.outer; ++i) fd[i] = (a.phi0[i] - b.phi0[i]) / (2 * t);
  auto fde = summarize(fd);
  CHECK(fde.value == doctest::Approx((up.value - dn.value) / (2 * t)).epsilon(1e-9));
  MESSAGE("formula " << formula.value << " +- " << formula.std_error << " fd " << fde.value << " +- " << fde.std_error);
  CHECK(std::abs(formula.value - fde.value) <= std::max(0.02 * std::abs(formula.value), 3 * combined_se(formula, fde)));
}

TEST_CASE("bound, monotonicity and convexity on shared noise") {
  auto f = bounded2();
  NestedPlan plan{3000, {8}};
  auto lo = DiscreteParisiMeasure(Levels{{0, 0}, {0.3, 0.2}, {0.7, 0.5}, {1, 1}});
  auto hi = DiscreteParisiMeasure(Levels{{0, 0}, {0.3, 0.6}, {0.7, 0.9}, {1, 1}});
  auto dx = measure_direction(lo, hi);
  // same grouping for both, so the per-outer samples can be compared directly
  NestedRequest req;
  req.dx = dx;
  auto a = nested_expectation(f, lo, plan, RngStream(3), req);
  auto b = nested_expectation(f, hi, plan, RngStream(3), req);
  std::size_t below = 0;
  for (std::size_t i = 0; i < plan.outer; ++i) {
    below += a.phi0[i] <= b.phi0[i] + 1e-12;
    CHECK(std::abs(a.phi0[i]) <= f.sup_norm + 1e-12);
  }
  CHECK(below == plan.outer);

  WienerFunctional multi = f;
  multi.outputs = 3;
  auto f0 = bounded2(-0.7);
  multi.eval = [&](std::size_t o, std::span<const double> z, std::span<double> out) {
    double p1, p0;
    f.eval(o, z, std::span<double>(&p1, 1));
    f0.eval(o, z, std::span<double>(&p0, 1));
    out[0] = p1;
    out[1] = p0;
    out[2] = 0.25 * p1 + 0.75 * p0;
  };
  auto m = nested_expectation(multi, two_level(), plan, RngStream(4));
  for (std::size_t i = 0; i < plan.outer; ++i)
    CHECK(m.phi0[i * 3 + 2] <= 0.25 * m.phi0[i * 3] + 0.75 * m.phi0[i * 3 + 1] + 1e-12);
}

TEST_CASE("guards") {
  auto big = of_increment([](double v) { return 1e4 * v; });
  CHECK_THROWS_AS(rsb_expectation(big, two_level(), NestedPlan{10, {2}}, RngStream(1)), std::domain_error);
  WienerFunctional bad;
  bad.grid = {0.0, 0.5, 0.4};
  bad.eval = [](std::size_t, std::span<const double>, std::span<double> out) { out[0] = 0; };
  CHECK_THROWS(rsb_expectation(bad, two_level(), NestedPlan{10, {2}}, RngStream(1)));
  CHECK_THROWS(terminal_value_function([](double y) { return y; }, two_level(), TerminalGrid{10.0, 0.8}));
}
