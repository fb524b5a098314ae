#include "rsb/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsb {

WienerFunctional random_functional(std::mt19937_64& gen, std::size_t copies, std::span<const double> grid) {
  std::normal_distribution<double> coef(0.0, 0.7);
  std::uniform_real_distribution<double> amp(0.5, 2.0);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  const std::size_t width = copies * grid.size();
  std::vector<double> a(width), c(width);
  for (auto& v : a) v = coef(gen);
  for (auto& v : c) v = coef(gen);
  const double A = amp(gen), B = amp(gen) * (gen() >> 63 ? -1.0 : 1.0), b = shift(gen);

  WienerFunctional f;
  f.copies = copies;
  f.grid.assign(grid.begin(), grid.end());
  f.kind = NoiseKind::normal;
  f.sup_norm = std::abs(A) + std::abs(B);
  f.eval = [a, c, A, B, b](std::size_t, std::span<const double> z, std::span<double> out) {
    double s1 = b, s2 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      s1 += a[i] * z[i];
      s2 += c[i] * z[i];
    }
    out[0] = A * std::tanh(s1) + B * std::cos(s2);
  };
  return f;
}

std::vector<double> random_grid(std::mt19937_64& gen, std::size_t T) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  while (true) {
    std::vector<double> g{0.0};
    for (std::size_t t = 0; t < T; ++t) g.push_back(u(gen));
    std::sort(g.begin(), g.end());
    bool ok = true;
    for (std::size_t t = 1; t < g.size(); ++t) ok = ok && g[t] - g[t - 1] > 0.02;
    if (ok) return g;
  }
}

DiscreteParisiMeasure random_measure(std::mt19937_64& gen, std::size_t K, double gap) {
  std::uniform_real_distribution<double> uq(0.05, 0.95), ux(gap, 1.0 - gap);
  auto spaced = [&](std::uniform_real_distribution<double>& d, double min_gap) {
    while (true) {
      std::vector<double> v(K);
      for (auto& e : v) e = d(gen);
      std::sort(v.begin(), v.end());
      bool ok = true;
      for (std::size_t i = 1; i < K; ++i) ok = ok && v[i] - v[i - 1] >= min_gap;
      if (ok) return v;
    }
  };
  const auto q = spaced(uq, 0.02);
  const auto x = spaced(ux, gap);
  std::vector<DiscreteParisiMeasure::Level> levels{{0.0, 0.0}};
  for (std::size_t l = 0; l < K; ++l) levels.emplace_back(q[l], x[l]);
  levels.emplace_back(1.0, 1.0);
  return DiscreteParisiMeasure(std::move(levels));
}

namespace {

struct Instance {
  WienerFunctional psi;
  DiscreteParisiMeasure mu;
};

Instance make_instance(std::mt19937_64& gen, std::size_t K, bool full_grid) {
  const std::size_t copies = 1 + gen() % 2;
  auto grid = random_grid(gen, 1 + gen() % 3);
  if (full_grid) grid.back() = 1.0;
  auto psi = random_functional(gen, copies, grid);
  return {std::move(psi), random_measure(gen, K)};
}

// Single-output functional combining several others linearly.
WienerFunctional combine(const WienerFunctional& base, std::vector<const WienerFunctional*> parts,
                         std::vector<std::vector<double>> coefficients) {
  WienerFunctional f = base;
  f.outputs = coefficients.size();
  f.eval = [parts, coefficients](std::size_t outer, std::span<const double> z, std::span<double> out) {
    double tmp[8];
    for (std::size_t p = 0; p < parts.size(); ++p) parts[p]->eval(outer, z, std::span<double>(tmp + p, 1));
    for (std::size_t k = 0; k < coefficients.size(); ++k) {
      out[k] = 0.0;
      for (std::size_t p = 0; p < parts.size(); ++p) out[k] += coefficients[k][p] * tmp[p];
    }
  };
  return f;
}

nlohmann::json est_json(const EstimateWithError& e) { return {{"value", e.value}, {"se", e.std_error}}; }

// per-outer (a - b) / scale
EstimateWithError difference(std::span<const double> a, std::size_t ka, std::span<const double> b, std::size_t kb,
                             std::size_t stride_a, std::size_t stride_b, std::size_t outer, double scale) {
  std::vector<double> d(outer);
  for (std::size_t i = 0; i < outer; ++i) d[i] = (a[i * stride_a + ka] - b[i * stride_b + kb]) / scale;
  return summarize(d);
}

}  // namespace

CheckResult martingale_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan,
                             std::vector<GirsanovReport>* reports) {
  CheckResult r{"martingale", true, nlohmann::json::array()};
  for (std::size_t k = 0; k < instances; ++k) {
    auto gen = rng.substream(k).engine();
    const auto inst = make_instance(gen, 2, true);
    const auto rep = girsanov_diagnostics(inst.psi, inst.mu, plan, rng.substream(1000 + k));
    if (reports) reports->push_back(rep);
    const double z = (rep.weight_mean.value - 1.0) / rep.weight_mean.std_error;
    const bool ok = std::abs(z) <= 3.0 && rep.bound_violations == 0;
    r.passed = r.passed && ok;
    r.details.push_back({{"weight_mean", est_json(rep.weight_mean)},
                         {"z", z},
                         {"max_abs_log_weight", rep.max_abs_log_weight},
                         {"two_sup_psi", 2.0 * rep.sup_psi},
                         {"bound_violations", rep.bound_violations},
                         {"passed", ok}});
  }
  return r;
}

CheckResult bound_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan) {
  CheckResult r{"bound", true, nlohmann::json::array()};
  std::size_t violations = 0;
  for (std::size_t k = 0; k < instances; ++k) {
    auto gen = rng.substream(k).engine();
    const auto inst = make_instance(gen, 1 + k % 3, false);
    const auto phi = rsb_expectation(inst.psi, inst.mu, plan, rng.substream(1000 + k));
    const bool ok = std::abs(phi.value) <= inst.psi.sup_norm + 3.0 * phi.std_error;
    violations += ok ? 0 : 1;
    r.details.push_back({{"phi", est_json(phi)}, {"sup_psi", inst.psi.sup_norm}, {"passed", ok}});
  }
  r.passed = violations == 0;
  return r;
}

CheckResult monotone_suite(const RngStream& rng, std::size_t pairs, const NestedPlan& plan) {
  CheckResult r{"monotone", true, nlohmann::json::array()};
  for (std::size_t k = 0; k < pairs; ++k) {
    auto gen = rng.substream(k).engine();
    const std::size_t K = 1 + k % 3;
    auto inst = make_instance(gen, K, gen() % 2 == 0);
    const auto other = random_measure(gen, K);
    auto upper = inst.mu.levels();
    for (std::size_t l = 1; l + 1 < upper.size(); ++l) upper[l].second = std::max(upper[l].second, other.x(l));
    const DiscreteParisiMeasure mu2(upper);
    const auto dx = measure_direction(inst.mu, mu2);
    const auto lo = rsb_expectation_along(inst.psi, inst.mu, dx, 0.0, plan, rng.substream(1000 + k));
    const auto hi = rsb_expectation_along(inst.psi, inst.mu, dx, 1.0, plan, rng.substream(1000 + k));
    const bool ok = lo.value <= hi.value + 3.0 * combined_se(lo, hi);
    r.passed = r.passed && ok;
    r.details.push_back({{"phi_mu1", est_json(lo)}, {"phi_mu2", est_json(hi)}, {"passed", ok}});
  }
  return r;
}

CheckResult convexity_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan) {
  CheckResult r{"convexity", true, nlohmann::json::array()};
  const double ts[] = {0.25, 0.5, 0.75};
  for (std::size_t k = 0; k < instances; ++k) {
    auto gen = rng.substream(k).engine();
    auto inst = make_instance(gen, 1 + k % 2, false);
    const auto psi1 = random_functional(gen, inst.psi.copies, inst.psi.grid);
    const auto mixed = combine(inst.psi, {&inst.psi, &psi1},
                               {{1.0, 0.0}, {0.0, 1.0}, {0.75, 0.25}, {0.5, 0.5}, {0.25, 0.75}});
    const auto out = nested_expectation(mixed, inst.mu, plan, rng.substream(1000 + k));
    const auto p0 = out.estimate(out.phi0, 0);
    const auto p1 = out.estimate(out.phi0, 1);
    for (std::size_t j = 0; j < 3; ++j) {
      const double t = ts[j];
      const auto pm = out.estimate(out.phi0, 2 + j);
      const double rhs = t * p1.value + (1 - t) * p0.value;
      const double se = std::sqrt(pm.std_error * pm.std_error + std::pow(t * p1.std_error, 2) +
                                  std::pow((1 - t) * p0.std_error, 2));
      const bool ok = pm.value <= rhs + 3.0 * se;
      r.passed = r.passed && ok;
      r.details.push_back({{"t", t}, {"phi_mix", est_json(pm)}, {"chord", rhs}, {"se", se}, {"passed", ok}});
    }
  }
  return r;
}

CheckResult derivative_psi_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan, double t) {
  CheckResult r{"derivative_in_psi", true, nlohmann::json::array()};
  for (std::size_t k = 0; k < instances; ++k) {
    auto gen = rng.substream(k).engine();
    auto inst = make_instance(gen, 1 + k % 2, false);
    const auto delta = random_functional(gen, inst.psi.copies, inst.psi.grid);
    const auto stream = rng.substream(1000 + k);
    const auto formula = derivative_in_psi(inst.psi, delta, inst.mu, plan, stream);
    const auto moved = combine(inst.psi, {&inst.psi, &delta},
                               {{1.0, t}, {1.0, -t}, {1.0, t / 2}, {1.0, -t / 2}});
    const auto out = nested_expectation(moved, inst.mu, plan, stream);
    const auto fd = difference(out.phi0, 0, out.phi0, 1, 4, 4, out.outer, 2 * t);
    const auto fd_half = difference(out.phi0, 2, out.phi0, 3, 4, 4, out.outer, t);
    const double richardson = (4.0 * fd_half.value - fd.value) / 3.0;
    const double se = combined_se(formula, fd);
    const double gap = std::abs(formula.value - fd.value);
    const bool ok = gap <= std::max(0.02 * std::abs(formula.value), 3.0 * se);
    r.passed = r.passed && ok;
    r.details.push_back({{"formula", est_json(formula)},
                         {"finite_difference", est_json(fd)},
                         {"finite_difference_half_step", est_json(fd_half)},
                         {"richardson", richardson},
                         {"gap", gap},
                         {"combined_se", se},
                         {"passed", ok}});
  }
  return r;
}

CheckResult derivative_mu_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan, double t) {
  CheckResult r{"derivative_in_mu", true, nlohmann::json::array()};
  for (std::size_t k = 0; k < instances; ++k) {
    auto gen = rng.substream(k).engine();
    const std::size_t K = 1 + k % 2;
    auto inst = make_instance(gen, K, gen() % 2 == 0);
    const auto target = random_measure(gen, K);
    auto moved = inst.mu.levels();
    for (std::size_t l = 1; l + 1 < moved.size(); ++l) moved[l].second = target.x(l);
    const DiscreteParisiMeasure mu_prime(moved);
    const auto dx = measure_direction(inst.mu, mu_prime);
    const auto stream = rng.substream(1000 + k);
    const auto formula = derivative_in_mu(inst.psi, inst.mu, mu_prime, plan, stream);

    NestedRequest req;
    req.dx = dx;
    auto run = [&](double s) { return nested_expectation(inst.psi, shifted_measure(inst.mu, dx, s), plan, stream, req); };
    const auto plus = run(t), minus = run(-t), plus_h = run(t / 2), minus_h = run(-t / 2);
    const auto fd = difference(plus.phi0, 0, minus.phi0, 0, 1, 1, plus.outer, 2 * t);
    const auto fd_half = difference(plus_h.phi0, 0, minus_h.phi0, 0, 1, 1, plus.outer, t);
    const double richardson = (4.0 * fd_half.value - fd.value) / 3.0;
    const double se = combined_se(formula, fd);
    const double gap = std::abs(formula.value - fd.value);
    const bool ok = gap <= std::max(0.02 * std::abs(formula.value), 3.0 * se);
    r.passed = r.passed && ok;
    r.details.push_back({{"formula", est_json(formula)},
                         {"finite_difference", est_json(fd)},
                         {"finite_difference_half_step", est_json(fd_half)},
                         {"richardson", richardson},
                         {"gap", gap},
                         {"combined_se", se},
                         {"passed", ok}});
  }
  return r;
}

}  // namespace rsb
