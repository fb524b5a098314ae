#include "rsb/wiener_rsb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsb {

namespace {

// Kernel weights of N(0, sigma^2) restricted to the lattice h*Z.
std::vector<double> lattice_gaussian(double sigma, double h) {
  const auto m = static_cast<std::ptrdiff_t>(std::ceil(8.0 * sigma / h));
  std::vector<double> w(2 * m + 1);
  double total = 0.0;
  for (std::ptrdiff_t k = -m; k <= m; ++k) {
    const double s = static_cast<double>(k) * h / sigma;
    total += (w[k + m] = std::exp(-0.5 * s * s));
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace

std::vector<double> terminal_value_function(const std::function<double(double)>& g, const DiscreteParisiMeasure& mu,
                                            const TerminalGrid& grid) {
  if (!(grid.spacing > 0.0 && grid.half_width > grid.spacing))
    throw std::invalid_argument("terminal solver: bad spatial grid");
  const auto P = static_cast<std::ptrdiff_t>(std::llround(2.0 * grid.half_width / grid.spacing)) + 1;
  const double h = grid.spacing;
  std::vector<double> v(P), next(P), e(P);
  for (std::ptrdiff_t i = 0; i < P; ++i) v[i] = g(-grid.half_width + static_cast<double>(i) * h);

  const auto& lv = mu.levels();
  for (std::size_t l = lv.size() - 1; l >= 1; --l) {
    const double width = lv[l].first - lv[l - 1].first;
    if (width <= 0.0) continue;
    const double sigma = std::sqrt(width);
    if (sigma < h)
      throw std::invalid_argument("terminal solver: plateau narrower than the spatial grid resolves; reduce spacing");
    const double x = lv[l].second;
    const auto w = lattice_gaussian(sigma, h);
    const auto m = static_cast<std::ptrdiff_t>(w.size() / 2);
    const double vmax = *std::max_element(v.begin(), v.end());
    if (x > 0.0)
      for (std::ptrdiff_t i = 0; i < P; ++i) e[i] = std::exp(x * (v[i] - vmax));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < P; ++i) {
      double acc = 0.0;
      const auto& src = x > 0.0 ? e : v;
      for (std::ptrdiff_t k = -m; k <= m; ++k) acc += w[k + m] * src[std::clamp<std::ptrdiff_t>(i + k, 0, P - 1)];
      next[i] = x > 0.0 ? vmax + std::log(acc) / x : acc;
    }
    v.swap(next);
  }
  return v;
}

EstimateWithError terminal_expectation(const std::function<double(double)>& g, const DiscreteParisiMeasure& mu,
                                       std::size_t outer, const RngStream& rng, const TerminalGrid& grid) {
  if (outer == 0) throw std::invalid_argument("terminal solver: outer must be positive");
  const auto v = terminal_value_function(g, mu, grid);
  const double h = grid.spacing;
  const auto P = static_cast<std::ptrdiff_t>(v.size());
  std::vector<double> samples(outer);
  for (std::size_t i = 0; i < outer; ++i) {
    auto gen = rng.substream(i).engine();
    const double y = normal_quantile(uniform_open(gen));
    const double s = (y + grid.half_width) / h;
    const auto i0 = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(std::floor(s)), 0, P - 2);
    const double f = std::clamp(s - static_cast<double>(i0), 0.0, 1.0);
    samples[i] = (1.0 - f) * v[i0] + f * v[i0 + 1];
  }
  return summarize(samples);
}

WienerFunctional terminal_functional(std::function<double(double)> g, double sup_norm) {
  WienerFunctional f;
  f.copies = 1;
  f.grid = {0.0, 1.0};
  f.kind = NoiseKind::normal;
  f.sup_norm = sup_norm;
  f.eval = [g = std::move(g)](std::size_t, std::span<const double> noise, std::span<double> out) {
    out[0] = g(noise[0] + noise[1]);
  };
  return f;
}

}  // namespace rsb
