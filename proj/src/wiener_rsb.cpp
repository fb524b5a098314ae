#include "rsb/wiener_rsb.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>

namespace rsb {

LevelNoise LevelNoise::sample(std::size_t copies, std::size_t levels, std::mt19937_64& gen) {
  LevelNoise out{copies, levels, std::vector<double>(copies * levels)};
  for (auto& z : out.z) z = normal_quantile(uniform_open(gen));
  return out;
}

std::vector<double> u_process(const LevelNoise& noise, std::size_t copy) {
  if (copy >= noise.copies) throw std::out_of_range("u_process: copy index out of range");
  std::vector<double> u(noise.levels);
  for (std::size_t l = 0; l < noise.levels; ++l) u[l] = normal_cdf(noise.at(copy, l));
  return u;
}

// ---------------------------------------------------------------------------

WienerEmbedding::WienerEmbedding(const HierarchicalMeasure& tree) : tree_(tree), cum_(tree.depth()) {
  for (std::size_t l = 0; l < tree.depth(); ++l) {
    cum_[l].resize(tree.level_size(l + 1));
    for (std::size_t v = 0; v < tree.level_size(l); ++v) {
      const std::size_t first = tree.first_child(l, v);
      const std::size_t count = tree.child_count(l, v);
      double acc = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        acc += tree.weight(l + 1, first + k);
        cum_[l][first + k] = acc;
      }
      cum_[l][first + count - 1] = 1.0;  // absorb rounding
    }
  }
}

std::span<const double> WienerEmbedding::thresholds(std::size_t level, std::size_t node) const {
  return {cum_[level].data() + tree_.first_child(level, node), tree_.child_count(level, node)};
}

std::size_t WienerEmbedding::leaf_index(std::span<const double> uniforms) const {
  if (uniforms.size() < tree_.depth()) throw std::invalid_argument("embed_tree: need u_0..u_K");
  std::size_t node = 0;
  for (std::size_t l = 0; l < tree_.depth(); ++l) {
    const auto th = thresholds(l, node);
    const auto k = static_cast<std::size_t>(std::upper_bound(th.begin(), th.end(), uniforms[l]) - th.begin());
    node = tree_.first_child(l, node) + std::min(k, th.size() - 1);
  }
  return node;
}

TreePath WienerEmbedding::embed(std::span<const double> uniforms) const {
  if (uniforms.size() < tree_.depth()) throw std::invalid_argument("embed_tree: need u_0..u_K");
  TreePath path;
  std::size_t node = 0;
  path.nodes.push_back(node);
  for (std::size_t l = 0; l < tree_.depth(); ++l) {
    const auto th = thresholds(l, node);
    const auto k = static_cast<std::size_t>(std::upper_bound(th.begin(), th.end(), uniforms[l]) - th.begin());
    node = tree_.first_child(l, node) + std::min(k, th.size() - 1);
    path.nodes.push_back(node);
  }
  path.leaf_value = tree_.leaf_values()[node];
  return path;
}

// ---------------------------------------------------------------------------

void WienerFunctional::validate() const {
  if (copies == 0) throw std::invalid_argument("wiener functional: copies must be positive");
  if (outputs == 0) throw std::invalid_argument("wiener functional: outputs must be positive");
  if (!eval) throw std::invalid_argument("wiener functional: no evaluation callback");
  if (grid.empty() || grid.front() != 0.0) throw std::invalid_argument("wiener functional: grid must start at 0");
  for (std::size_t t = 1; t < grid.size(); ++t)
    if (!(grid[t] > grid[t - 1]) || grid[t] > 1.0)
      throw std::invalid_argument("wiener functional: grid must be strictly increasing within [0,1]");
}

EstimateWithError NestedOutput::estimate(std::span<const double> per_outer, std::size_t k) const {
  std::vector<double> v(outer);
  for (std::size_t i = 0; i < outer; ++i) v[i] = per_outer[i * outputs + k];
  return summarize(v);
}

EstimateWithError rsb_expectation(const WienerFunctional& psi, const DiscreteParisiMeasure& mu, const NestedPlan& plan,
                                  const RngStream& rng) {
  const auto out = nested_expectation(psi, mu, plan, rng);
  return out.estimate(out.phi0, 0);
}

GirsanovWeight girsanov_weight(std::span<const double> phi_levels, std::span<const double> x) {
  if (phi_levels.size() != x.size()) throw std::invalid_argument("girsanov_weight: need one x per phi level");
  double lw = 0.0;
  for (std::size_t l = 1; l < phi_levels.size(); ++l) {
    if (!std::isfinite(phi_levels[l]) || !std::isfinite(phi_levels[l - 1]))
      throw std::domain_error("girsanov_weight: non-finite phi");
    lw += x[l] * (phi_levels[l] - phi_levels[l - 1]);
  }
  return {std::exp(lw), lw};
}

GirsanovReport girsanov_diagnostics(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                                    const NestedPlan& plan, const RngStream& rng) {
  NestedRequest req;
  req.record_path = true;
  const auto out = nested_expectation(psi, mu, plan, rng, req);
  const std::size_t G = out.groups;
  const std::size_t stride = out.outputs * (G + 1);

  // x attached to each phi index: phi_g -> phi_{g+1} steps with group_x[g]
  std::vector<double> xs(G + 1, 0.0);
  for (std::size_t g = 0; g < G; ++g) xs[g + 1] = out.group_x[g];

  GirsanovReport report;
  std::vector<double> weights(out.outer);
  std::vector<std::vector<double>> partial(G, std::vector<double>(out.outer));
  std::vector<double> dphi_sum(G, 0.0);
  double sup_seen = 0.0;
  std::vector<double> log_weights(out.outer);
  for (std::size_t i = 0; i < out.outer; ++i) {
    std::span<const double> phi(out.path.data() + i * stride, G + 1);
    sup_seen = std::max(sup_seen, std::abs(phi[G]));
    double lw = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      lw += xs[g + 1] * (phi[g + 1] - phi[g]);
      partial[g][i] = std::exp(lw);
      dphi_sum[g] += phi[g + 1] - phi[g];
    }
    const auto w = girsanov_weight(phi, xs);
    weights[i] = w.weight;
    log_weights[i] = w.log_weight;
    report.max_abs_log_weight = std::max(report.max_abs_log_weight, std::abs(w.log_weight));
  }
  report.sup_psi = std::isfinite(psi.sup_norm) ? psi.sup_norm : sup_seen;
  for (double lw : log_weights)
    if (std::abs(lw) > 2.0 * report.sup_psi * (1.0 + 1e-12) + 1e-12) ++report.bound_violations;
  report.weight_mean = summarize(weights);
  for (std::size_t g = 0; g < G; ++g)
    report.levels.push_back({g + 1, xs[g + 1], dphi_sum[g] / static_cast<double>(out.outer), summarize(partial[g])});
  return report;
}

void write_girsanov_csv(std::ostream& os, const GirsanovReport& report) {
  os << "level,x_l,mean_dphi,weight_mean,weight_se\n";
  os.precision(17);
  for (const auto& row : report.levels)
    os << row.level << ',' << row.x << ',' << row.mean_dphi << ',' << row.weight.value << ',' << row.weight.std_error
       << '\n';
}

namespace {

void check_compatible(const WienerFunctional& a, const WienerFunctional& b) {
  if (a.copies != b.copies || a.grid != b.grid || a.kind != b.kind)
    throw std::invalid_argument("derivative_in_psi: functional and direction must share copies, grid and noise kind");
  if (a.outputs != 1 || b.outputs != 1)
    throw std::invalid_argument("derivative_in_psi: single-output functionals expected");
}

}  // namespace

EstimateWithError derivative_in_psi(const WienerFunctional& psi, const WienerFunctional& delta_psi,
                                    const DiscreteParisiMeasure& mu, const NestedPlan& plan, const RngStream& rng) {
  psi.validate();
  delta_psi.validate();
  check_compatible(psi, delta_psi);
  WienerFunctional both = psi;
  both.eval = [&psi, &delta_psi](std::size_t outer, std::span<const double> noise, std::span<double> out) {
    psi.eval(outer, noise, out.subspan(0, 1));
    delta_psi.eval(outer, noise, out.subspan(1, 1));
  };
  NestedRequest req;
  req.passenger = true;
  const auto out = nested_expectation(both, mu, plan, rng, req);
  return out.estimate(out.tilted, 0);
}

std::vector<double> measure_direction(const DiscreteParisiMeasure& mu, const DiscreteParisiMeasure& mu_prime) {
  const auto& a = mu.levels();
  const auto& b = mu_prime.levels();
  if (a.size() != b.size()) throw std::invalid_argument("derivative_in_mu: measures must share the q grid (refine both first)");
  std::vector<double> dx(a.size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].first != b[l].first)
      throw std::invalid_argument("derivative_in_mu: measures must share the q grid (refine both first)");
    dx[l] = b[l].second - a[l].second;
  }
  return dx;
}

DiscreteParisiMeasure shifted_measure(const DiscreteParisiMeasure& mu, std::span<const double> dx, double t) {
  auto levels = mu.levels();
  if (dx.size() != levels.size()) throw std::invalid_argument("shifted_measure: direction size mismatch");
  for (std::size_t l = 0; l < levels.size(); ++l) levels[l].second += t * dx[l];
  return DiscreteParisiMeasure(std::move(levels));
}

EstimateWithError derivative_in_mu(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                                   const DiscreteParisiMeasure& mu_prime, const NestedPlan& plan,
                                   const RngStream& rng) {
  NestedRequest req;
  req.dx = measure_direction(mu, mu_prime);
  const auto out = nested_expectation(psi, mu, plan, rng, req);
  return out.estimate(out.mu_derivative, 0);
}

EstimateWithError rsb_expectation_along(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                                        std::span<const double> dx, double t, const NestedPlan& plan,
                                        const RngStream& rng) {
  NestedRequest req;
  req.dx.assign(dx.begin(), dx.end());
  const auto out = nested_expectation(psi, shifted_measure(mu, dx, t), plan, rng, req);
  return out.estimate(out.phi0, 0);
}

WienerFunctional tree_functional(const HierarchicalMeasure& tree, std::span<const double> grid, std::size_t copies,
                                 std::size_t outputs, MultiLeafFunction leaf_fn) {
  const std::size_t K1 = tree.depth();
  if (grid.size() != K1 + 1)
    throw std::invalid_argument("tree functional: grid needs q_0..q_{K+1} (" + std::to_string(K1 + 1) + " times)");
  if (grid.front() != 0.0 || grid.back() != 1.0)
    throw std::invalid_argument("tree functional: grid must run from 0 to 1");
  for (std::size_t l = 1; l < K1; ++l)
    if (!(grid[l] > grid[l - 1])) throw std::invalid_argument("tree functional: q_0..q_K must be strictly increasing");
  if (grid[K1] < grid[K1 - 1]) throw std::invalid_argument("tree functional: grid must be non-decreasing");

  WienerFunctional f;
  f.copies = copies;
  f.grid.assign(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(K1));
  f.kind = NoiseKind::uniform;
  f.outputs = outputs;
  auto embedding = std::make_shared<WienerEmbedding>(tree);
  f.eval = [embedding, copies, K1, leaf_fn = std::move(leaf_fn)](std::size_t outer, std::span<const double> noise,
                                                                  std::span<double> out) {
    thread_local std::vector<std::size_t> idx;
    idx.resize(copies);
    for (std::size_t c = 0; c < copies; ++c) idx[c] = embedding->leaf_index(noise.subspan(c * K1, K1));
    leaf_fn(outer, idx, out);
  };
  return f;
}

}  // namespace rsb
