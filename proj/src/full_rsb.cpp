#include "rsb/full_rsb.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsb {

void CavityMagnetizationSpec::validate() const {
  if (grid.size() != tree.depth() + 1)
    throw std::invalid_argument("cavity magnetization: grid needs one time per tree level (q_0..q_{K+1})");
  if (grid.front() != 0.0 || grid.back() != 1.0)
    throw std::invalid_argument("cavity magnetization: grid must run from 0 to 1");
  for (std::size_t l = 1; l + 1 < grid.size(); ++l)
    if (!(grid[l] > grid[l - 1])) throw std::invalid_argument("cavity magnetization: grid must be strictly increasing");
}

EstimateWithError full_rsb_functional(const CavityMagnetizationSpec& m_spec, const DiscreteParisiMeasure& mu,
                                      const ModelParams& params, std::size_t j_samples, const NestedPlan& plan,
                                      const RngStream& rng) {
  params.validate();
  m_spec.validate();
  const auto couplings = coupling_set(params, j_samples, rng);
  const auto& leaves = m_spec.tree.leaf_values();
  const std::size_t n = params.field_dim();

  const bool constant = std::all_of(leaves.begin(), leaves.end(), [&](double v) { return v == leaves.front(); });
  if (constant) {
    // psi is constant per J, and Phi of a constant is that constant
    const std::vector<double> m(n, leaves.front());
    std::vector<double> diffs;
    for (const auto& J : couplings) diffs.push_back(psi_vertex(params, J, m) - psi_edge(params, J, m));
    auto est = summarize(diffs);
    if (j_samples == 0) est.std_error = 0.0;
    return est;
  }

  std::vector<CavityTable> tables;
  for (const auto& J : couplings) tables.emplace_back(params, J, leaves);
  auto psi = tree_functional(m_spec.tree, m_spec.grid, n, 2,
                             [&tables](std::size_t outer, std::span<const std::size_t> idx, std::span<double> out) {
                               const auto& table = tables[outer % tables.size()];
                               out[0] = table.vertex(idx);
                               out[1] = table.edge(idx);
                             });
  const auto out = nested_expectation(psi, mu, plan, rng.substream(0x5749454eULL));
  std::vector<double> diffs(out.outer);
  for (std::size_t i = 0; i < out.outer; ++i) diffs[i] = out.phi0[2 * i] - out.phi0[2 * i + 1];
  return summarize(diffs);
}

EquivalenceReport equivalence_check(const HierarchicalMeasure& tree, const RsbExponents& x,
                                    std::span<const double> q_grid, const ModelParams& params,
                                    const NestedPlan& plan, const RngStream& rng) {
  if (q_grid.size() != x.x.size()) throw std::invalid_argument("equivalence: grid and x differ in length");
  EquivalenceReport r;
  r.p_hat_k = krsb_functional(tree, x, params, 0, Evaluator::exact, rng, plan);
  const auto mu = DiscreteParisiMeasure::from_grid(q_grid, x.x);
  const CavityMagnetizationSpec spec{tree, std::vector<double>(q_grid.begin(), q_grid.end())};
  r.p_full = full_rsb_functional(spec, mu, params, 0, plan, rng);
  r.se = combined_se(r.p_hat_k, r.p_full);
  r.z = z_score(r.p_full, r.p_hat_k);
  r.passed = std::abs(r.z) <= 3.0;
  return r;
}

QInvarianceReport q_invariance_check(const HierarchicalMeasure& tree, const RsbExponents& x,
                                     const ModelParams& params, std::span<const double> grid_a,
                                     std::span<const double> grid_b, const NestedPlan& plan, const RngStream& rng,
                                     bool common_noise) {
  auto run = [&](std::span<const double> grid, const RngStream& stream) {
    if (grid.size() != x.x.size()) throw std::invalid_argument("q invariance: grid and x differ in length");
    for (std::size_t l = 1; l < grid.size(); ++l)
      if (!(grid[l] > grid[l - 1])) throw std::invalid_argument("q invariance: grids must be strictly increasing");
    const auto mu = DiscreteParisiMeasure::from_grid(grid, x.x);
    const CavityMagnetizationSpec spec{tree, std::vector<double>(grid.begin(), grid.end())};
    return full_rsb_functional(spec, mu, params, 0, plan, stream);
  };
  QInvarianceReport r;
  r.p_a = run(grid_a, common_noise ? rng : rng.substream(1));
  r.p_b = run(grid_b, common_noise ? rng : rng.substream(2));
  r.se = combined_se(r.p_a, r.p_b);
  r.z = z_score(r.p_a, r.p_b);
  r.passed = std::abs(r.z) <= 3.0;
  return r;
}

void to_json(nlohmann::json& j, const EquivalenceReport& r) {
  j = {{"p_hat_k", r.p_hat_k.value},
       {"p_hat_k_se", r.p_hat_k.std_error},
       {"p_full", r.p_full.value},
       {"p_full_se", r.p_full.std_error},
       {"n_samples", r.p_full.n_samples},
       {"se", r.se},
       {"z", r.z},
       {"passed", r.passed}};
}

void to_json(nlohmann::json& j, const QInvarianceReport& r) {
  j = {{"p_a", r.p_a.value}, {"p_a_se", r.p_a.std_error}, {"p_b", r.p_b.value}, {"p_b_se", r.p_b.std_error},
       {"se", r.se},        {"z", r.z},                    {"passed", r.passed}};
}

}  // namespace rsb
