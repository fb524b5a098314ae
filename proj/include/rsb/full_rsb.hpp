#pragma once

#include "rsb/cavity.hpp"
#include "rsb/common.hpp"
#include "rsb/parisi_measure.hpp"
#include "rsb/rsb_tree.hpp"
#include "rsb/wiener_rsb.hpp"

#include <json.hpp>

#include <vector>

namespace rsb {

/// Tree-embedded cavity magnetization m(omega): the tree is embedded on the
/// level times q_0 = 0 < ... < q_K <= q_{K+1} = 1 and m is the selected leaf.
struct CavityMagnetizationSpec {
  HierarchicalMeasure tree;
  std::vector<double> grid;

  void validate() const;
};

/// E_J[ Phi(psi_v o m^{x2c}, mu, 0) - Phi(psi_e o m^{x2c}, mu, 0) ], both terms
/// on the same noise. j_samples == 0 enumerates the 2^c coupling vectors
/// (outer sample i uses vector i mod 2^c); otherwise j_samples vectors are
/// drawn from rng. Trees with a single leaf value give psi constant per J and
/// are evaluated exactly.
EstimateWithError full_rsb_functional(const CavityMagnetizationSpec& m_spec, const DiscreteParisiMeasure& mu,
                                      const ModelParams& params, std::size_t j_samples, const NestedPlan& plan,
                                      const RngStream& rng);

struct EquivalenceReport {
  EstimateWithError p_hat_k;
  EstimateWithError p_full;
  double se = 0.0;
  double z = 0.0;
  bool passed = false;  // |z| <= 3
};

/// Exact tree DP against the Wiener Monte Carlo evaluation of the same
/// tree and x, with mu built from (q_grid, x).
EquivalenceReport equivalence_check(const HierarchicalMeasure& tree, const RsbExponents& x,
                                    std::span<const double> q_grid, const ModelParams& params,
                                    const NestedPlan& plan, const RngStream& rng);

struct QInvarianceReport {
  EstimateWithError p_a;
  EstimateWithError p_b;
  double se = 0.0;
  double z = 0.0;
  bool passed = false;
};

/// Full-RSB estimates of one tree and x on two level grids. By default the
/// two runs use independent streams; with common_noise both use rng itself.
QInvarianceReport q_invariance_check(const HierarchicalMeasure& tree, const RsbExponents& x,
                                     const ModelParams& params, std::span<const double> grid_a,
                                     std::span<const double> grid_b, const NestedPlan& plan, const RngStream& rng,
                                     bool common_noise = false);

void to_json(nlohmann::json& j, const EquivalenceReport& r);
void to_json(nlohmann::json& j, const QInvarianceReport& r);

}  // namespace rsb
