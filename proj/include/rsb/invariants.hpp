#pragma once

#include "rsb/common.hpp"
#include "rsb/parisi_measure.hpp"
#include "rsb/wiener_rsb.hpp"

#include <json.hpp>

#include <random>
#include <string>

namespace rsb {

/// Outcome of a randomized property check.
struct CheckResult {
  std::string name;
  bool passed = false;
  nlohmann::json details;
};

/// Bounded random functional of `copies` paths on a random grid of
/// `times` points: A tanh(a.z + b) + B cos(c.z), sup_norm = |A| + |B|.
WienerFunctional random_functional(std::mt19937_64& gen, std::size_t copies, std::span<const double> grid);

/// Staircase with K interior levels at random q, x spaced at least `gap`
/// apart inside [gap, 1 - gap].
DiscreteParisiMeasure random_measure(std::mt19937_64& gen, std::size_t K, double gap = 0.05);

/// Random strictly increasing native grid 0 < g_1 < ... < g_T <= 1.
std::vector<double> random_grid(std::mt19937_64& gen, std::size_t T);

/// Girsanov weight mean within 3 SE of 1 and |log w| <= 2 sup|Psi| on every
/// recorded path, for K = 2 random instances.
CheckResult martingale_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan,
                             std::vector<GirsanovReport>* reports = nullptr);
/// |Phi| <= sup|Psi| + 3 SE.
CheckResult bound_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan);
/// Ordered staircases mu1 <= mu2: Phi(mu1) <= Phi(mu2) + 3 combined SE, shared noise.
CheckResult monotone_suite(const RngStream& rng, std::size_t pairs, const NestedPlan& plan);
/// Phi(t Psi1 + (1-t) Psi0) <= t Phi(Psi1) + (1-t) Phi(Psi0) + 3 combined SE.
CheckResult convexity_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan);

/// derivative_in_psi against central differences (step t, Richardson at t/2 logged).
CheckResult derivative_psi_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan, double t = 1e-3);
/// derivative_in_mu against central differences (step t, Richardson at t/2 logged).
CheckResult derivative_mu_suite(const RngStream& rng, std::size_t instances, const NestedPlan& plan, double t = 1e-2);

}  // namespace rsb
