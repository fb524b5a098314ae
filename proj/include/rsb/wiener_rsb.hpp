#pragma once

#include "rsb/common.hpp"
#include "rsb/parisi_measure.hpp"
#include "rsb/rsb_tree.hpp"

#include <cmath>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace rsb {

/// Standard normal variates for `copies` independent paths on levels
/// 0..levels-1: z_0 realizes omega(0), z_l (l >= 1) the normalized increment
/// (omega(q_l) - omega(q_{l-1})) / sqrt(q_l - q_{l-1}).
struct LevelNoise {
  std::size_t copies = 0;
  std::size_t levels = 0;
  std::vector<double> z;  // copy-major

  double at(std::size_t copy, std::size_t level) const { return z[copy * levels + level]; }
  static LevelNoise sample(std::size_t copies, std::size_t levels, std::mt19937_64& gen);
};

/// u_l = NormalCDF(z_l) for one copy.
std::vector<double> u_process(const LevelNoise& noise, std::size_t copy);

/// Inverse-CDF embedding of a tree into uniforms: the child of a level-l
/// node is selected by u_l; u_{K+1} is never read.
class WienerEmbedding {
 public:
  explicit WienerEmbedding(const HierarchicalMeasure& tree);

  const HierarchicalMeasure& tree() const { return tree_; }
  /// uniforms holds u_0..u_K (a trailing u_{K+1} is ignored).
  TreePath embed(std::span<const double> uniforms) const;
  std::size_t leaf_index(std::span<const double> uniforms) const;
  /// Right endpoints of the child intervals of `node` at `level`.
  std::span<const double> thresholds(std::size_t level, std::size_t node) const;

 private:
  HierarchicalMeasure tree_;
  std::vector<std::vector<double>> cum_;  // per level l: cumulative weight of each level-(l+1) node within its parent
};

/// What a path functional reads from the noise.
enum class NoiseKind { uniform, normal };

/// Bounded cylindrical Wiener functional of `copies` independent paths.
/// The functional reads each path through the normalized increments on its
/// own grid 0 = g_0 < g_1 < ... < g_T <= 1: eval receives, per copy, T+1
/// values (z_0, z_1..z_T), mapped through NormalCDF when kind == uniform.
struct WienerFunctional {
  std::size_t copies = 1;
  std::vector<double> grid{0.0};
  NoiseKind kind = NoiseKind::normal;
  std::size_t outputs = 1;
  /// Known bound on |Psi| (used by bound checks); infinity if unknown.
  double sup_norm = INFINITY;
  /// eval(outer_index, noise[copies * (T+1)], out[outputs])
  std::function<void(std::size_t, std::span<const double>, std::span<double>)> eval;

  void validate() const;
};

/// Extra quantities accumulated alongside phi_0.
struct NestedRequest {
  /// Direction x' - x per measure level (size K+2), or empty. Levels are
  /// grouped only when both x and this direction agree, so finite
  /// differences along the direction keep common random numbers.
  std::vector<double> dx;
  /// Functional returns 2*M values: M functionals, then M directions dPsi.
  bool passenger = false;
  /// Keep phi at every level boundary along the first inner sample.
  bool record_path = false;
  /// |Psi| above this aborts the run with std::domain_error.
  double magnitude_guard = 1e3;
};

struct NestedOutput {
  std::size_t outer = 0;
  std::size_t outputs = 0;  // M
  std::size_t groups = 0;   // G evaluated level groups
  std::vector<double> phi0;           // outer x M
  std::vector<double> tilted;         // outer x M, Girsanov-tilted mean of dPsi
  std::vector<double> mu_derivative;  // outer x M
  std::vector<double> path;           // outer x M x (G+1): phi at group starts, then Psi
  std::vector<double> group_x;        // x of each group

  EstimateWithError estimate(std::span<const double> per_outer, std::size_t k) const;
};

/// Nested Monte Carlo solution of the level recursion
///   phi_{K+1} = Psi,  phi_{l-1} = (1/x_l) log E[exp(x_l phi_l) | z_0..z_{l-1}],
/// returning one phi_0 = Phi sample per outer draw of omega(0).
/// x_l = 0 plateaus use the linear limit E[phi_l | ...]. Deterministic in
/// (inputs, rng) regardless of thread count.
NestedOutput nested_expectation(const WienerFunctional& psi, const DiscreteParisiMeasure& mu, const NestedPlan& plan,
                                const RngStream& rng, const NestedRequest& request = {});

/// Straight serial implementation of the same estimator with the same random
/// stream layout; kept as a test reference for nested_expectation.
NestedOutput nested_expectation_reference(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                                          const NestedPlan& plan, const RngStream& rng,
                                          const NestedRequest& request = {});

/// Phi(Psi, mu, 0) for the first output of psi.
EstimateWithError rsb_expectation(const WienerFunctional& psi, const DiscreteParisiMeasure& mu, const NestedPlan& plan,
                                  const RngStream& rng);

struct GirsanovWeight {
  double weight = 1.0;
  double log_weight = 0.0;
};

/// exp(sum_{l>=1} x_l (phi_l - phi_{l-1})).
GirsanovWeight girsanov_weight(std::span<const double> phi_levels, std::span<const double> x);

struct GirsanovLevelRow {
  std::size_t level = 0;
  double x = 0.0;
  double mean_dphi = 0.0;
  EstimateWithError weight;  // partial weight up to this level
};

struct GirsanovReport {
  EstimateWithError weight_mean;
  double max_abs_log_weight = 0.0;
  double sup_psi = 0.0;  // largest |Psi| met on the recorded paths
  std::size_t bound_violations = 0;  // paths with |log w| > 2 sup|Psi|
  std::vector<GirsanovLevelRow> levels;
};

/// Martingale diagnostics of the Girsanov weight along the recorded paths.
/// The pathwise bound uses psi.sup_norm when finite, else the observed sup.
GirsanovReport girsanov_diagnostics(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                                    const NestedPlan& plan, const RngStream& rng);
void write_girsanov_csv(std::ostream& os, const GirsanovReport& report);

/// E[weight * dPsi]: derivative of Phi(Psi + t dPsi, mu) at t = 0.
EstimateWithError derivative_in_psi(const WienerFunctional& psi, const WienerFunctional& delta_psi,
                                    const DiscreteParisiMeasure& mu, const NestedPlan& plan, const RngStream& rng);

/// d/dt Phi(Psi, mu + t (mu_prime - mu)) at t = 0 for staircases on the same
/// q grid: sum_l dx_l / x_l * E~[phi_l - phi_{l-1}].
EstimateWithError derivative_in_mu(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                                   const DiscreteParisiMeasure& mu_prime, const NestedPlan& plan,
                                   const RngStream& rng);

/// x' - x on a shared grid; throws std::invalid_argument on grid mismatch.
std::vector<double> measure_direction(const DiscreteParisiMeasure& mu, const DiscreteParisiMeasure& mu_prime);

/// mu + t * dx (levels unchanged).
DiscreteParisiMeasure shifted_measure(const DiscreteParisiMeasure& mu, std::span<const double> dx, double t);

/// Phi(Psi, mu + t dx) with the grouping of the direction dx, so that several
/// t share common random numbers.
EstimateWithError rsb_expectation_along(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                                        std::span<const double> dx, double t, const NestedPlan& plan,
                                        const RngStream& rng);

/// Tree embedded on the grid q_0..q_{K+1} (native grid q_0..q_K): each copy
/// selects a leaf from its u_0..u_K and leaf_fn(outer_index, leaf_indices,
/// out) gives the outputs.
WienerFunctional tree_functional(const HierarchicalMeasure& tree, std::span<const double> grid, std::size_t copies,
                                 std::size_t outputs, MultiLeafFunction leaf_fn);

// ---------------------------------------------------------------------------
// Markov functionals Psi = g(omega(1)) of a single path

struct TerminalGrid {
  double half_width = 10.0;
  double spacing = 0.01;
};

/// phi_0 on the spatial grid for Psi = g(omega(1)), by backward Gaussian
/// convolution over the levels of mu (discrete-kernel quadrature).
std::vector<double> terminal_value_function(const std::function<double(double)>& g, const DiscreteParisiMeasure& mu,
                                            const TerminalGrid& grid = {});

/// Phi(g(omega(1)), mu, 0) with an outer Monte Carlo average over omega(0).
/// Outer draws depend only on rng and outer, so calls with different mu share them.
EstimateWithError terminal_expectation(const std::function<double(double)>& g, const DiscreteParisiMeasure& mu,
                                       std::size_t outer, const RngStream& rng, const TerminalGrid& grid = {});

/// Psi = g(omega(1)) as a nested-MC functional (one copy, grid {0, 1}).
WienerFunctional terminal_functional(std::function<double(double)> g, double sup_norm = INFINITY);

}  // namespace rsb
