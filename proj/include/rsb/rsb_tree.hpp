#pragma once

#include "rsb/cavity.hpp"
#include "rsb/common.hpp"

#include <json.hpp>

#include <functional>
#include <random>
#include <span>
#include <vector>

namespace rsb {

/// Finite-support hierarchical order parameter: a weighted tree whose
/// root-to-leaf paths all have length depth() = K+1. Level 0 holds the
/// root; leaves (level K+1) carry values in [-1,1]. Nodes of each level are
/// stored contiguously and the children of a node form a contiguous range of
/// the next level. Immutable after construction.
class HierarchicalMeasure {
 public:
  /// Builder node: either internal (weights + children) or a leaf (value).
  struct Node {
    double leaf_value = 0.0;
    std::vector<double> weights;
    std::vector<Node> children;

    static Node leaf(double m) { return Node{m, {}, {}}; }
    static Node internal(std::vector<double> w, std::vector<Node> c) { return Node{0.0, std::move(w), std::move(c)}; }
  };

  explicit HierarchicalMeasure(const Node& root);

  /// Chain tree of the given depth ending in a single leaf.
  static HierarchicalMeasure single_leaf(double m, std::size_t depth);
  /// Every internal node has `branching` children with equal weights; leaf
  /// values listed left to right (branching^depth of them).
  static HierarchicalMeasure uniform(std::size_t depth, std::size_t branching, std::span<const double> leaf_values);
  /// Random tree: fixed branching, Dirichlet(1) weights, uniform leaves in
  /// [-leaf_scale, leaf_scale].
  static HierarchicalMeasure random(std::size_t depth, std::size_t branching, double leaf_scale, std::mt19937_64& gen);

  std::size_t depth() const { return first_child_.size(); }
  std::size_t level_size(std::size_t level) const;
  std::size_t first_child(std::size_t level, std::size_t node) const { return first_child_[level][node]; }
  std::size_t child_count(std::size_t level, std::size_t node) const { return child_count_[level][node]; }
  /// Weight of `node` (on level >= 1) relative to its parent.
  double weight(std::size_t level, std::size_t node) const { return weights_[level][node]; }
  std::size_t leaf_count() const { return leaf_values_.size(); }
  const std::vector<double>& leaf_values() const { return leaf_values_; }

  Node to_node() const;

 private:
  std::vector<std::vector<std::size_t>> first_child_;  // levels 0..K
  std::vector<std::vector<std::size_t>> child_count_;
  std::vector<std::vector<double>> weights_;           // levels 0..K+1 (level 0 unused)
  std::vector<double> leaf_values_;
};

/// Node index at each level 0..K+1 and the leaf value reached.
struct TreePath {
  std::vector<std::size_t> nodes;
  double leaf_value = 0.0;
};

/// x_0 = 0 < x_1 <= ... <= x_{K+1} = 1.
struct RsbExponents {
  std::vector<double> x;

  explicit RsbExponents(std::vector<double> values);
  std::size_t steps() const { return x.size() - 2; }  // K
};

TreePath sample_path(const HierarchicalMeasure& tree, std::mt19937_64& gen);

using LeafFunction = std::function<double(std::span<const double>)>;
/// psi of n leaf indices (into tree.leaf_values()).
using LeafIndexFunction = std::function<double(std::span<const std::size_t>)>;

/// Maximum number of level-K node tuples phi_hat_exact will enumerate.
inline constexpr double kExactTupleLimit = 1e7;

/// Exact dynamic program for
///   Xi_{K+1} = exp(psi),  Xi_l = E[ Xi_{l+1}^{x_l/x_{l+1}} | level-l nodes ],
///   result   = E[ log(Xi_1) / x_1 ],
/// over n independent copies of the tree.
double phi_hat_exact(const LeafFunction& psi, const HierarchicalMeasure& tree, const RsbExponents& x, std::size_t n,
                     bool parallel = true);
double phi_hat_exact_indexed(const LeafIndexFunction& psi, const HierarchicalMeasure& tree, const RsbExponents& x,
                             std::size_t n, bool parallel = true);

/// Nested Monte Carlo estimate of the same recursion: each conditional
/// average is replaced by an inner empirical mean over plan.inner_at(l-1)
/// child tuples; the standard error comes from the plan.outer replicates.
EstimateWithError phi_hat_mc(const LeafFunction& psi, const HierarchicalMeasure& tree, const RsbExponents& x,
                             std::size_t n, const NestedPlan& plan, const RngStream& rng);

/// Several functionals of the same leaf tuples evaluated on shared samples.
/// psis(outer_index, leaf_indices, out) fills one value per functional.
using MultiLeafFunction =
    std::function<void(std::size_t, std::span<const std::size_t>, std::span<double>)>;
/// Returns outer x outputs per-replicate values of log(Xi_1)/x_1.
std::vector<double> phi_hat_mc_samples(const MultiLeafFunction& psis, std::size_t outputs,
                                       const HierarchicalMeasure& tree, const RsbExponents& x, std::size_t n,
                                       const NestedPlan& plan, const RngStream& rng);

enum class Evaluator { exact, mc };

/// K-RSB functional E_J[ PhiHat(psi_v o zeta) - PhiHat(psi_e o zeta) ] with n = 2c.
/// j_samples == 0 enumerates all 2^c coupling vectors exactly; otherwise
/// j_samples vectors are drawn from rng. The mc evaluator shares samples
/// between the vertex and edge terms.
EstimateWithError krsb_functional(const HierarchicalMeasure& tree, const RsbExponents& x, const ModelParams& params,
                                  std::size_t j_samples, Evaluator evaluator, const RngStream& rng,
                                  const NestedPlan& plan = {});

/// The coupling vectors krsb_functional averages over.
std::vector<CouplingSample> coupling_set(const ModelParams& params, std::size_t j_samples, const RngStream& rng);

void to_json(nlohmann::json& j, const HierarchicalMeasure& tree);
HierarchicalMeasure tree_from_json(const nlohmann::json& j);

}  // namespace rsb
