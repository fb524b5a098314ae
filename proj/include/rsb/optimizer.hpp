#pragma once

#include "rsb/cavity.hpp"
#include "rsb/common.hpp"
#include "rsb/rsb_tree.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rsb {

/// E_J[ psi_v(m,...,m) - psi_e(m,...,m) ] over all 2^c coupling vectors.
double rs_objective(const ModelParams& params, double m);

struct RsResult {
  double m_star = 0.0;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// Scan of m in [0,1) followed by Brent refinement around the best point
/// (the objective is even in m). budget >= 50 evaluations.
RsResult optimize_rs(const ModelParams& params, std::size_t budget = 200);

/// Fixed-shape parameter space: depth K+1, every internal node with
/// `branching` children.
struct KrsbShape {
  std::size_t K = 1;
  std::size_t branching = 2;

  std::size_t internal_nodes() const;  // levels 0..K
  std::size_t leaves() const;          // branching^{K+1}
  std::size_t dim() const;
};

/// Unconstrained coordinates: per internal node (breadth-first) branching-1
/// softmax logits (last logit fixed at 0), then atanh of every leaf value,
/// then K logits a_l with x_1 = s(a_1), x_l = x_{l-1} + (1 - x_{l-1}) s(a_l).
std::vector<double> encode(const HierarchicalMeasure& tree, const RsbExponents& x, const KrsbShape& shape);
std::pair<HierarchicalMeasure, RsbExponents> decode(std::span<const double> theta, const KrsbShape& shape);

struct KrsbBudget {
  std::size_t evaluations = 400;
  Evaluator evaluator = Evaluator::exact;
  std::size_t j_samples = 0;  // 0 = enumerate couplings
  NestedPlan plan{};          // mc evaluator only
  double initial_step = 0.5;
  double size_tolerance = 1e-7;
};

struct TraceRow {
  std::size_t iteration = 0;
  double best = 0.0;
  std::string digest;
  double se = 0.0;
};

struct KrsbResult {
  HierarchicalMeasure tree;
  RsbExponents x;
  EstimateWithError value;
  EstimateWithError initial;
  std::vector<TraceRow> trace;
  std::size_t evaluations = 0;
  bool budget_exhausted = false;
};

/// Nelder-Mead (GSL nmsimplex2) over the encoded parameters; returns the
/// best point visited. Without an explicit start the leaves are drawn from
/// rng in [-0.5, 0.5], weights are equal and x is evenly spaced.
KrsbResult optimize_krsb(const KrsbShape& shape, const ModelParams& params, const KrsbBudget& budget,
                         const RngStream& rng,
                         std::optional<std::pair<HierarchicalMeasure, RsbExponents>> start = std::nullopt);

/// Every leaf at m, equal weights, x evenly spaced: value equals the RS value at m.
std::pair<HierarchicalMeasure, RsbExponents> embed_rs(double m, const KrsbShape& shape);
/// Depth K+1 -> K+2: each leaf becomes `branching` identical children and
/// x_{K+1} = x_K + (1 - x_K)/2. Leaves the functional unchanged.
std::pair<HierarchicalMeasure, RsbExponents> embed_deeper(const HierarchicalMeasure& tree, const RsbExponents& x,
                                                          std::size_t branching);

struct RefinementRow {
  std::size_t K = 0;  // 0 = replica-symmetric single atom
  std::size_t branching = 1;
  EstimateWithError value;
  EstimateWithError warm_start;  // value at the embedded parent optimum
  std::size_t evaluations = 0;
  std::size_t budget = 0;
  std::vector<TraceRow> trace;
  std::optional<std::pair<HierarchicalMeasure, RsbExponents>> best;  // K >= 1 rows
  double m_star = 0.0;                                               // K = 0 row
};

/// Best-found values for ascending K, each warm-started from the previous row.
std::vector<RefinementRow> refinement_scan(const ModelParams& params, std::span<const std::size_t> K_list,
                                           std::size_t branching, const KrsbBudget& budget, const RngStream& rng);

void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace);

}  // namespace rsb
