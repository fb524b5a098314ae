#include "rsb/rsb_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rsb {

namespace {

using Node = HierarchicalMeasure::Node;

// Running log-sum-exp accumulator.
struct LogSum {
  double max = -INFINITY;
  double sum = 0.0;
  void add(double t) {
    if (t == -INFINITY) return;
    if (t <= max) {
      sum += std::exp(t - max);
    } else {
      sum = sum * std::exp(max - t) + 1.0;
      max = t;
    }
  }
  double value() const { return max == -INFINITY ? -INFINITY : max + std::log(sum); }
};

void check_exponents(const RsbExponents& x, const HierarchicalMeasure& tree) {
  if (x.x.size() != tree.depth() + 1)
    throw std::invalid_argument("rsb exponents: expected K+2 = " + std::to_string(tree.depth() + 1) +
                                " entries, got " + std::to_string(x.x.size()));
}

// Cumulative child weights for inverse-CDF sampling of every internal node.
class ChildSampler {
 public:
  explicit ChildSampler(const HierarchicalMeasure& tree) : tree_(tree), cum_(tree.depth()) {
    for (std::size_t l = 0; l < tree.depth(); ++l) {
      cum_[l].resize(tree.level_size(l + 1));
      for (std::size_t v = 0; v < tree.level_size(l); ++v) {
        double acc = 0.0;
        const std::size_t first = tree.first_child(l, v);
        for (std::size_t k = 0; k < tree.child_count(l, v); ++k) {
          acc += tree.weight(l + 1, first + k);
          cum_[l][first + k] = acc;
        }
      }
    }
  }

  std::size_t pick(std::size_t level, std::size_t node, double u) const {
    const std::size_t first = tree_.first_child(level, node);
    const std::size_t count = tree_.child_count(level, node);
    const double* begin = cum_[level].data() + first;
    const double total = begin[count - 1];
    const auto it = std::upper_bound(begin, begin + count, u * total);
    return first + std::min<std::size_t>(static_cast<std::size_t>(it - begin), count - 1);
  }

 private:
  const HierarchicalMeasure& tree_;
  std::vector<std::vector<double>> cum_;
};

struct ExactDp {
  const HierarchicalMeasure& tree;
  const std::vector<double>& x;
  std::size_t n;
  const LeafIndexFunction& psi;

  double log_xi(std::size_t level, std::span<const std::size_t> nodes) const {
    if (level == tree.depth()) {
      std::vector<std::size_t> leaves(nodes.begin(), nodes.end());
      return psi(leaves);
    }
    const double ratio = x[level] / x[level + 1];
    std::vector<std::size_t> child(n), first(n), count(n);
    for (std::size_t c = 0; c < n; ++c) {
      first[c] = tree.first_child(level, nodes[c]);
      count[c] = tree.child_count(level, nodes[c]);
      child[c] = first[c];
    }
    LogSum acc;
    while (true) {
      double logw = 0.0;
      for (std::size_t c = 0; c < n; ++c) logw += std::log(tree.weight(level + 1, child[c]));
      acc.add(logw + ratio * log_xi(level + 1, child));
      std::size_t c = 0;
      for (; c < n; ++c) {
        if (++child[c] < first[c] + count[c]) break;
        child[c] = first[c];
      }
      if (c == n) break;
    }
    return acc.value();
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// HierarchicalMeasure

HierarchicalMeasure::HierarchicalMeasure(const Node& root) {
  if (root.children.empty()) throw std::invalid_argument("tree: root must have children");
  std::vector<const Node*> current{&root};
  weights_.emplace_back(1, 1.0);
  while (true) {
    const bool all_leaves = std::all_of(current.begin(), current.end(), [](const Node* v) { return v->children.empty(); });
    if (all_leaves) break;
    std::vector<const Node*> next;
    std::vector<std::size_t> first, count;
    std::vector<double> w;
    for (const Node* v : current) {
      if (v->children.empty()) throw std::invalid_argument("tree: root-to-leaf paths must have identical length");
      if (v->weights.size() != v->children.size())
        throw std::invalid_argument("tree: each child needs exactly one weight");
      double total = 0.0;
      for (double wi : v->weights) {
        if (!(wi > 0.0)) throw std::invalid_argument("tree: weights must be positive");
        total += wi;
      }
      if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("tree: weights at a node must sum to 1");
      first.push_back(next.size());
      count.push_back(v->children.size());
      for (std::size_t k = 0; k < v->children.size(); ++k) {
        next.push_back(&v->children[k]);
        w.push_back(v->weights[k]);
      }
    }
    first_child_.push_back(std::move(first));
    child_count_.push_back(std::move(count));
    weights_.push_back(std::move(w));
    current = std::move(next);
  }
  for (const Node* leaf : current) {
    if (!(std::abs(leaf->leaf_value) <= 1.0)) throw std::invalid_argument("tree: leaf values must lie in [-1,1]");
    leaf_values_.push_back(leaf->leaf_value);
  }
}

std::size_t HierarchicalMeasure::level_size(std::size_t level) const {
  if (level == depth()) return leaf_values_.size();
  return first_child_[level].size();
}

HierarchicalMeasure HierarchicalMeasure::single_leaf(double m, std::size_t depth) {
  if (depth == 0) throw std::invalid_argument("tree: depth must be >= 1");
  Node node = Node::leaf(m);
  for (std::size_t l = 0; l < depth; ++l) node = Node::internal({1.0}, {node});
  return HierarchicalMeasure(node);
}

HierarchicalMeasure HierarchicalMeasure::uniform(std::size_t depth, std::size_t branching,
                                                 std::span<const double> leaf_values) {
  if (depth == 0 || branching == 0) throw std::invalid_argument("tree: depth and branching must be >= 1");
  std::size_t expected = 1;
  for (std::size_t l = 0; l < depth; ++l) expected *= branching;
  if (leaf_values.size() != expected) throw std::invalid_argument("tree: need branching^depth leaf values");
  std::vector<Node> layer;
  for (double v : leaf_values) layer.push_back(Node::leaf(v));
  const std::vector<double> w(branching, 1.0 / static_cast<double>(branching));
  for (std::size_t l = 0; l < depth; ++l) {
    std::vector<Node> up;
    for (std::size_t i = 0; i < layer.size(); i += branching)
      up.push_back(Node::internal(w, std::vector<Node>(layer.begin() + i, layer.begin() + i + branching)));
    layer = std::move(up);
  }
  return HierarchicalMeasure(layer.front());
}

HierarchicalMeasure HierarchicalMeasure::random(std::size_t depth, std::size_t branching, double leaf_scale,
                                                std::mt19937_64& gen) {
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> leaf(-leaf_scale, leaf_scale);
  std::function<Node(std::size_t)> build = [&](std::size_t remaining) -> Node {
    if (remaining == 0) return Node::leaf(leaf(gen));
    std::vector<double> w(branching);
    double total = 0.0;
    for (auto& wi : w) total += (wi = std::max(expo(gen), 1e-300));
    for (auto& wi : w) wi /= total;
    std::vector<Node> children;
    for (std::size_t k = 0; k < branching; ++k) children.push_back(build(remaining - 1));
    // renormalize so the weights sum to 1 to rounding
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    w.back() += 1.0 - s;
    return Node::internal(std::move(w), std::move(children));
  };
  return HierarchicalMeasure(build(depth));
}

HierarchicalMeasure::Node HierarchicalMeasure::to_node() const {
  std::function<Node(std::size_t, std::size_t)> build = [&](std::size_t level, std::size_t node) -> Node {
    if (level == depth()) return Node::leaf(leaf_values_[node]);
    Node out;
    const std::size_t first = first_child(level, node);
    for (std::size_t k = 0; k < child_count(level, node); ++k) {
      out.weights.push_back(weight(level + 1, first + k));
      out.children.push_back(build(level + 1, first + k));
    }
    return out;
  };
  return build(0, 0);
}

RsbExponents::RsbExponents(std::vector<double> values) : x(std::move(values)) {
  if (x.size() < 2) throw std::invalid_argument("rsb exponents: need x_0 and x_{K+1}");
  if (x.front() != 0.0) throw std::invalid_argument("rsb exponents: x_0 must be 0");
  if (x.back() != 1.0) throw std::invalid_argument("rsb exponents: x_{K+1} must be 1");
  if (!(x[1] > 0.0)) throw std::invalid_argument("rsb exponents: x_1 must be positive");
  for (std::size_t l = 2; l < x.size(); ++l)
    if (x[l] < x[l - 1]) throw std::invalid_argument("rsb exponents: sequence must be non-decreasing");
}

// ---------------------------------------------------------------------------
// Sampling and evaluation

TreePath sample_path(const HierarchicalMeasure& tree, std::mt19937_64& gen) {
  TreePath path;
  std::size_t node = 0;
  path.nodes.push_back(node);
  for (std::size_t l = 0; l < tree.depth(); ++l) {
    const std::size_t first = tree.first_child(l, node);
    std::vector<double> w;
    for (std::size_t k = 0; k < tree.child_count(l, node); ++k) w.push_back(tree.weight(l + 1, first + k));
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    node = first + pick(gen);
    path.nodes.push_back(node);
  }
  path.leaf_value = tree.leaf_values()[node];
  return path;
}

double phi_hat_exact_indexed(const LeafIndexFunction& psi, const HierarchicalMeasure& tree, const RsbExponents& x,
                             std::size_t n, bool parallel) {
  check_exponents(x, tree);
  if (n == 0) throw std::invalid_argument("phi_hat_exact: n must be positive");
  const std::size_t K = tree.depth() - 1;
  if (std::pow(static_cast<double>(tree.level_size(K)), static_cast<double>(n)) > kExactTupleLimit)
    throw std::length_error("phi_hat_exact: (level-K nodes)^n exceeds the exact-evaluation limit");

  const ExactDp dp{tree, x.x, n, psi};
  const std::size_t roots = tree.level_size(1);
  std::size_t tuples = 1;
  for (std::size_t c = 0; c < n; ++c) tuples *= roots;

  std::vector<double> contribution(tuples);
#pragma omp parallel for schedule(dynamic) if (parallel && tuples > 1)
  for (std::size_t t = 0; t < tuples; ++t) {
    std::vector<std::size_t> nodes(n);
    std::size_t rest = t;
    double w = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
      nodes[c] = rest % roots;
      rest /= roots;
      w *= tree.weight(1, nodes[c]);
    }
    contribution[t] = w * dp.log_xi(1, nodes) / x.x[1];
  }
  long double total = 0.0L;
  for (double v : contribution) total += v;
  return static_cast<double>(total);
}

double phi_hat_exact(const LeafFunction& psi, const HierarchicalMeasure& tree, const RsbExponents& x, std::size_t n,
                     bool parallel) {
  const auto& values = tree.leaf_values();
  LeafIndexFunction indexed = [&](std::span<const std::size_t> idx) {
    std::vector<double> m(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) m[i] = values[idx[i]];
    return psi(m);
  };
  return phi_hat_exact_indexed(indexed, tree, x, n, parallel);
}

namespace {

struct TreeMc {
  const HierarchicalMeasure& tree;
  const ChildSampler& sampler;
  const std::vector<double>& x;
  std::size_t n;
  std::size_t outputs;
  const NestedPlan& plan;
  const MultiLeafFunction& psis;
  std::size_t outer_index = 0;
  // per level: child tuple and child values
  std::vector<std::vector<std::size_t>> tuple_buf;
  std::vector<std::vector<double>> value_buf;

  // out receives log Xi_level for each functional
  void log_xi(std::size_t level, std::span<const std::size_t> nodes, std::mt19937_64& gen, std::span<double> out) {
    if (level == tree.depth()) {
      psis(outer_index, nodes, out);
      return;
    }
    const std::size_t N = plan.inner_at(level - 1);
    const double ratio = x[level] / x[level + 1];
    auto& child = tuple_buf[level];
    auto& vals = value_buf[level];
    vals.resize(N * outputs);
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t c = 0; c < n; ++c) child[c] = sampler.pick(level, nodes[c], uniform_open(gen));
      log_xi(level + 1, child, gen, std::span<double>(vals.data() + j * outputs, outputs));
    }
    for (std::size_t k = 0; k < outputs; ++k) {
      LogSum acc;
      for (std::size_t j = 0; j < N; ++j) acc.add(ratio * vals[j * outputs + k]);
      out[k] = acc.value() - std::log(static_cast<double>(N));
    }
  }
};

}  // namespace

std::vector<double> phi_hat_mc_samples(const MultiLeafFunction& psis, std::size_t outputs,
                                       const HierarchicalMeasure& tree, const RsbExponents& x, std::size_t n,
                                       const NestedPlan& plan, const RngStream& rng) {
  check_exponents(x, tree);
  if (plan.outer == 0) throw std::invalid_argument("phi_hat_mc: plan.outer must be positive");
  const ChildSampler sampler(tree);
  std::vector<double> samples(plan.outer * outputs);

#pragma omp parallel if (plan.parallel)
  {
    TreeMc mc{tree, sampler, x.x, n, outputs, plan, psis, 0, {}, {}};
    mc.tuple_buf.assign(tree.depth() + 1, std::vector<std::size_t>(n));
    mc.value_buf.resize(tree.depth() + 1);
    std::vector<std::size_t> first(n);
#pragma omp for schedule(dynamic, 16)
    for (std::size_t i = 0; i < plan.outer; ++i) {
      auto gen = rng.substream(i).engine();
      mc.outer_index = i;
      for (std::size_t c = 0; c < n; ++c) first[c] = sampler.pick(0, 0, uniform_open(gen));
      std::span<double> out(samples.data() + i * outputs, outputs);
      mc.log_xi(1, first, gen, out);
      for (auto& v : out) v /= x.x[1];
    }
  }
  return samples;
}

EstimateWithError phi_hat_mc(const LeafFunction& psi, const HierarchicalMeasure& tree, const RsbExponents& x,
                             std::size_t n, const NestedPlan& plan, const RngStream& rng) {
  const auto& values = tree.leaf_values();
  MultiLeafFunction multi = [&](std::size_t, std::span<const std::size_t> idx, std::span<double> out) {
    std::vector<double> m(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) m[i] = values[idx[i]];
    out[0] = psi(m);
  };
  return summarize(phi_hat_mc_samples(multi, 1, tree, x, n, plan, rng));
}

std::vector<CouplingSample> coupling_set(const ModelParams& params, std::size_t j_samples, const RngStream& rng) {
  std::vector<CouplingSample> out;
  if (j_samples == 0) {
    const auto count = coupling_configurations(params);
    for (std::uint64_t k = 0; k < count; ++k) out.push_back(coupling_from_index(params, k));
  } else {
    auto gen = rng.substream(0x4a53414d50ULL).engine();
    for (std::size_t k = 0; k < j_samples; ++k) out.push_back(sample_couplings(params, gen));
  }
  return out;
}

EstimateWithError krsb_functional(const HierarchicalMeasure& tree, const RsbExponents& x, const ModelParams& params,
                                  std::size_t j_samples, Evaluator evaluator, const RngStream& rng,
                                  const NestedPlan& plan) {
  params.validate();
  check_exponents(x, tree);
  const std::size_t n = params.field_dim();
  const auto couplings = coupling_set(params, j_samples, rng);
  std::vector<CavityTable> tables;
  for (const auto& J : couplings) tables.emplace_back(params, J, tree.leaf_values());

  if (evaluator == Evaluator::exact) {
    std::vector<double> diffs;
    for (const auto& table : tables) {
      const LeafIndexFunction v = [&](std::span<const std::size_t> idx) { return table.vertex(idx); };
      const LeafIndexFunction e = [&](std::span<const std::size_t> idx) { return table.edge(idx); };
      diffs.push_back(phi_hat_exact_indexed(v, tree, x, n, plan.parallel) -
                      phi_hat_exact_indexed(e, tree, x, n, plan.parallel));
    }
    auto est = summarize(diffs);
    if (j_samples == 0) est.std_error = 0.0;
    return est;
  }

  const MultiLeafFunction both = [&](std::size_t outer, std::span<const std::size_t> idx, std::span<double> out) {
    const auto& table = tables[outer % tables.size()];
    out[0] = table.vertex(idx);
    out[1] = table.edge(idx);
  };
  const auto s = phi_hat_mc_samples(both, 2, tree, x, n, plan, rng);
  std::vector<double> diffs(plan.outer);
  for (std::size_t i = 0; i < plan.outer; ++i) diffs[i] = s[2 * i] - s[2 * i + 1];
  return summarize(diffs);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json node_to_json(const Node& v) {
  if (v.children.empty()) return {{"m", v.leaf_value}};
  nlohmann::json children = nlohmann::json::array();
  for (const auto& c : v.children) children.push_back(node_to_json(c));
  return {{"w", v.weights}, {"children", children}};
}

Node node_from_json(const nlohmann::json& j) {
  if (j.contains("m")) return Node::leaf(j.at("m").get<double>());
  Node out;
  out.weights = j.at("w").get<std::vector<double>>();
  for (const auto& c : j.at("children")) out.children.push_back(node_from_json(c));
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const HierarchicalMeasure& tree) { j = node_to_json(tree.to_node()); }

HierarchicalMeasure tree_from_json(const nlohmann::json& j) { return HierarchicalMeasure(node_from_json(j)); }

}  // namespace rsb
