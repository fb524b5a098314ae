#include "rsb/optimizer.hpp"

#include <boost/math/tools/minima.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace rsb {

double rs_objective(const ModelParams& params, double m) {
  params.validate();
  const std::vector<double> mv(params.field_dim(), m);
  const auto count = coupling_configurations(params);
  long double total = 0.0L;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto J = coupling_from_index(params, k);
    total += psi_vertex(params, J, mv) - psi_edge(params, J, mv);
  }
  return static_cast<double>(total / static_cast<long double>(count));
}

RsResult optimize_rs(const ModelParams& params, std::size_t budget) {
  if (budget < 50) throw std::invalid_argument("optimize_rs: budget must be at least 50 evaluations");
  const std::size_t scan = 32;
  const double top = 1.0 - 1e-9;
  RsResult best{0.0, rs_objective(params, 0.0), 1};
  std::size_t best_k = 0;
  for (std::size_t k = 1; k < scan; ++k) {
    const double m = top * static_cast<double>(k) / static_cast<double>(scan - 1);
    const double v = rs_objective(params, m);
    ++best.evaluations;
    if (v < best.value) {
      best.value = v;
      best.m_star = m;
      best_k = k;
    }
  }
  const double step = top / static_cast<double>(scan - 1);
  const double lo = std::max(0.0, static_cast<double>(best_k) * step - step);
  const double hi = std::min(top, static_cast<double>(best_k) * step + step);
  std::uintmax_t iters = budget - scan;
  const auto [m, v] = boost::math::tools::brent_find_minima([&](double m) { return rs_objective(params, m); }, lo, hi,
                                                            std::numeric_limits<double>::digits / 2, iters);
  best.evaluations += static_cast<std::size_t>(iters);
  if (v <= best.value) {
    best.value = v;
    best.m_star = m;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Parameterization

namespace {

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= b;
  return r;
}

double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }
double logit(double p) { return std::log(p) - std::log1p(-p); }

void check_shape(const HierarchicalMeasure& tree, const RsbExponents& x, const KrsbShape& shape) {
  if (tree.depth() != shape.K + 1 || x.x.size() != shape.K + 2)
    throw std::invalid_argument("encode: tree depth or x length does not match K");
  for (std::size_t l = 0; l <= shape.K; ++l) {
    if (tree.level_size(l) != ipow(shape.branching, l))
      throw std::invalid_argument("encode: tree is not uniformly branching");
    for (std::size_t v = 0; v < tree.level_size(l); ++v)
      if (tree.child_count(l, v) != shape.branching) throw std::invalid_argument("encode: tree is not uniformly branching");
  }
}

}  // namespace

std::size_t KrsbShape::internal_nodes() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l <= K; ++l) total += ipow(branching, l);
  return total;
}

std::size_t KrsbShape::leaves() const { return ipow(branching, K + 1); }

std::size_t KrsbShape::dim() const { return (branching - 1) * internal_nodes() + leaves() + K; }

std::vector<double> encode(const HierarchicalMeasure& tree, const RsbExponents& x, const KrsbShape& shape) {
  check_shape(tree, x, shape);
  std::vector<double> theta;
  theta.reserve(shape.dim());
  const std::size_t b = shape.branching;
  for (std::size_t l = 0; l <= shape.K; ++l)
    for (std::size_t v = 0; v < tree.level_size(l); ++v) {
      const std::size_t first = tree.first_child(l, v);
      const double last = std::log(tree.weight(l + 1, first + b - 1));
      for (std::size_t k = 0; k + 1 < b; ++k) theta.push_back(std::log(tree.weight(l + 1, first + k)) - last);
    }
  for (double m : tree.leaf_values()) theta.push_back(std::atanh(std::clamp(m, -1.0 + 1e-16, 1.0 - 1e-16)));
  for (std::size_t l = 1; l <= shape.K; ++l) {
    const double prev = x.x[l - 1];
    const double frac = (x.x[l] - prev) / (1.0 - prev);
    theta.push_back(logit(std::clamp(frac, 1e-300, 1.0 - 1e-16)));
  }
  return theta;
}

std::pair<HierarchicalMeasure, RsbExponents> decode(std::span<const double> theta, const KrsbShape& shape) {
  if (theta.size() != shape.dim()) throw std::invalid_argument("decode: parameter vector has the wrong length");
  if (shape.branching == 0) throw std::invalid_argument("decode: branching must be >= 1");
  const std::size_t b = shape.branching;
  std::size_t pos = 0;

  // weights per internal node, breadth first
  std::vector<std::vector<double>> weights(shape.internal_nodes());
  for (auto& w : weights) {
    w.resize(b);
    double mx = 0.0;
    for (std::size_t k = 0; k + 1 < b; ++k) mx = std::max(mx, theta[pos + k]);
    double total = 0.0;
    for (std::size_t k = 0; k < b; ++k) total += (w[k] = std::exp((k + 1 < b ? theta[pos + k] : 0.0) - mx));
    for (auto& wk : w) wk /= total;
    pos += b - 1;
  }
  std::vector<HierarchicalMeasure::Node> layer;
  for (std::size_t i = 0; i < shape.leaves(); ++i) layer.push_back(HierarchicalMeasure::Node::leaf(std::tanh(theta[pos++])));
  // build bottom-up: level l internal nodes occupy [offset_l, offset_l + b^l) in breadth-first order
  for (std::size_t l = shape.K + 1; l-- > 0;) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < l; ++i) offset += ipow(b, i);
    std::vector<HierarchicalMeasure::Node> up;
    for (std::size_t v = 0; v < ipow(b, l); ++v)
      up.push_back(HierarchicalMeasure::Node::internal(
          weights[offset + v], std::vector<HierarchicalMeasure::Node>(layer.begin() + v * b, layer.begin() + (v + 1) * b)));
    layer = std::move(up);
  }
  std::vector<double> x{0.0};
  for (std::size_t l = 1; l <= shape.K; ++l) {
    const double prev = x.back();
    x.push_back(prev + (1.0 - prev) * logistic(theta[pos++]));
  }
  x.push_back(1.0);
  // guard against rounding at the upper end
  for (std::size_t l = 1; l < x.size(); ++l) x[l] = std::clamp(x[l], x[l - 1], 1.0);
  if (x.size() > 2 && x[1] <= 0.0) x[1] = std::numeric_limits<double>::min();
  return {HierarchicalMeasure(layer.front()), RsbExponents(std::move(x))};
}

std::pair<HierarchicalMeasure, RsbExponents> embed_rs(double m, const KrsbShape& shape) {
  std::vector<double> leaves(shape.leaves(), m);
  std::vector<double> x{0.0};
  for (std::size_t l = 1; l <= shape.K; ++l) x.push_back(static_cast<double>(l) / static_cast<double>(shape.K + 1));
  x.push_back(1.0);
  return {HierarchicalMeasure::uniform(shape.K + 1, shape.branching, leaves), RsbExponents(std::move(x))};
}

std::pair<HierarchicalMeasure, RsbExponents> embed_deeper(const HierarchicalMeasure& tree, const RsbExponents& x,
                                                          std::size_t branching) {
  using Node = HierarchicalMeasure::Node;
  if (branching == 0) throw std::invalid_argument("embed_deeper: branching must be >= 1");
  std::function<void(Node&)> grow = [&](Node& v) {
    if (v.children.empty()) {
      const double m = v.leaf_value;
      v = Node::internal(std::vector<double>(branching, 1.0 / static_cast<double>(branching)),
                         std::vector<Node>(branching, Node::leaf(m)));
      return;
    }
    for (auto& c : v.children) grow(c);
  };
  Node root = tree.to_node();
  grow(root);
  std::vector<double> nx(x.x.begin(), x.x.end() - 1);
  nx.push_back(nx.back() + (1.0 - nx.back()) / 2.0);
  nx.push_back(1.0);
  return {HierarchicalMeasure(root), RsbExponents(std::move(nx))};
}

// ---------------------------------------------------------------------------
// Nelder-Mead

namespace {

struct Objective {
  const KrsbShape& shape;
  const ModelParams& params;
  const KrsbBudget& budget;
  const RngStream& rng;
  std::size_t evaluations = 0;
  double best = INFINITY;
  double best_se = 0.0;
  std::vector<double> best_theta;

  EstimateWithError evaluate(std::span<const double> theta) const {
    const auto [tree, x] = decode(theta, shape);
    return krsb_functional(tree, x, params, budget.j_samples, budget.evaluator, rng, budget.plan);
  }

  double operator()(std::span<const double> theta) {
    ++evaluations;
    EstimateWithError v;
    try {
      v = evaluate(theta);
    } catch (const std::domain_error&) {
      return 1e300;
    } catch (const std::invalid_argument&) {
      return 1e300;  // underflowed weight
    }
    if (!std::isfinite(v.value)) return 1e300;
    if (v.value < best) {
      best = v.value;
      best_se = v.std_error;
      best_theta.assign(theta.begin(), theta.end());
    }
    return v.value;
  }
};

double gsl_objective(const gsl_vector* v, void* data) {
  auto* obj = static_cast<Objective*>(data);
  std::vector<double> theta(v->size);
  for (std::size_t i = 0; i < v->size; ++i) theta[i] = gsl_vector_get(v, i);
  return (*obj)(theta);
}

std::string theta_digest(const std::vector<double>& theta) {
  std::string bytes(theta.size() * sizeof(double), '\0');
  if (!theta.empty()) std::memcpy(bytes.data(), theta.data(), bytes.size());
  return digest_hex(bytes);
}

}  // namespace

KrsbResult optimize_krsb(const KrsbShape& shape, const ModelParams& params, const KrsbBudget& budget,
                         const RngStream& rng, std::optional<std::pair<HierarchicalMeasure, RsbExponents>> start) {
  params.validate();
  if (shape.branching == 0) throw std::invalid_argument("optimize_krsb: branching must be >= 1");
  if (budget.evaluations < 2) throw std::invalid_argument("optimize_krsb: budget too small");

  std::vector<double> theta0;
  if (start) {
    theta0 = encode(start->first, start->second, shape);
  } else {
    auto gen = rng.substream(0x494e4954ULL).engine();
    std::uniform_real_distribution<double> leaf(-0.5, 0.5);
    std::vector<double> leaves(shape.leaves());
    for (auto& m : leaves) m = leaf(gen);
    std::vector<double> x{0.0};
    for (std::size_t l = 1; l <= shape.K; ++l) x.push_back(static_cast<double>(l) / static_cast<double>(shape.K + 1));
    x.push_back(1.0);
    theta0 = encode(HierarchicalMeasure::uniform(shape.K + 1, shape.branching, leaves), RsbExponents(x), shape);
  }

  Objective obj{shape, params, budget, rng, 0, INFINITY, 0.0, {}};
  const auto initial = obj.evaluate(theta0);
  obj.evaluations = 1;
  obj.best = initial.value;
  obj.best_se = initial.std_error;
  obj.best_theta = theta0;

  const std::size_t n = theta0.size();
  gsl_set_error_handler_off();
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* step = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, theta0[i]);
    gsl_vector_set(step, i, budget.initial_step);
  }
  gsl_multimin_function fn{&gsl_objective, n, &obj};
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, step);

  std::vector<TraceRow> trace;
  trace.push_back({0, obj.best, theta_digest(obj.best_theta), obj.best_se});
  bool converged = false;
  for (std::size_t iter = 1; obj.evaluations < budget.evaluations; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    trace.push_back({iter, obj.best, theta_digest(obj.best_theta), obj.best_se});
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), budget.size_tolerance) == GSL_SUCCESS) {
      converged = true;
      break;
    }
  }
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);

  auto [tree, xs] = decode(obj.best_theta, shape);
  KrsbResult result{std::move(tree), std::move(xs), EstimateWithError{obj.best, obj.best_se, 0}, initial,
                    std::move(trace), obj.evaluations, !converged};
  return result;
}

std::vector<RefinementRow> refinement_scan(const ModelParams& params, std::span<const std::size_t> K_list,
                                           std::size_t branching, const KrsbBudget& budget, const RngStream& rng) {
  if (!std::is_sorted(K_list.begin(), K_list.end())) throw std::invalid_argument("refinement_scan: K_list must ascend");
  std::vector<RefinementRow> rows;
  std::optional<double> rs_m;
  std::optional<std::pair<HierarchicalMeasure, RsbExponents>> parent;
  for (std::size_t K : K_list) {
    RefinementRow row;
    row.K = K;
    row.budget = budget.evaluations;
    if (K == 0) {
      const auto rs = optimize_rs(params, std::max<std::size_t>(budget.evaluations, 50));
      row.branching = 1;
      row.value = EstimateWithError::exact(rs.value);
      row.warm_start = row.value;
      row.evaluations = rs.evaluations;
      row.m_star = rs.m_star;
      rs_m = rs.m_star;
      rows.push_back(row);
      continue;
    }
    const KrsbShape shape{K, branching};
    std::optional<std::pair<HierarchicalMeasure, RsbExponents>> start;
    if (parent) {
      auto p = *parent;
      while (p.first.depth() < K + 1) p = embed_deeper(p.first, p.second, branching);
      start = std::move(p);
    } else if (rs_m) {
      start = embed_rs(*rs_m, shape);
    }
    const auto res = optimize_krsb(shape, params, budget, rng.substream(K), start);
    row.branching = branching;
    row.value = res.value;
    row.warm_start = res.initial;
    row.evaluations = res.evaluations;
    row.trace = res.trace;
    row.best = std::make_pair(res.tree, res.x);
    parent = row.best;
    rows.push_back(row);
  }
  return rows;
}

void write_trace_csv(std::ostream& os, std::span<const TraceRow> trace) {
  os << "iteration,simplex_best,params_digest,se\n";
  os.precision(17);
  for (const auto& r : trace) os << r.iteration << ',' << r.best << ',' << r.digest << ',' << r.se << '\n';
}

}  // namespace rsb
