#include "nested_layout.hpp"

#include <cmath>
#include <stdexcept>

namespace rsb {

namespace {

struct NodeValue {
  std::vector<double> phi, tilt, dmu;
};

struct Reference {
  const WienerFunctional& psi;
  const detail::NestedLayout& layout;
  const NestedPlan& plan;
  const NestedRequest& req;
  std::size_t outer = 0;
  std::vector<double> native;
  std::vector<double> piece_z;
  std::vector<double> path;  // M x (G+1)

  NodeValue visit(std::size_t g, std::mt19937_64& gen, bool on_path) {
    const std::size_t M = psi.outputs;
    const std::size_t G = layout.groups.size();
    NodeValue out{std::vector<double>(M), std::vector<double>(M, 0.0), std::vector<double>(M, 0.0)};
    if (g == G) {
      if (!layout.direct) detail::aggregate_native(layout, piece_z, native);
      std::vector<double> vals(req.passenger ? 2 * M : M);
      psi.eval(outer, native, vals);
      for (std::size_t k = 0; k < M; ++k) {
        if (!(std::abs(vals[k]) <= req.magnitude_guard))
          throw std::domain_error("nested expectation: |Psi| exceeds the magnitude guard (unbounded functional?)");
        out.phi[k] = vals[k];
        if (req.passenger) out.tilt[k] = vals[M + k];
        if (on_path) path[k * (G + 1) + G] = vals[k];
      }
      return out;
    }
    const auto& group = layout.groups[g];
    const std::size_t N = plan.inner_at(g);
    const std::size_t gp = group.pieces.size();
    std::vector<double> u;
    detail::draw_group_uniforms(gen, layout.copies, gp, N, plan.stratified, u);

    std::vector<NodeValue> kids;
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t c = 0; c < layout.copies; ++c) {
        for (std::size_t p = 0; p < gp; ++p) {
          const std::size_t piece = group.pieces[p];
          const double uj = u[(c * gp + p) * N + j];
          if (layout.direct)
            native[c * layout.natives + layout.pieces[piece].native] = detail::to_kind(uj, layout.kind);
          else
            piece_z[c * layout.pieces.size() + piece] = normal_quantile(uj);
        }
      }
      kids.push_back(visit(g + 1, gen, on_path && j == 0));
    }

    for (std::size_t k = 0; k < M; ++k) {
      double value;
      std::vector<double> w(N, 1.0 / static_cast<double>(N));
      if (group.x == 0.0) {
        value = 0.0;
        for (const auto& kid : kids) value += kid.phi[k] / static_cast<double>(N);
      } else {
        double lse = -INFINITY;
        for (const auto& kid : kids) lse = log_add_exp(lse, group.x * kid.phi[k]);
        value = (lse - std::log(static_cast<double>(N))) / group.x;
        for (std::size_t j = 0; j < N; ++j) w[j] = std::exp(group.x * kids[j].phi[k] - lse);
      }
      out.phi[k] = value;
      for (std::size_t j = 0; j < N; ++j) {
        out.tilt[k] += w[j] * kids[j].tilt[k];
        if (group.x != 0.0)
          out.dmu[k] += w[j] * (kids[j].dmu[k] + group.dx / group.x * (kids[j].phi[k] - value));
        else
          out.dmu[k] += w[j] * kids[j].dmu[k];
      }
      if (on_path) path[k * (G + 1) + g] = value;
    }
    return out;
  }
};

}  // namespace

NestedOutput nested_expectation_reference(const WienerFunctional& psi, const DiscreteParisiMeasure& mu,
                                          const NestedPlan& plan, const RngStream& rng,
                                          const NestedRequest& request) {
  const auto layout = detail::make_layout(psi, mu, request.dx);
  if (plan.outer == 0) throw std::invalid_argument("nested expectation: plan.outer must be positive");
  const std::size_t M = psi.outputs;
  const std::size_t G = layout.groups.size();
  NestedOutput out;
  out.outer = plan.outer;
  out.outputs = M;
  out.groups = G;
  for (const auto& g : layout.groups) out.group_x.push_back(g.x);

  Reference ref{psi, layout, plan, request, 0, std::vector<double>(layout.copies * layout.natives),
                std::vector<double>(layout.copies * layout.pieces.size()), std::vector<double>(M * (G + 1))};
  for (std::size_t i = 0; i < plan.outer; ++i) {
    auto gen = rng.substream(i).engine();
    ref.outer = i;
    for (std::size_t c = 0; c < layout.copies; ++c)
      ref.native[c * layout.natives] = detail::to_kind(uniform_open(gen), layout.kind);
    const auto v = ref.visit(0, gen, true);
    out.phi0.insert(out.phi0.end(), v.phi.begin(), v.phi.end());
    out.tilted.insert(out.tilted.end(), v.tilt.begin(), v.tilt.end());
    out.mu_derivative.insert(out.mu_derivative.end(), v.dmu.begin(), v.dmu.end());
    if (request.record_path) out.path.insert(out.path.end(), ref.path.begin(), ref.path.end());
  }
  return out;
}

}  // namespace rsb
