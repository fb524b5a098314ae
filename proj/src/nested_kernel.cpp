#include "nested_layout.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <string>

namespace rsb {

namespace detail {

NestedLayout make_layout(const WienerFunctional& psi, const DiscreteParisiMeasure& mu, const std::vector<double>& dx) {
  psi.validate();
  const auto& lv = mu.levels();
  if (!dx.empty() && dx.size() != lv.size())
    throw std::invalid_argument("nested expectation: direction has " + std::to_string(dx.size()) +
                                " entries, measure has " + std::to_string(lv.size()) + " levels");
  NestedLayout out;
  out.copies = psi.copies;
  out.natives = psi.grid.size();
  out.kind = psi.kind;
  const auto& g = psi.grid;
  const double last = g.back();

  for (std::size_t l = 1; l < lv.size(); ++l) {
    const double a = lv[l - 1].first, b = lv[l].first;
    if (!(b > a) || a >= last) continue;
    const double x = lv[l].second;
    const double d = dx.empty() ? 0.0 : dx[l];
    if (x == 0.0 && d != 0.0)
      throw std::invalid_argument("nested expectation: direction moves a level with x = 0");
    double s = a;
    while (s < b && s < last) {
      // native increment containing (s, ...]
      const auto t = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), s) - g.begin());
      const double e = std::min(b, g[t]);
      out.pieces.push_back(Piece{s, e, x, d, t, std::sqrt((e - s) / (g[t] - g[t - 1]))});
      s = e;
    }
  }

  std::vector<std::size_t> per_native(out.natives, 0);
  for (const auto& p : out.pieces) ++per_native[p.native];
  for (std::size_t t = 1; t < out.natives; ++t) {
    if (per_native[t] == 0) throw std::logic_error("nested expectation: native increment not covered");
    if (per_native[t] > 1) out.direct = false;
  }

  for (std::size_t p = 0; p < out.pieces.size(); ++p) {
    const auto& pc = out.pieces[p];
    if (!out.groups.empty() && out.groups.back().x == pc.x && out.groups.back().dx == pc.dx) {
      out.groups.back().pieces.push_back(p);
    } else {
      out.groups.push_back(Group{{p}, pc.x, pc.dx});
    }
  }
  return out;
}

void draw_group_uniforms(std::mt19937_64& gen, std::size_t copies, std::size_t group_pieces, std::size_t N,
                         bool stratified, std::vector<double>& table) {
  table.resize(copies * group_pieces * N);
  std::vector<std::size_t> perm(N);
  for (std::size_t r = 0; r < copies * group_pieces; ++r) {
    double* row = table.data() + r * N;
    if (stratified && N > 1) {
      for (std::size_t j = 0; j < N; ++j) perm[j] = j;
      for (std::size_t k = N - 1; k > 0; --k) std::swap(perm[k], perm[gen() % (k + 1)]);
      for (std::size_t j = 0; j < N; ++j)
        row[j] = (static_cast<double>(perm[j]) + uniform_open(gen)) / static_cast<double>(N);
    } else {
      for (std::size_t j = 0; j < N; ++j) row[j] = uniform_open(gen);
    }
  }
}

void aggregate_native(const NestedLayout& layout, const std::vector<double>& piece_z, std::vector<double>& native) {
  const std::size_t P = layout.pieces.size();
  for (std::size_t c = 0; c < layout.copies; ++c) {
    double* row = native.data() + c * layout.natives;
    for (std::size_t t = 1; t < layout.natives; ++t) row[t] = 0.0;
    for (std::size_t p = 0; p < P; ++p) row[layout.pieces[p].native] += layout.pieces[p].scale * piece_z[c * P + p];
    if (layout.kind == NoiseKind::uniform)
      for (std::size_t t = 1; t < layout.natives; ++t) row[t] = normal_cdf(row[t]);
  }
}

}  // namespace detail

namespace {

using detail::NestedLayout;

struct Level {
  std::vector<double> uniforms;
  std::vector<double> phi, tilt, dmu;  // N x M
};

class Kernel {
 public:
  Kernel(const WienerFunctional& psi, const NestedLayout& layout, const NestedPlan& plan, const NestedRequest& req)
      : psi_(psi), layout_(layout), plan_(plan), req_(req), M_(psi.outputs), levels_(layout.groups.size()) {
    native_.resize(layout.copies * layout.natives);
    piece_z_.resize(layout.copies * layout.pieces.size());
    leaf_.resize(req.passenger ? 2 * M_ : M_);
    path_.resize(M_ * (layout.groups.size() + 1));
  }

  void run(std::size_t outer_index, std::mt19937_64& gen, double* phi, double* tilt, double* dmu, double* path) {
    outer_ = outer_index;
    for (std::size_t c = 0; c < layout_.copies; ++c)
      native_[c * layout_.natives] = detail::to_kind(uniform_open(gen), layout_.kind);
    node(0, gen, phi, tilt, dmu, true);
    if (path) std::copy(path_.begin(), path_.end(), path);
  }

 private:
  void write_piece(std::size_t p, std::size_t c, double u) {
    if (layout_.direct)
      native_[c * layout_.natives + layout_.pieces[p].native] = detail::to_kind(u, layout_.kind);
    else
      piece_z_[c * layout_.pieces.size() + p] = normal_quantile(u);
  }

  void leaf(double* phi, double* tilt, double* dmu, bool on_path) {
    if (!layout_.direct) detail::aggregate_native(layout_, piece_z_, native_);
    psi_.eval(outer_, native_, leaf_);
    for (std::size_t k = 0; k < M_; ++k) {
      if (!(std::abs(leaf_[k]) <= req_.magnitude_guard))
        throw std::domain_error("nested expectation: |Psi| exceeds the magnitude guard (unbounded functional?)");
      phi[k] = leaf_[k];
      tilt[k] = req_.passenger ? leaf_[M_ + k] : 0.0;
      dmu[k] = 0.0;
    }
    if (on_path) {
      const std::size_t G = layout_.groups.size();
      for (std::size_t k = 0; k < M_; ++k) path_[k * (G + 1) + G] = phi[k];
    }
  }

  void node(std::size_t g, std::mt19937_64& gen, double* phi, double* tilt, double* dmu, bool on_path) {
    if (g == layout_.groups.size()) {
      leaf(phi, tilt, dmu, on_path);
      return;
    }
    const auto& group = layout_.groups[g];
    const std::size_t N = plan_.inner_at(g);
    const std::size_t gp = group.pieces.size();
    auto& lv = levels_[g];
    detail::draw_group_uniforms(gen, layout_.copies, gp, N, plan_.stratified, lv.uniforms);
    lv.phi.resize(N * M_);
    lv.tilt.resize(N * M_);
    lv.dmu.resize(N * M_);
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t c = 0; c < layout_.copies; ++c)
        for (std::size_t p = 0; p < gp; ++p) write_piece(group.pieces[p], c, lv.uniforms[(c * gp + p) * N + j]);
      node(g + 1, gen, lv.phi.data() + j * M_, lv.tilt.data() + j * M_, lv.dmu.data() + j * M_, on_path && j == 0);
    }
    const double x = group.x;
    const double inv_n = 1.0 / static_cast<double>(N);
    for (std::size_t k = 0; k < M_; ++k) {
      if (x == 0.0) {
        double s = 0.0, a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
          s += lv.phi[j * M_ + k];
          a += lv.tilt[j * M_ + k];
          b += lv.dmu[j * M_ + k];
        }
        phi[k] = s * inv_n;
        tilt[k] = a * inv_n;
        dmu[k] = b * inv_n;
        continue;
      }
      double mx = -INFINITY;
      for (std::size_t j = 0; j < N; ++j) mx = std::max(mx, x * lv.phi[j * M_ + k]);
      double S = 0.0;
      for (std::size_t j = 0; j < N; ++j) S += std::exp(x * lv.phi[j * M_ + k] - mx);
      const double value = (mx + std::log(S * inv_n)) / x;
      const double ratio = group.dx / x;
      double a = 0.0, b = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        const double w = std::exp(x * lv.phi[j * M_ + k] - mx) / S;
        a += w * lv.tilt[j * M_ + k];
        b += w * (lv.dmu[j * M_ + k] + ratio * (lv.phi[j * M_ + k] - value));
      }
      phi[k] = value;
      tilt[k] = a;
      dmu[k] = b;
    }
    if (on_path) {
      const std::size_t G = layout_.groups.size();
      for (std::size_t k = 0; k < M_; ++k) path_[k * (G + 1) + g] = phi[k];
    }
  }

  const WienerFunctional& psi_;
  const NestedLayout& layout_;
  const NestedPlan& plan_;
  const NestedRequest& req_;
  std::size_t M_;
  std::size_t outer_ = 0;
  std::vector<Level> levels_;
  std::vector<double> native_, piece_z_, leaf_, path_;
};

}  // namespace

NestedOutput nested_expectation(const WienerFunctional& psi, const DiscreteParisiMeasure& mu, const NestedPlan& plan,
                                const RngStream& rng, const NestedRequest& request) {
  const auto layout = detail::make_layout(psi, mu, request.dx);
  if (plan.outer == 0) throw std::invalid_argument("nested expectation: plan.outer must be positive");
  const std::size_t M = psi.outputs;
  const std::size_t G = layout.groups.size();

  NestedOutput out;
  out.outer = plan.outer;
  out.outputs = M;
  out.groups = G;
  for (const auto& g : layout.groups) out.group_x.push_back(g.x);
  out.phi0.resize(plan.outer * M);
  out.tilted.resize(plan.outer * M);
  out.mu_derivative.resize(plan.outer * M);
  if (request.record_path) out.path.resize(plan.outer * M * (G + 1));

  std::exception_ptr failure;
  std::atomic<bool> failed{false};
#pragma omp parallel if (plan.parallel)
  {
    Kernel kernel(psi, layout, plan, request);
#pragma omp for schedule(dynamic, 8)
    for (std::size_t i = 0; i < plan.outer; ++i) {
      if (failed.load(std::memory_order_relaxed)) continue;
      try {
        auto gen = rng.substream(i).engine();
        kernel.run(i, gen, out.phi0.data() + i * M, out.tilted.data() + i * M, out.mu_derivative.data() + i * M,
                   request.record_path ? out.path.data() + i * M * (G + 1) : nullptr);
      } catch (...) {
#pragma omp critical(rsb_nested_failure)
        if (!failure) failure = std::current_exception();
        failed = true;
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace rsb
