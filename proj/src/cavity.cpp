#include "rsb/cavity.hpp"

#include "rsb/common.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rsb {

namespace {

constexpr double kLogFloor = 1e-300;
std::atomic<std::uint64_t> g_clamps{0};

double clamped_log(double v) {
  if (v < kLogFloor) {
    g_clamps.fetch_add(1, std::memory_order_relaxed);
    v = kLogFloor;
  }
  return std::log(v);
}

double log_cosh(double a) {
  const double x = std::abs(a);
  return x + std::log1p(std::exp(-2.0 * x)) - std::log(2.0);
}

// log(2 cosh a + 2 m sinh a) = log(e^a (1+m) + e^{-a} (1-m))
double log_vertex_factor(double a, double m) {
  const double x = std::abs(a);
  const double sm = a >= 0 ? m : -m;
  return x + clamped_log((1.0 + sm) + std::exp(-2.0 * x) * (1.0 - sm));
}

void check_inputs(const ModelParams& params, const CouplingSample& J, std::span<const double> m) {
  params.validate();
  if (J.values.size() != params.coupling_count())
    throw std::invalid_argument("cavity: coupling sample has " + std::to_string(J.values.size()) +
                                " entries, expected " + std::to_string(params.coupling_count()));
  for (int j : J.values)
    if (j != 1 && j != -1) throw std::invalid_argument("cavity: couplings must be +1 or -1");
  if (m.size() != params.field_dim())
    throw std::invalid_argument("cavity: magnetization vector has " + std::to_string(m.size()) +
                                " entries, expected " + std::to_string(params.field_dim()));
  for (double v : m)
    if (!(std::abs(v) <= 1.0)) throw std::domain_error("cavity: magnetization outside [-1,1]");
}

// coupling used on the second vertex leg for index i < c
int second_leg_coupling(const ModelParams& params, const CouplingSample& J, std::size_t i) {
  return params.vertex_uses_2c_couplings ? J.values[i + static_cast<std::size_t>(params.connectivity)]
                                         : J.values[i];
}

}  // namespace

void ModelParams::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("model: beta must be finite and non-negative");
  if (connectivity < 1) throw std::invalid_argument("model: connectivity must be >= 1");
}

double psi_edge(const ModelParams& params, const CouplingSample& J, std::span<const double> m) {
  check_inputs(params, J, m);
  const std::size_t c = static_cast<std::size_t>(params.connectivity);
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const double a = params.beta * J.values[i];
    total += std::log(4.0) + log_cosh(a) + clamped_log(1.0 + m[i] * m[i + c] * std::tanh(a));
  }
  return total;
}

double psi_vertex(const ModelParams& params, const CouplingSample& J, std::span<const double> m) {
  check_inputs(params, J, m);
  const std::size_t c = static_cast<std::size_t>(params.connectivity);
  // The tau sum factorizes into one factor per vertex leg.
  double legs = 0.0;
  for (int leg = 0; leg < 2; ++leg) {
    double plus = 0.0, minus = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      const int j = leg == 0 ? J.values[i] : second_leg_coupling(params, J, i);
      const double mi = m[i + (leg == 0 ? 0 : c)];
      const double a = params.beta * j;
      plus += log_vertex_factor(a, mi);
      minus += log_vertex_factor(-a, mi);
    }
    legs += log_add_exp(plus, minus);
  }
  return legs;
}

double psi(PsiKind kind, const ModelParams& params, const CouplingSample& J, std::span<const double> m) {
  return kind == PsiKind::edge ? psi_edge(params, J, m) : psi_vertex(params, J, m);
}

double psi_bruteforce(PsiKind kind, const ModelParams& params, const CouplingSample& J,
                      std::span<const double> m) {
  check_inputs(params, J, m);
  const std::size_t n = params.field_dim();
  if (n > 24) throw std::invalid_argument("psi_bruteforce: 2c must be <= 24");
  const std::size_t c = n / 2;
  double jabs = 0.0;
  for (std::size_t i = 0; i < c; ++i) jabs += std::abs(J.values[i]);
  const double shift = params.beta * (kind == PsiKind::edge ? jabs : 2.0 * jabs);

  long double total = 0.0L;
  std::vector<int> sigma(n);
  for (std::uint64_t cfg = 0; cfg < (std::uint64_t{1} << n); ++cfg) {
    long double prior = 1.0L;
    for (std::size_t i = 0; i < n; ++i) {
      sigma[i] = (cfg >> i) & 1 ? -1 : 1;
      prior *= 1.0L + m[i] * sigma[i];
    }
    if (prior == 0.0L) continue;
    long double boltzmann = 0.0L;
    if (kind == PsiKind::edge) {
      double e = 0.0;
      for (std::size_t i = 0; i < c; ++i) e += J.values[i] * sigma[i] * sigma[i + c];
      boltzmann = std::exp(static_cast<long double>(params.beta * e - shift));
    } else {
      for (int t1 : {-1, 1})
        for (int t2 : {-1, 1}) {
          double e = 0.0;
          for (std::size_t i = 0; i < c; ++i)
            e += J.values[i] * t1 * sigma[i] + second_leg_coupling(params, J, i) * t2 * sigma[i + c];
          boltzmann += std::exp(static_cast<long double>(params.beta * e - shift));
        }
    }
    total += boltzmann * prior;
  }
  return shift + clamped_log(static_cast<double>(total));
}

CouplingSample sample_couplings(const ModelParams& params, std::mt19937_64& gen) {
  params.validate();
  CouplingSample out;
  out.values.resize(params.coupling_count());
  for (auto& v : out.values) v = (gen() >> 63) ? 1 : -1;
  return out;
}

CouplingSample coupling_from_index(const ModelParams& params, std::uint64_t index) {
  CouplingSample out;
  out.values.resize(params.coupling_count());
  for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] = (index >> k) & 1 ? -1 : 1;
  return out;
}

std::uint64_t coupling_configurations(const ModelParams& params) {
  const auto count = params.coupling_count();
  if (count >= 63) throw std::invalid_argument("too many couplings to enumerate");
  return std::uint64_t{1} << count;
}

std::uint64_t cavity_clamp_count() { return g_clamps.load(); }

CavityTable::CavityTable(const ModelParams& params, const CouplingSample& J,
                         std::span<const double> leaf_values)
    : c_(static_cast<std::size_t>(params.connectivity)), leaves_(leaf_values.size()) {
  params.validate();
  if (J.values.size() != params.coupling_count())
    throw std::invalid_argument("CavityTable: coupling sample size mismatch");
  for (double v : leaf_values)
    if (!(std::abs(v) <= 1.0)) throw std::domain_error("CavityTable: leaf value outside [-1,1]");

  const std::size_t L = leaves_;
  edge_terms_.resize(c_ * L * L);
  vertex_terms_.resize(2 * 2 * c_ * L);
  for (std::size_t i = 0; i < c_; ++i) {
    const double a = params.beta * J.values[i];
    const double base = std::log(4.0) + log_cosh(a);
    const double t = std::tanh(a);
    for (std::size_t x = 0; x < L; ++x)
      for (std::size_t y = 0; y < L; ++y)
        edge_terms_[(i * L + x) * L + y] = base + clamped_log(1.0 + leaf_values[x] * leaf_values[y] * t);
  }
  for (std::size_t leg = 0; leg < 2; ++leg)
    for (std::size_t tau = 0; tau < 2; ++tau)
      for (std::size_t i = 0; i < c_; ++i) {
        const int j = leg == 0 ? J.values[i] : second_leg_coupling(params, J, i);
        const double a = params.beta * j * (tau == 0 ? 1.0 : -1.0);
        for (std::size_t x = 0; x < L; ++x)
          vertex_terms_[((leg * 2 + tau) * c_ + i) * L + x] = log_vertex_factor(a, leaf_values[x]);
      }
}

double CavityTable::edge(std::span<const std::size_t> idx) const {
  double total = 0.0;
  for (std::size_t i = 0; i < c_; ++i) total += edge_terms_[(i * leaves_ + idx[i]) * leaves_ + idx[i + c_]];
  return total;
}

double CavityTable::vertex(std::span<const std::size_t> idx) const {
  double legs = 0.0;
  for (std::size_t leg = 0; leg < 2; ++leg) {
    double plus = 0.0, minus = 0.0;
    const double* tp = &vertex_terms_[((leg * 2 + 0) * c_) * leaves_];
    const double* tm = &vertex_terms_[((leg * 2 + 1) * c_) * leaves_];
    for (std::size_t i = 0; i < c_; ++i) {
      const std::size_t x = idx[i + leg * c_];
      plus += tp[i * leaves_ + x];
      minus += tm[i * leaves_ + x];
    }
    legs += log_add_exp(plus, minus);
  }
  return legs;
}

}  // namespace rsb
