#include "rsb/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace rsb {

std::vector<int> RegularGraph::degrees() const {
  std::vector<int> d(n_vertices, 0);
  for (const auto& [i, j] : edges) {
    ++d[i];
    ++d[j];
  }
  return d;
}

bool RegularGraph::is_simple() const {
  std::set<std::pair<int, int>> seen;
  for (auto [i, j] : edges) {
    if (i == j) return false;
    if (i > j) std::swap(i, j);
    if (!seen.emplace(i, j).second) return false;
  }
  return true;
}

RegularGraph sample_rrg(std::size_t n_vertices, int c, std::mt19937_64& gen) {
  if (c < 1) throw std::invalid_argument("sample_rrg: connectivity must be >= 1");
  if ((n_vertices * static_cast<std::size_t>(c)) % 2 != 0)
    throw std::invalid_argument("sample_rrg: n_vertices * c must be even");
  if (n_vertices <= static_cast<std::size_t>(c)) throw std::invalid_argument("sample_rrg: need n_vertices > c");

  std::vector<int> stubs;
  for (std::size_t v = 0; v < n_vertices; ++v) stubs.insert(stubs.end(), c, static_cast<int>(v));
  for (std::size_t attempt = 0; attempt < kMaxRrgRestarts; ++attempt) {
    for (std::size_t k = stubs.size() - 1; k > 0; --k) std::swap(stubs[k], stubs[gen() % (k + 1)]);
    RegularGraph g{n_vertices, {}};
    bool ok = true;
    std::set<std::pair<int, int>> seen;
    for (std::size_t s = 0; s < stubs.size() && ok; s += 2) {
      int a = stubs[s], b = stubs[s + 1];
      if (a > b) std::swap(a, b);
      ok = a != b && seen.emplace(a, b).second;
      g.edges.emplace_back(a, b);
    }
    if (ok) {
      std::sort(g.edges.begin(), g.edges.end());
      return g;
    }
  }
  throw std::runtime_error("sample_rrg: no simple pairing after " + std::to_string(kMaxRrgRestarts) + " restarts");
}

namespace {

void check_instance(const RegularGraph& graph, std::span<const int> couplings, double beta) {
  if (graph.n_vertices == 0 || graph.n_vertices > kMaxEnumerationVertices)
    throw std::invalid_argument("exact_log_partition: need 1 <= N <= " + std::to_string(kMaxEnumerationVertices));
  if (couplings.size() != graph.edges.size())
    throw std::invalid_argument("exact_log_partition: one coupling per edge required");
  for (int J : couplings)
    if (J != 1 && J != -1) throw std::invalid_argument("exact_log_partition: couplings must be +1 or -1");
  for (const auto& [i, j] : graph.edges)
    if (i < 0 || j < 0 || static_cast<std::size_t>(std::max(i, j)) >= graph.n_vertices)
      throw std::invalid_argument("exact_log_partition: edge endpoint out of range");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("exact_log_partition: beta must be >= 0");
}

}  // namespace

double exact_log_partition(const RegularGraph& graph, std::span<const int> couplings, double beta) {
  check_instance(graph, couplings, beta);
  const std::size_t N = graph.n_vertices;
  const int m = static_cast<int>(graph.edges.size());

  std::vector<std::vector<std::pair<int, int>>> adj(N);  // (neighbour, J)
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto [i, j] = graph.edges[e];
    adj[i].emplace_back(j, couplings[e]);
    adj[j].emplace_back(i, couplings[e]);
  }

  // all spins +1: energy term sum J, local field h_k = sum_j J_kj sigma_j
  std::vector<int> sigma(N, 1), field(N, 0);
  int E = 0;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) E += couplings[e];
  for (std::size_t k = 0; k < N; ++k)
    for (const auto& [j, J] : adj[k]) field[k] += J;

  // E is an integer in [-m, m]; histogram it
  std::vector<std::uint64_t> hist(2 * m + 1, 0);
  ++hist[E + m];
  const std::uint64_t steps = std::uint64_t{1} << (N - 1);
  for (std::uint64_t s = 1; s < steps; ++s) {
    const auto k = static_cast<std::size_t>(std::countr_zero(s));  // Gray-code flip
    E -= 2 * sigma[k] * field[k];
    sigma[k] = -sigma[k];
    for (const auto& [j, J] : adj[k]) field[j] += 2 * J * sigma[k];
    ++hist[E + m];
  }

  long double Z = 0.0L;
  for (int e = -m; e <= m; ++e)
    if (hist[e + m]) Z += static_cast<long double>(hist[e + m]) * std::exp(static_cast<long double>(beta) * (e - m));
  const long double logZ = static_cast<long double>(beta) * m + std::log(2.0L * Z);
  return static_cast<double>(logZ / static_cast<long double>(N));
}

double exact_log_partition_reference(const RegularGraph& graph, std::span<const int> couplings, double beta) {
  check_instance(graph, couplings, beta);
  const std::size_t N = graph.n_vertices;
  double logZ = -INFINITY;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << N); ++s) {
    double H = 0.0;
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      const auto [i, j] = graph.edges[e];
      const int si = (s >> i) & 1 ? -1 : 1;
      const int sj = (s >> j) & 1 ? -1 : 1;
      H += couplings[e] * si * sj;
    }
    logZ = log_add_exp(logZ, beta * H);
  }
  return logZ / static_cast<double>(N);
}

EstimateWithError quenched_estimate(std::size_t n_vertices, int c, double beta, std::size_t n_samples,
                                    const RngStream& rng, bool parallel) {
  if (n_samples == 0) throw std::invalid_argument("quenched_estimate: n_samples must be positive");
  if (n_vertices > kMaxEnumerationVertices)
    throw std::invalid_argument("quenched_estimate: n_vertices above the enumeration limit");
  std::vector<double> values(n_samples);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::size_t s = 0; s < n_samples; ++s) {
    try {
      auto gen = rng.substream(s).engine();
      const auto graph = sample_rrg(n_vertices, c, gen);
      std::vector<int> J(graph.edges.size());
      for (auto& j : J) j = (gen() >> 63) ? -1 : 1;
      values[s] = exact_log_partition(graph, J, beta);
    } catch (...) {
#pragma omp critical(rsb_oracle_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return summarize(values);
}

void to_json(nlohmann::json& j, const RegularGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  j = {{"n", g.n_vertices}, {"edges", edges}};
}

RegularGraph graph_from_json(const nlohmann::json& j) {
  RegularGraph g;
  g.n_vertices = j.at("n").get<std::size_t>();
  for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  return g;
}

}  // namespace rsb
