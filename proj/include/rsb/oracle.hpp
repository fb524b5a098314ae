#pragma once

#include "rsb/common.hpp"

#include <json.hpp>

#include <random>
#include <span>
#include <utility>
#include <vector>

namespace rsb {

/// Simple undirected graph; edges stored once with i < j.
struct RegularGraph {
  std::size_t n_vertices = 0;
  std::vector<std::pair<int, int>> edges;

  std::vector<int> degrees() const;
  bool is_simple() const;
};

inline constexpr std::size_t kMaxRrgRestarts = 100000;
inline constexpr std::size_t kMaxEnumerationVertices = 24;

/// Configuration-model pairing, restarted from scratch until simple.
RegularGraph sample_rrg(std::size_t n_vertices, int c, std::mt19937_64& gen);

/// (1/N) log sum_sigma exp(beta sum_{(ij)} J_ij sigma_i sigma_j) for J_ij = +-1,
/// by Gray-code enumeration with spin N-1 pinned (global flip symmetry).
double exact_log_partition(const RegularGraph& graph, std::span<const int> couplings, double beta);

/// Same quantity by direct enumeration of all 2^N configurations.
double exact_log_partition_reference(const RegularGraph& graph, std::span<const int> couplings, double beta);

/// Mean and SE of exact_log_partition over i.i.d. (graph, couplings) draws.
EstimateWithError quenched_estimate(std::size_t n_vertices, int c, double beta, std::size_t n_samples,
                                    const RngStream& rng, bool parallel = true);

void to_json(nlohmann::json& j, const RegularGraph& g);
RegularGraph graph_from_json(const nlohmann::json& j);

}  // namespace rsb
