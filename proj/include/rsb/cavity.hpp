#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace rsb {

/// Inverse temperature and connectivity of the 2-spin model on a c-regular
/// graph. The cavity-field dimension is n = 2c everywhere downstream.
struct ModelParams {
  double beta = 1.0;
  int connectivity = 3;
  /// When set, the second vertex leg of psi_vertex reads J_{i+c} instead of
  /// J_i, so a coupling sample has 2c entries. Off by default.
  bool vertex_uses_2c_couplings = false;

  void validate() const;
  std::size_t field_dim() const { return 2 * static_cast<std::size_t>(connectivity); }
  std::size_t coupling_count() const {
    return vertex_uses_2c_couplings ? field_dim() : static_cast<std::size_t>(connectivity);
  }
};

/// Rademacher couplings, each exactly +1 or -1.
struct CouplingSample {
  std::vector<int> values;
};

enum class PsiKind { edge, vertex };

double psi_edge(const ModelParams& params, const CouplingSample& J, std::span<const double> m);
double psi_vertex(const ModelParams& params, const CouplingSample& J, std::span<const double> m);
double psi(PsiKind kind, const ModelParams& params, const CouplingSample& J, std::span<const double> m);

/// Literal enumeration of the defining sums over sigma in {-1,1}^{2c} (and
/// tau in {-1,1}^2 for the vertex term). Reference implementation for tests;
/// requires 2c <= 24.
double psi_bruteforce(PsiKind kind, const ModelParams& params, const CouplingSample& J,
                      std::span<const double> m);

CouplingSample sample_couplings(const ModelParams& params, std::mt19937_64& gen);

/// The coupling vector whose bit k (LSB first) selects J_k = -1.
CouplingSample coupling_from_index(const ModelParams& params, std::uint64_t index);

/// Number of distinct coupling vectors, 2^{coupling_count}.
std::uint64_t coupling_configurations(const ModelParams& params);

/// Count of logarithm arguments clamped at 1e-300 since process start
/// (|m_i| == 1 can drive a factor to zero).
std::uint64_t cavity_clamp_count();

/// Per-coupling precomputation for evaluating psi at fields drawn from a
/// fixed finite set of values (tree leaves). Each call is a few table lookups
/// instead of transcendental evaluations.
class CavityTable {
 public:
  CavityTable(const ModelParams& params, const CouplingSample& J, std::span<const double> leaf_values);

  /// leaf_index has 2c entries indexing into the leaf value set.
  double edge(std::span<const std::size_t> leaf_index) const;
  double vertex(std::span<const std::size_t> leaf_index) const;

 private:
  std::size_t c_;
  std::size_t leaves_;
  std::vector<double> edge_terms_;    // [i][a][b] for pair (i, i+c)
  std::vector<double> vertex_terms_;  // [leg][tau][i][a]
};

}  // namespace rsb
