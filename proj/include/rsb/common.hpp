#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rsb {

/// Monte Carlo value with its standard error. Exact (dynamic programming)
/// evaluations carry std_error == 0.
struct EstimateWithError {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;

  static EstimateWithError exact(double v) { return {v, 0.0, 0}; }
};

/// Sample budget for nested Monte Carlo: `outer` independent outer samples,
/// inner[g] conditional samples at nesting depth g (the last entry repeats).
struct NestedPlan {
  std::size_t outer = 4096;
  std::vector<std::size_t> inner = {256};
  /// Latin-hypercube stratification of inner uniforms per copy and level.
  bool stratified = true;
  /// Run outer samples on all OpenMP threads (results are identical either way).
  bool parallel = true;

  std::size_t inner_at(std::size_t depth) const {
    return inner.empty() ? 1 : (depth < inner.size() ? inner[depth] : inner.back());
  }
};

/// Mean and standard error (sample std / sqrt(n)) of a sequence, summed in
/// index order so the result is independent of how the samples were produced.
EstimateWithError summarize(std::span<const double> samples);

/// sqrt(se_a^2 + se_b^2)
double combined_se(const EstimateWithError& a, const EstimateWithError& b);

/// (a - b) / combined_se, or 0 when both are exact and equal.
double z_score(const EstimateWithError& a, const EstimateWithError& b);

/// Seeded, splittable random stream. Every parallel task derives its own
/// substream from (master seed, index), so results never depend on the
/// thread count or scheduling order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  RngStream substream(std::uint64_t index) const;
  std::mt19937_64 engine() const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Uniform double in the open interval (0,1).
double uniform_open(std::mt19937_64& gen);

/// Standard normal CDF.
double normal_cdf(double z);
/// Inverse of normal_cdf on (0,1).
double normal_quantile(double u);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b);

/// FNV-1a 64-bit digest rendered as 16 hex characters.
std::string digest_hex(std::string_view bytes);

/// Version string baked in at configure time (git describe).
std::string_view version_string();

}  // namespace rsb
