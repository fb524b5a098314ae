#include "rsb/common.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <cstdio>

namespace rsb {

EstimateWithError summarize(std::span<const double> samples) {
  EstimateWithError out;
  out.n_samples = samples.size();
  if (samples.empty()) return out;
  long double sum = 0.0L;
  for (double s : samples) sum += s;
  const long double mean = sum / static_cast<long double>(samples.size());
  out.value = static_cast<double>(mean);
  if (samples.size() < 2) return out;
  long double ss = 0.0L;
  for (double s : samples) {
    const long double d = s - mean;
    ss += d * d;
  }
  const long double var = ss / static_cast<long double>(samples.size() - 1);
  out.std_error = static_cast<double>(std::sqrt(var / static_cast<long double>(samples.size())));
  return out;
}

double combined_se(const EstimateWithError& a, const EstimateWithError& b) {
  return std::hypot(a.std_error, b.std_error);
}

double z_score(const EstimateWithError& a, const EstimateWithError& b) {
  const double se = combined_se(a, b);
  const double diff = a.value - b.value;
  if (se == 0.0) {
    if (diff == 0.0) return 0.0;
    return diff > 0 ? INFINITY : -INFINITY;
  }
  return diff / se;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(seed_, splitmix64(stream_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
}

std::mt19937_64 RngStream::engine() const {
  return std::mt19937_64(splitmix64(seed_ ^ splitmix64(stream_)));
}

double uniform_open(std::mt19937_64& gen) {
  // 53 random bits, shifted half a step off zero
  return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double u) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -INFINITY) return a;
  return a + std::log1p(std::exp(b - a));
}

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string_view version_string() { return RSB_VERSION; }

}  // namespace rsb
