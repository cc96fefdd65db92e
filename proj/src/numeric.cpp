#include "sigjit/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sigjit {

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  double m = v[0];
  for (double t : v)
    if (t > m) m = t;
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : v) s += std::exp(t - m);
  return m + std::log(s);
}

double NormalSampler::operator()() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double NormalSampler::uniform() {
  // 53-bit mantissa from the top bits of one engine word.
  return (gen_() >> 11) * 0x1.0p-53;
}

std::vector<double> normal_vector(NormalSampler& rng, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = rng();
  return v;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double t : v) s += t;
  return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double t : v) s += (t - m) * (t - m);
  return std::sqrt(s / static_cast<double>(n - 1));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace sigjit
