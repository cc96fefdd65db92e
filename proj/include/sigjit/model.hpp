#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sigjit/linalg.hpp"

namespace sigjit {

// Observation model: a bandlimited signal with K sinc-basis coefficients,
// sampled at N = K·M nominal times n/M with Gaussian timing jitter of
// standard deviation sigma_z and additive noise of standard deviation
// sigma_w.  The basis period is fixed at T = 1.
struct ModelConfig {
  int K = 0;
  int M = 0;
  int N = 0;
  double sigma_z = 0.0;
  double sigma_w = 0.0;
  static constexpr double T = 1.0;

  ModelConfig(int K, int M, double sigma_z, double sigma_w);

  double sample_time(int n) const { return static_cast<double>(n) / M; }
};

struct SignalParams {
  std::vector<double> x;
};

// One realization of the observation process.  z and w hold the drawn jitter
// and noise values; estimators must not read them.
struct SampleSet {
  std::vector<double> y;
  std::vector<double> z;
  std::vector<double> w;
  std::uint64_t seed = 0;
};

// sin(pi t)/(pi t), with a Taylor branch near zero.
double sinc(double t);

// h_n(z): the K basis values sinc(n/M + z - k), k = 0..K-1.
std::vector<double> basis_row(const ModelConfig& cfg, int n, double z);
void basis_row_into(const ModelConfig& cfg, int n, double z, double* out);

// N x K matrix H(z) with rows h_n(z_n); z must have length N.
Mat build_H(const ModelConfig& cfg, std::span<const double> z);

// x(t) = sum_k x_k sinc(t - k)
double signal_value(const ModelConfig& cfg, const SignalParams& x, double t);

// Draw z ~ N(0, sigma_z^2 I), w ~ N(0, sigma_w^2 I) and form y = H(z)x + w.
// All N jitter values are drawn before the N noise values.
SampleSet generate_samples(const ModelConfig& cfg, const SignalParams& x, std::uint64_t seed);

}  // namespace sigjit
