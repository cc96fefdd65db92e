#include "sigjit/model.hpp"

#include <cmath>
#include <stdexcept>

#include "sigjit/numeric.hpp"

namespace sigjit {

ModelConfig::ModelConfig(int K_, int M_, double sigma_z_, double sigma_w_)
    : K(K_), M(M_), N(K_ * M_), sigma_z(sigma_z_), sigma_w(sigma_w_) {
  if (K <= 0) throw std::invalid_argument("K must be positive");
  if (M <= 0) throw std::invalid_argument("M must be positive");
  if (!(sigma_z >= 0.0) || !std::isfinite(sigma_z))
    throw std::invalid_argument("sigma_z must be finite and nonnegative");
  if (!(sigma_w > 0.0) || !std::isfinite(sigma_w))
    throw std::invalid_argument("sigma_w must be finite and positive");
}

double sinc(double t) {
  const double a = M_PI * t;
  if (std::fabs(a) < 1e-4) {
    const double a2 = a * a;
    return 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
  }
  return std::sin(a) / a;
}

void basis_row_into(const ModelConfig& cfg, int n, double z, double* out) {
  const double t = cfg.sample_time(n) + z;
  for (int k = 0; k < cfg.K; ++k) out[k] = sinc(t - k);
}

std::vector<double> basis_row(const ModelConfig& cfg, int n, double z) {
  std::vector<double> h(cfg.K);
  basis_row_into(cfg, n, z, h.data());
  return h;
}

Mat build_H(const ModelConfig& cfg, std::span<const double> z) {
  if (static_cast<int>(z.size()) != cfg.N)
    throw std::invalid_argument("jitter vector length must equal N");
  Mat h(cfg.N, cfg.K);
  for (int n = 0; n < cfg.N; ++n) basis_row_into(cfg, n, z[n], h.row(n));
  return h;
}

double signal_value(const ModelConfig& cfg, const SignalParams& x, double t) {
  if (static_cast<int>(x.x.size()) != cfg.K)
    throw std::invalid_argument("coefficient vector length must equal K");
  double s = 0.0;
  for (int k = 0; k < cfg.K; ++k) s += x.x[k] * sinc(t - k);
  return s;
}

SampleSet generate_samples(const ModelConfig& cfg, const SignalParams& x, std::uint64_t seed) {
  if (static_cast<int>(x.x.size()) != cfg.K)
    throw std::invalid_argument("coefficient vector length must equal K");
  NormalSampler rng(seed);
  SampleSet s;
  s.seed = seed;
  s.z.resize(cfg.N);
  s.w.resize(cfg.N);
  s.y.resize(cfg.N);
  for (int n = 0; n < cfg.N; ++n) s.z[n] = cfg.sigma_z * rng();
  for (int n = 0; n < cfg.N; ++n) s.w[n] = cfg.sigma_w * rng();
  std::vector<double> h(cfg.K);
  for (int n = 0; n < cfg.N; ++n) {
    basis_row_into(cfg, n, s.z[n], h.data());
    double v = 0.0;
    for (int k = 0; k < cfg.K; ++k) v += h[k] * x.x[k];
    s.y[n] = v + s.w[n];
  }
  return s;
}

}  // namespace sigjit
