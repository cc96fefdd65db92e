#include "sigjit/linear.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sigjit {

namespace {

// Shared weighted normal-equation solve: argmin sum_n u_n (y_n - eh_n' x)^2.
// row_weights == nullptr means u_n = 1.  Both linear_unbiased and
// blue_diagnostic funnel through here so the x_assumed = 0 diagnostic case
// reproduces the unweighted result exactly.
SignalParams weighted_normal_solve(const Mat& eh, std::span<const double> y,
                                   const double* row_weights) {
  const int n_rows = eh.rows;
  const int k = eh.cols;
  Mat a(k, k);
  std::vector<double> b(k, 0.0);
  for (int n = 0; n < n_rows; ++n) {
    const double* row = eh.row(n);
    const double u = row_weights ? row_weights[n] : 1.0;
    for (int i = 0; i < k; ++i) {
      const double ui = u * row[i];
      b[i] += ui * y[n];
      for (int j = i; j < k; ++j) a(i, j) += ui * row[j];
    }
  }
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j) a(i, j) = a(j, i);

  SignalParams out;
  out.x = spd_solve(a, b);
  return out;
}

void check_samples(const ModelConfig& cfg, const SampleSet& samples) {
  if (static_cast<int>(samples.y.size()) != cfg.N)
    throw std::invalid_argument("sample vector length must equal N");
}

}  // namespace

ExpectedBasis expected_H(const ModelConfig& cfg, const QuadratureRule& rule) {
  const int J = rule.order();
  ExpectedBasis out;
  out.rule_order = J;
  out.EH = Mat(cfg.N, cfg.K);
  std::vector<double> h(cfg.K);
  for (int n = 0; n < cfg.N; ++n) {
    double* row = out.EH.row(n);
    for (int j = 0; j < J; ++j) {
      basis_row_into(cfg, n, rule.abscissas[j], h.data());
      const double w = rule.weights[j];
      for (int k = 0; k < cfg.K; ++k) row[k] += w * h[k];
    }
  }
  return out;
}

SignalParams linear_unbiased(const ModelConfig& cfg, const ExpectedBasis& eh,
                             const SampleSet& samples) {
  check_samples(cfg, samples);
  if (eh.EH.rows != cfg.N || eh.EH.cols != cfg.K)
    throw std::invalid_argument("expected basis shape mismatch");
  return weighted_normal_solve(eh.EH, samples.y, nullptr);
}

SignalParams linear_nojitter(const ModelConfig& cfg, const SampleSet& samples) {
  check_samples(cfg, samples);
  std::vector<double> zeros(cfg.N, 0.0);
  Mat h0 = build_H(cfg, zeros);
  return weighted_normal_solve(h0, samples.y, nullptr);
}

SignalParams blue_diagnostic(const ModelConfig& cfg, const SignalParams& x_assumed,
                             const SampleSet& samples, const QuadratureRule& rule) {
  check_samples(cfg, samples);
  if (static_cast<int>(x_assumed.x.size()) != cfg.K)
    throw std::invalid_argument("assumed coefficient vector length must equal K");

  ExpectedBasis eh = expected_H(cfg, rule);

  // Diagonal variance d_n = Var[h_n(z)' x_assumed] + sigma_w^2, scaled into
  // row weights u_n = sigma_w^2 / d_n so u_n == 1 exactly when x_assumed = 0.
  const int J = rule.order();
  const double var_w = cfg.sigma_w * cfg.sigma_w;
  std::vector<double> u(cfg.N);
  std::vector<double> h(cfg.K);
  for (int n = 0; n < cfg.N; ++n) {
    double m1 = 0.0, m2 = 0.0;
    for (int j = 0; j < J; ++j) {
      basis_row_into(cfg, n, rule.abscissas[j], h.data());
      double s = 0.0;
      for (int k = 0; k < cfg.K; ++k) s += h[k] * x_assumed.x[k];
      m1 += rule.weights[j] * s;
      m2 += rule.weights[j] * s * s;
    }
    const double var_s = std::max(m2 - m1 * m1, 0.0);
    u[n] = var_w / (var_s + var_w);
  }
  return weighted_normal_solve(eh.EH, samples.y, u.data());
}

}  // namespace sigjit
