#include "sigjit/crb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sigjit/numeric.hpp"

namespace sigjit {

Mat fisher_term(const LikelihoodContext& ctx, int n, double y_n, const SignalParams& x) {
  const int K = ctx.cfg.K;
  std::vector<double> g = score(ctx, n, y_n, x);
  Mat f(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) f(i, j) = g[i] * g[j];
  return f;
}

Mat fisher_incomplete(const ModelConfig& cfg, const SignalParams& x, int mc_draws,
                      std::uint64_t seed, int nodes, JitterFamily family) {
  if (mc_draws < 1) throw std::invalid_argument("mc_draws must be at least 1");
  if (static_cast<int>(x.x.size()) != cfg.K)
    throw std::invalid_argument("coefficient vector length must equal K");

  LikelihoodContext ctx(cfg, nodes, family);
  const int J = ctx.rule.order();
  const int K = cfg.K;
  const double inv_two_var = 1.0 / (2.0 * cfg.sigma_w * cfg.sigma_w);
  const double inv_var = 1.0 / (cfg.sigma_w * cfg.sigma_w);

  // Cumulative component probabilities for mixture sampling.
  std::vector<double> cum(J);
  double total = 0.0;
  for (int j = 0; j < J; ++j) {
    total += ctx.rule.weights[j];
    cum[j] = total;
  }
  for (int j = 0; j < J; ++j) cum[j] /= total;

  NormalSampler rng(seed);
  Mat info(K, K);
  std::vector<double> mu(J), t(J), g(K);
  for (int n = 0; n < cfg.N; ++n) {
    // Conditional means are fixed per sample index; cache them across draws.
    for (int j = 0; j < J; ++j) {
      const double* h = ctx.basis_at(n, j);
      double m = 0.0;
      for (int k = 0; k < K; ++k) m += h[k] * x.x[k];
      mu[j] = m;
    }
    for (int s = 0; s < mc_draws; ++s) {
      const double u = rng.uniform();
      const int comp = static_cast<int>(
          std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
      const int jc = std::min(comp, J - 1);
      const double y = mu[jc] + cfg.sigma_w * rng();

      double tmax = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < J; ++j) {
        const double d = y - mu[j];
        const double tj = ctx.log_w[j] - d * d * inv_two_var;
        t[j] = tj;
        if (tj > tmax) tmax = tj;
      }
      double denom = 0.0;
      for (int j = 0; j < J; ++j) {
        t[j] = std::exp(t[j] - tmax);
        denom += t[j];
      }
      const double inv_denom = 1.0 / denom;
      std::fill(g.begin(), g.end(), 0.0);
      for (int j = 0; j < J; ++j) {
        const double c = t[j] * inv_denom * (y - mu[j]) * inv_var;
        if (c == 0.0) continue;
        const double* h = ctx.basis_at(n, j);
        for (int k = 0; k < K; ++k) g[k] += c * h[k];
      }
      for (int i = 0; i < K; ++i)
        for (int j2 = 0; j2 < K; ++j2) info(i, j2) += g[i] * g[j2];
    }
  }

  const double scale = 1.0 / static_cast<double>(mc_draws);
  for (double& v : info.data) v *= scale;
  symmetrize(info);
  return info;
}

Mat fisher_complete(const ModelConfig& cfg, const QuadratureRule& rule) {
  const int J = rule.order();
  const int K = cfg.K;
  Mat info(K, K);
  std::vector<double> h(K);
  for (int n = 0; n < cfg.N; ++n) {
    for (int j = 0; j < J; ++j) {
      basis_row_into(cfg, n, rule.abscissas[j], h.data());
      const double w = rule.weights[j];
      for (int k = 0; k < K; ++k) {
        const double wh = w * h[k];
        for (int l = k; l < K; ++l) info(k, l) += wh * h[l];
      }
    }
  }
  const double inv_var = 1.0 / (cfg.sigma_w * cfg.sigma_w);
  for (int k = 0; k < K; ++k)
    for (int l = k; l < K; ++l) {
      const double v = info(k, l) * inv_var;
      info(k, l) = v;
      info(l, k) = v;
    }
  return info;
}

FisherEstimate crb_values(const ModelConfig& cfg, const SignalParams& x, int mc_draws,
                          std::uint64_t seed, int nodes, JitterFamily family) {
  FisherEstimate est;
  est.mc_draws = mc_draws;
  est.I_y = fisher_incomplete(cfg, x, mc_draws, seed, nodes, family);
  QuadratureRule rule = jitter_rule(cfg.sigma_z, nodes, family);
  est.I_yz = fisher_complete(cfg, rule);
  est.nodes = rule.order();

  Mat inv_y = spd_inverse_checked(est.I_y, 1e12, &est.cond_y);
  Mat inv_yz = spd_inverse_checked(est.I_yz, 1e12, &est.cond_yz);
  est.crb_y = trace(inv_y);
  est.crb_yz = trace(inv_yz);
  return est;
}

}  // namespace sigjit
