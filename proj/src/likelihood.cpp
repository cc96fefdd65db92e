#include "sigjit/likelihood.hpp"

#include <cmath>
#include <limits>

namespace sigjit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPdfFloor = 1e-300;

double log_normalizer(double sigma_w) {
  return -0.5 * std::log(2.0 * M_PI) - std::log(sigma_w);
}

// Basis row for node j: table lookup or on-the-fly evaluation into ws.h.
const double* node_basis(const LikelihoodContext& ctx, int n, int j,
                         LikelihoodWorkspace& ws) {
  if (ctx.has_table) return ctx.basis_at(n, j);
  if (static_cast<int>(ws.h.size()) != ctx.cfg.K) ws.h.resize(ctx.cfg.K);
  basis_row_into(ctx.cfg, n, ctx.rule.abscissas[j], ws.h.data());
  return ws.h.data();
}

}  // namespace

LikelihoodContext::LikelihoodContext(const ModelConfig& cfg_, int nodes_,
                                     JitterFamily family, bool precompute_basis)
    : cfg(cfg_), rule(jitter_rule(cfg_.sigma_z, nodes_, family)) {
  const int J = rule.order();
  log_w.resize(J);
  for (int j = 0; j < J; ++j)
    log_w[j] = rule.weights[j] > 0.0 ? std::log(rule.weights[j]) : kNegInf;
  if (precompute_basis) {
    basis = Mat(cfg.N * J, cfg.K);
    for (int n = 0; n < cfg.N; ++n)
      for (int j = 0; j < J; ++j)
        basis_row_into(cfg, n, rule.abscissas[j], basis.row(n * J + j));
    has_table = true;
  }
}

double marginal_log_pdf_ws(const LikelihoodContext& ctx, int n, double y_n,
                           const SignalParams& x, LikelihoodWorkspace& ws,
                           bool want_posterior) {
  const int J = ctx.rule.order();
  const int K = ctx.cfg.K;
  if (n < 0 || n >= ctx.cfg.N) throw std::out_of_range("sample index out of range");
  if (static_cast<int>(x.x.size()) != K)
    throw std::invalid_argument("coefficient vector length must equal K");
  const double inv_two_var = 1.0 / (2.0 * ctx.cfg.sigma_w * ctx.cfg.sigma_w);
  if (static_cast<int>(ws.mu.size()) < J) ws.mu.resize(J);
  if (static_cast<int>(ws.pi.size()) < J) ws.pi.resize(J);

  // Node log-terms t_j = log w_j - (y - mu_j)^2 / (2 sigma_w^2), peak tracked.
  double tmax = kNegInf;
  for (int j = 0; j < J; ++j) {
    const double* h = node_basis(ctx, n, j, ws);
    double m = 0.0;
    for (int k = 0; k < K; ++k) m += h[k] * x.x[k];
    ws.mu[j] = m;
    const double d = y_n - m;
    const double t = ctx.log_w[j] - d * d * inv_two_var;
    ws.pi[j] = t;
    if (t > tmax) tmax = t;
  }

  if (tmax == kNegInf) {
    if (want_posterior)
      throw DegenerateSampleError("all mixture components underflowed");
    return kNegInf;
  }

  double denom = 0.0;
  for (int j = 0; j < J; ++j) {
    const double r = std::exp(ws.pi[j] - tmax);
    ws.pi[j] = r;
    denom += r;
  }
  if (want_posterior) {
    const double inv = 1.0 / denom;
    for (int j = 0; j < J; ++j) ws.pi[j] *= inv;
  }
  return tmax + std::log(denom) + log_normalizer(ctx.cfg.sigma_w);
}

double marginal_log_pdf(const LikelihoodContext& ctx, int n, double y_n,
                        const SignalParams& x) {
  LikelihoodWorkspace ws;
  return marginal_log_pdf_ws(ctx, n, y_n, x, ws, false);
}

double marginal_pdf(const LikelihoodContext& ctx, int n, double y_n,
                    const SignalParams& x) {
  return std::exp(marginal_log_pdf(ctx, n, y_n, x));
}

void score_ws(const LikelihoodContext& ctx, int n, double y_n, const SignalParams& x,
              LikelihoodWorkspace& ws, std::span<double> g) {
  const int J = ctx.rule.order();
  const int K = ctx.cfg.K;
  marginal_log_pdf_ws(ctx, n, y_n, x, ws, true);
  const double inv_var = 1.0 / (ctx.cfg.sigma_w * ctx.cfg.sigma_w);
  for (int k = 0; k < K; ++k) g[k] = 0.0;
  for (int j = 0; j < J; ++j) {
    const double c = ws.pi[j] * (y_n - ws.mu[j]) * inv_var;
    if (c == 0.0) continue;
    const double* h = node_basis(ctx, n, j, ws);
    for (int k = 0; k < K; ++k) g[k] += c * h[k];
  }
}

std::vector<double> score(const LikelihoodContext& ctx, int n, double y_n,
                          const SignalParams& x) {
  LikelihoodWorkspace ws;
  std::vector<double> g(ctx.cfg.K);
  score_ws(ctx, n, y_n, x, ws, g);
  return g;
}

std::vector<double> marginal_pdf_grad(const LikelihoodContext& ctx, int n, double y_n,
                                      const SignalParams& x) {
  LikelihoodWorkspace ws;
  const double logp = marginal_log_pdf_ws(ctx, n, y_n, x, ws, false);
  std::vector<double> g(ctx.cfg.K, 0.0);
  if (logp == kNegInf) return g;
  const double p = std::exp(logp);
  std::vector<double> sc(ctx.cfg.K);
  score_ws(ctx, n, y_n, x, ws, sc);
  for (int k = 0; k < ctx.cfg.K; ++k) g[k] = p * sc[k];
  return g;
}

double log_likelihood(const LikelihoodContext& ctx, const SampleSet& samples,
                      const SignalParams& x) {
  if (static_cast<int>(samples.y.size()) != ctx.cfg.N)
    throw std::invalid_argument("sample vector length must equal N");
  LikelihoodWorkspace ws;
  const double floor_log = std::log(kPdfFloor);
  double ll = 0.0;
  for (int n = 0; n < ctx.cfg.N; ++n) {
    double t = marginal_log_pdf_ws(ctx, n, samples.y[n], x, ws, false);
    if (!(t > floor_log)) t = floor_log;
    ll += t;
  }
  return ll;
}

}  // namespace sigjit
