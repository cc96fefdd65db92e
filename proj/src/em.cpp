#include "sigjit/em.hpp"

#include <cmath>
#include <stdexcept>

#include "sigjit/numeric.hpp"

namespace sigjit {

const char* to_string(EmTermination t) {
  switch (t) {
    case EmTermination::MaxIter: return "max_iter";
    case EmTermination::DeltaX: return "delta_x";
    case EmTermination::DeltaLogLik: return "delta_loglik";
    case EmTermination::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

EmMoments e_step_moments(const LikelihoodContext& ctx, const SampleSet& samples,
                         const SignalParams& x_prev) {
  const int N = ctx.cfg.N;
  const int K = ctx.cfg.K;
  const int J = ctx.rule.order();
  if (static_cast<int>(samples.y.size()) != N)
    throw std::invalid_argument("sample vector length must equal N");

  EmMoments m;
  m.EHy = Mat(N, K);
  m.sum_S2 = Mat(K, K);
  LikelihoodWorkspace ws;
  ws.h.resize(K);
  for (int n = 0; n < N; ++n) {
    marginal_log_pdf_ws(ctx, n, samples.y[n], x_prev, ws, true);
    double* s1 = m.EHy.row(n);
    for (int j = 0; j < J; ++j) {
      const double p = ws.pi[j];
      if (p == 0.0) continue;
      const double* h;
      if (ctx.has_table) {
        h = ctx.basis_at(n, j);
      } else {
        basis_row_into(ctx.cfg, n, ctx.rule.abscissas[j], ws.h.data());
        h = ws.h.data();
      }
      for (int k = 0; k < K; ++k) {
        const double ph = p * h[k];
        s1[k] += ph;
        for (int l = k; l < K; ++l) m.sum_S2(k, l) += ph * h[l];
      }
    }
  }
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < k; ++l) m.sum_S2(k, l) = m.sum_S2(l, k);
  return m;
}

SignalParams m_step(const ModelConfig& cfg, const EmMoments& moments,
                    const SampleSet& samples) {
  if (static_cast<int>(samples.y.size()) != cfg.N)
    throw std::invalid_argument("sample vector length must equal N");
  std::vector<double> b(cfg.K, 0.0);
  for (int n = 0; n < cfg.N; ++n) {
    const double* row = moments.EHy.row(n);
    for (int k = 0; k < cfg.K; ++k) b[k] += row[k] * samples.y[n];
  }
  SignalParams out;
  out.x = spd_solve(moments.sum_S2, b);
  return out;
}

namespace {

SignalParams initial_iterate(const LikelihoodContext& ctx, const SampleSet& samples,
                             const EmSettings& settings) {
  switch (settings.init) {
    case EmInit::NoJitterLinear:
      return linear_nojitter(ctx.cfg, samples);
    case EmInit::Zero:
      return SignalParams{std::vector<double>(ctx.cfg.K, 0.0)};
    case EmInit::TrueX: {
      if (static_cast<int>(settings.init_x.size()) != ctx.cfg.K)
        throw std::invalid_argument("TrueX init needs a length-K init_x");
      return SignalParams{settings.init_x};
    }
    case EmInit::Random: {
      NormalSampler rng(settings.init_seed);
      SignalParams p{normal_vector(rng, ctx.cfg.K)};
      const double scale = sample_std(samples.y);
      for (double& v : p.x) v *= scale;
      return p;
    }
  }
  throw std::invalid_argument("unknown init mode");
}

}  // namespace

EmTrace run_em(const LikelihoodContext& ctx, const SampleSet& samples,
               const EmSettings& settings) {
  if (settings.max_iter < 0) throw std::invalid_argument("max_iter must be nonnegative");

  EmTrace trace;
  SignalParams x = initial_iterate(ctx, samples, settings);
  trace.iterates.push_back(x);
  trace.logliks.push_back(log_likelihood(ctx, samples, x));
  trace.termination = EmTermination::MaxIter;

  for (int it = 0; it < settings.max_iter; ++it) {
    EmMoments moments = e_step_moments(ctx, samples, x);
    SignalParams next;
    try {
      next = m_step(ctx.cfg, moments, samples);
    } catch (const IllConditionedError& err) {
      trace.termination = EmTermination::SolverFailure;
      trace.solver_condition = err.condition();
      break;
    }

    double step2 = 0.0;
    for (int k = 0; k < ctx.cfg.K; ++k) {
      const double d = next.x[k] - x.x[k];
      step2 += d * d;
    }
    const double step = std::sqrt(step2);
    const double ll = log_likelihood(ctx, samples, next);
    const double gain = ll - trace.logliks.back();

    x = next;
    trace.iterates.push_back(x);
    trace.logliks.push_back(ll);
    trace.iterations = it + 1;
    trace.final_step = step;

    if (step < settings.delta_x) {
      trace.termination = EmTermination::DeltaX;
      break;
    }
    if (std::fabs(gain) < settings.delta_loglik) {
      trace.termination = EmTermination::DeltaLogLik;
      break;
    }
  }
  return trace;
}

EmTrace run_em(const ModelConfig& cfg, const SampleSet& samples,
               const EmSettings& settings) {
  LikelihoodContext ctx(cfg, settings.nodes, settings.family);
  return run_em(ctx, samples, settings);
}

}  // namespace sigjit
