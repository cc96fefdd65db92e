#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "oracles.hpp"
#include "sigjit/em.hpp"
#include "sigjit/numeric.hpp"

using namespace sigjit;

namespace {

SampleSet seeded_samples(const ModelConfig& cfg, std::uint64_t seed,
                         std::vector<double>* x_out = nullptr) {
  NormalSampler rng(seed);
  const SignalParams x{normal_vector(rng, cfg.K)};
  if (x_out) *x_out = x.x;
  return generate_samples(cfg, x, rng.raw());
}

}  // namespace

TEST_CASE("m_step solves the accumulated normal equations") {
  const ModelConfig cfg(3, 2, 0.2, 0.1);
  NormalSampler rng(2);

  EmMoments m;
  m.EHy = Mat(cfg.N, cfg.K);
  for (double& v : m.EHy.data) v = rng();
  Mat g(cfg.N, cfg.K);
  for (double& v : g.data) v = rng();
  m.sum_S2 = Mat(cfg.K, cfg.K);
  for (int i = 0; i < cfg.K; ++i)
    for (int j = 0; j < cfg.K; ++j) {
      double s = i == j ? 2.0 : 0.0;
      for (int n = 0; n < cfg.N; ++n) s += g(n, i) * g(n, j);
      m.sum_S2(i, j) = s;
    }

  SampleSet samples;
  samples.y.resize(cfg.N);
  for (double& v : samples.y) v = rng();

  std::vector<std::vector<long double>> a(cfg.K, std::vector<long double>(cfg.K));
  std::vector<long double> b(cfg.K, 0.0L);
  for (int i = 0; i < cfg.K; ++i)
    for (int j = 0; j < cfg.K; ++j) a[i][j] = m.sum_S2(i, j);
  for (int n = 0; n < cfg.N; ++n)
    for (int k = 0; k < cfg.K; ++k) b[k] += static_cast<long double>(m.EHy(n, k)) * samples.y[n];
  const std::vector<double> want = oracle::solve_longdouble(a, b);

  const SignalParams got = m_step(cfg, m, samples);
  for (int k = 0; k < cfg.K; ++k)
    CHECK(got.x[k] == doctest::Approx(want[k]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("m_step rejects ill conditioned moment matrices") {
  const ModelConfig cfg(2, 1, 0.1, 0.1);
  EmMoments m;
  m.EHy = Mat(cfg.N, cfg.K);
  m.sum_S2 = Mat(2, 2);
  m.sum_S2(0, 0) = 1.0;
  m.sum_S2(1, 1) = 1e-14;
  SampleSet samples;
  samples.y.assign(cfg.N, 1.0);

  bool threw = false;
  try {
    m_step(cfg, m, samples);
  } catch (const IllConditionedError& err) {
    threw = true;
    CHECK(err.condition() == doctest::Approx(1e14).epsilon(1e-6));
  }
  CHECK(threw);
}

TEST_CASE("e_step moments match a direct posterior recomputation") {
  const ModelConfig cfg(3, 2, 0.3, 0.2);
  const LikelihoodContext ctx(cfg, 60);
  std::vector<double> x_true;
  const SampleSet samples = seeded_samples(cfg, 17, &x_true);
  const SignalParams x_prev{x_true};

  const EmMoments got = e_step_moments(ctx, samples, x_prev);

  const int J = ctx.nodes();
  Mat ehy(cfg.N, cfg.K), s2(cfg.K, cfg.K);
  for (int n = 0; n < cfg.N; ++n) {
    std::vector<long double> t(J);
    long double tmax = -1e400L;
    std::vector<std::vector<double>> hs(J);
    for (int j = 0; j < J; ++j) {
      hs[j] = basis_row(cfg, n, ctx.rule.abscissas[j]);
      long double mu = 0.0L;
      for (int k = 0; k < cfg.K; ++k) mu += static_cast<long double>(hs[j][k]) * x_prev.x[k];
      const long double d = samples.y[n] - mu;
      t[j] = std::log(static_cast<long double>(ctx.rule.weights[j])) -
             d * d / (2.0L * cfg.sigma_w * cfg.sigma_w);
      tmax = std::max(tmax, t[j]);
    }
    long double denom = 0.0L;
    for (int j = 0; j < J; ++j) denom += std::exp(t[j] - tmax);
    for (int j = 0; j < J; ++j) {
      const double p = static_cast<double>(std::exp(t[j] - tmax) / denom);
      for (int k = 0; k < cfg.K; ++k) {
        ehy(n, k) += p * hs[j][k];
        for (int l = 0; l < cfg.K; ++l) s2(k, l) += p * hs[j][k] * hs[j][l];
      }
    }
  }

  for (int n = 0; n < cfg.N; ++n)
    for (int k = 0; k < cfg.K; ++k)
      CHECK(got.EHy(n, k) == doctest::Approx(ehy(n, k)).epsilon(1e-11).scale(1e-3));
  for (int k = 0; k < cfg.K; ++k)
    for (int l = 0; l < cfg.K; ++l)
      CHECK(got.sum_S2(k, l) == doctest::Approx(s2(k, l)).epsilon(1e-11).scale(1e-3));
}

TEST_CASE("EM with zero jitter lands on the linear fit immediately") {
  const ModelConfig cfg(4, 2, 0.0, 0.15);
  const SampleSet samples = seeded_samples(cfg, 23);

  EmSettings settings;
  const EmTrace trace = run_em(cfg, samples, settings);
  CHECK(trace.termination == EmTermination::DeltaX);
  CHECK(trace.iterations == 1);
  CHECK(trace.final_step == 0.0);

  const SignalParams direct = linear_nojitter(cfg, samples);
  CHECK(std::memcmp(trace.final_x().x.data(), direct.x.data(),
                    direct.x.size() * sizeof(double)) == 0);
}

TEST_CASE("EM log-likelihood never decreases") {
  for (double sigma_z : {0.05, 0.2, 0.4}) {
    const ModelConfig cfg(4, 2, sigma_z, 0.1);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SampleSet samples = seeded_samples(cfg, 100 + seed);
      EmSettings settings;
      settings.max_iter = 30;
      const EmTrace trace = run_em(cfg, samples, settings);
      for (std::size_t i = 1; i < trace.logliks.size(); ++i)
        CHECK(trace.logliks[i] - trace.logliks[i - 1] >= -1e-6);
    }
  }
}

TEST_CASE("EM needs more iterations as jitter grows") {
  std::vector<double> medians;
  for (double sigma_z : {0.05, 0.15, 0.3}) {
    const ModelConfig cfg(4, 2, sigma_z, 0.1);
    std::vector<double> iters;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const SampleSet samples = seeded_samples(cfg, 300 + seed);
      EmSettings settings;
      settings.max_iter = 500;
      settings.delta_loglik = 0.0;
      const EmTrace trace = run_em(cfg, samples, settings);
      REQUIRE(trace.termination == EmTermination::DeltaX);
      iters.push_back(static_cast<double>(trace.iterations));
    }
    medians.push_back(median(iters));
  }
  CHECK(medians[0] <= medians[1]);
  CHECK(medians[1] <= medians[2]);
  CHECK(medians[0] < medians[2]);
}

TEST_CASE("initialization modes produce the documented first iterate") {
  const ModelConfig cfg(3, 2, 0.2, 0.1);
  const SampleSet samples = seeded_samples(cfg, 41);
  const LikelihoodContext ctx(cfg, 50);

  EmSettings settings;
  settings.max_iter = 0;

  settings.init = EmInit::Zero;
  EmTrace trace = run_em(ctx, samples, settings);
  CHECK(trace.iterations == 0);
  CHECK(trace.termination == EmTermination::MaxIter);
  for (double v : trace.final_x().x) CHECK(v == 0.0);

  settings.init = EmInit::NoJitterLinear;
  trace = run_em(ctx, samples, settings);
  const SignalParams nj = linear_nojitter(cfg, samples);
  CHECK(std::memcmp(trace.final_x().x.data(), nj.x.data(),
                    nj.x.size() * sizeof(double)) == 0);

  settings.init = EmInit::TrueX;
  CHECK_THROWS_AS(run_em(ctx, samples, settings), std::invalid_argument);
  settings.init_x = {0.5, -1.0, 2.0};
  trace = run_em(ctx, samples, settings);
  CHECK(trace.final_x().x == settings.init_x);

  settings.init = EmInit::Random;
  settings.init_seed = 77;
  trace = run_em(ctx, samples, settings);
  NormalSampler rng(77);
  std::vector<double> want = normal_vector(rng, cfg.K);
  const double scale = sample_std(samples.y);
  for (double& v : want) v *= scale;
  CHECK(std::memcmp(trace.final_x().x.data(), want.data(),
                    want.size() * sizeof(double)) == 0);

  settings.init_seed = 78;
  EmTrace other = run_em(ctx, samples, settings);
  CHECK(other.final_x().x != trace.final_x().x);
}

TEST_CASE("trace bookkeeping is internally consistent") {
  const ModelConfig cfg(3, 2, 0.25, 0.1);
  const SampleSet samples = seeded_samples(cfg, 59);

  EmSettings settings;
  settings.max_iter = 6;
  settings.delta_x = 0.0;
  settings.delta_loglik = 0.0;
  const EmTrace trace = run_em(cfg, samples, settings);

  CHECK(trace.termination == EmTermination::MaxIter);
  CHECK(trace.iterations == 6);
  REQUIRE(trace.iterates.size() == 7);
  REQUIRE(trace.logliks.size() == 7);
  const std::vector<double>& last = trace.iterates[6].x;
  const std::vector<double>& prev = trace.iterates[5].x;
  double step2 = 0.0;
  for (int k = 0; k < cfg.K; ++k) {
    const double d = last[k] - prev[k];
    step2 += d * d;
  }
  CHECK(trace.final_step == doctest::Approx(std::sqrt(step2)).epsilon(1e-14));
  CHECK(std::string(to_string(trace.termination)) == "max_iter");

  const LikelihoodContext ctx(cfg, settings.nodes);
  for (std::size_t i = 0; i < trace.iterates.size(); ++i)
    CHECK(trace.logliks[i] ==
          doctest::Approx(log_likelihood(ctx, samples, trace.iterates[i])).epsilon(1e-13));
}

TEST_CASE("delta_loglik termination fires when enabled") {
  const ModelConfig cfg(3, 2, 0.2, 0.1);
  const SampleSet samples = seeded_samples(cfg, 67);
  EmSettings settings;
  settings.max_iter = 400;
  settings.delta_x = 0.0;
  settings.delta_loglik = 1e-7;
  const EmTrace trace = run_em(cfg, samples, settings);
  CHECK(trace.termination == EmTermination::DeltaLogLik);
  CHECK(trace.iterations < 400);
}

TEST_CASE("config overload matches the explicit context overload") {
  const ModelConfig cfg(3, 2, 0.3, 0.1);
  const SampleSet samples = seeded_samples(cfg, 71);
  EmSettings settings;
  settings.max_iter = 10;
  const EmTrace a = run_em(cfg, samples, settings);
  const LikelihoodContext ctx(cfg, settings.nodes, settings.family);
  const EmTrace b = run_em(ctx, samples, settings);
  REQUIRE(a.iterates.size() == b.iterates.size());
  CHECK(std::memcmp(a.final_x().x.data(), b.final_x().x.data(),
                    cfg.K * sizeof(double)) == 0);
  CHECK(a.final_loglik() == b.final_loglik());
}

TEST_CASE("EM beats the jitter-blind fit under real jitter") {
  const ModelConfig cfg(4, 4, 0.3, 0.1);
  double mse_em = 0.0, mse_nj = 0.0;
  const int trials = 30;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x_true;
    const SampleSet samples = seeded_samples(cfg, 900 + t, &x_true);
    EmSettings settings;
    const EmTrace trace = run_em(cfg, samples, settings);
    const SignalParams nj = linear_nojitter(cfg, samples);
    for (int k = 0; k < cfg.K; ++k) {
      mse_em += (trace.final_x().x[k] - x_true[k]) * (trace.final_x().x[k] - x_true[k]);
      mse_nj += (nj.x[k] - x_true[k]) * (nj.x[k] - x_true[k]);
    }
  }
  CHECK(mse_em < mse_nj);
}
