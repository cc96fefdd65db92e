#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sigjit/likelihood.hpp"
#include "sigjit/linear.hpp"

namespace sigjit {

enum class EmInit { NoJitterLinear, Zero, TrueX, Random };

enum class EmTermination { MaxIter, DeltaX, DeltaLogLik, SolverFailure };

const char* to_string(EmTermination t);

struct EmSettings {
  int max_iter = 100;
  int nodes = 100;
  JitterFamily family = JitterFamily::Auto;
  double delta_x = 1e-8;       // stop when the iterate step drops below this
  double delta_loglik = 1e-8;  // stop when the log-likelihood gain drops below this
  EmInit init = EmInit::NoJitterLinear;
  std::vector<double> init_x;  // required for TrueX
  std::uint64_t init_seed = 0; // used for Random
};

// Accumulated E-step sufficient statistics: per-sample posterior basis means
// and the summed posterior second moments.
struct EmMoments {
  Mat EHy;     // N x K, row n = sum_j pi_nj h_n(z_j)
  Mat sum_S2;  // K x K, sum_n sum_j pi_nj h_n(z_j) h_n(z_j)'
};

struct EmTrace {
  std::vector<SignalParams> iterates;   // x^(0), x^(1), ...
  std::vector<double> logliks;          // matching quadrature log-likelihoods
  EmTermination termination = EmTermination::MaxIter;
  int iterations = 0;                   // M-steps actually applied
  double final_step = 0.0;              // last ||x^(i+1) - x^(i)||
  double solver_condition = 0.0;        // condition estimate on failure

  const SignalParams& final_x() const { return iterates.back(); }
  double final_loglik() const { return logliks.back(); }
};

// E-step at x_prev: posterior node weights per sample, reduced to moments.
EmMoments e_step_moments(const LikelihoodContext& ctx, const SampleSet& samples,
                         const SignalParams& x_prev);

// M-step: solve (sum_n S2_n) x = EHy' y.  Throws IllConditionedError when the
// system is singular or its condition exceeds 1e12.
SignalParams m_step(const ModelConfig& cfg, const EmMoments& moments,
                    const SampleSet& samples);

// Full EM loop on a prebuilt context.
EmTrace run_em(const LikelihoodContext& ctx, const SampleSet& samples,
               const EmSettings& settings);

// Convenience overload that builds the context from the settings.
EmTrace run_em(const ModelConfig& cfg, const SampleSet& samples,
               const EmSettings& settings);

}  // namespace sigjit
