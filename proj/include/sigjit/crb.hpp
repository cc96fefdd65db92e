#pragma once

#include <cstdint>

#include "sigjit/likelihood.hpp"

namespace sigjit {

// Per-sample Fisher information term: the score outer product
// grad log p(y_n; x) grad log p(y_n; x)'.
Mat fisher_term(const LikelihoodContext& ctx, int n, double y_n, const SignalParams& x);

// Monte Carlo Fisher information of the observed samples:
// (1/S) sum_n sum_s fisher_term at y_{n,s} drawn from the quadrature mixture.
Mat fisher_incomplete(const ModelConfig& cfg, const SignalParams& x, int mc_draws,
                      std::uint64_t seed, int nodes = 1000,
                      JitterFamily family = JitterFamily::Auto);

// Fisher information when the jitter realization is also observed:
// (1/sigma_w^2) sum_n E[h_n(z) h_n(z)'], by quadrature.  Independent of x.
Mat fisher_complete(const ModelConfig& cfg, const QuadratureRule& rule);

struct FisherEstimate {
  Mat I_y;        // jitter marginalized out
  Mat I_yz;       // jitter observed
  double crb_y = 0.0;   // trace of I_y^-1
  double crb_yz = 0.0;  // trace of I_yz^-1
  double cond_y = 0.0;
  double cond_yz = 0.0;
  int mc_draws = 0;
  int nodes = 0;
};

// Both bounds at once.  Throws IllConditionedError when either Fisher matrix
// cannot be inverted reliably.
FisherEstimate crb_values(const ModelConfig& cfg, const SignalParams& x, int mc_draws,
                          std::uint64_t seed, int nodes = 1000,
                          JitterFamily family = JitterFamily::Auto);

}  // namespace sigjit
