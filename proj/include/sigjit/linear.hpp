#pragma once

#include "sigjit/model.hpp"
#include "sigjit/quadrature.hpp"

namespace sigjit {

// E[H(z)] columnwise under the jitter distribution, evaluated with the given
// jitter rule (nodes in jitter units).
struct ExpectedBasis {
  Mat EH;
  int rule_order = 0;
};

ExpectedBasis expected_H(const ModelConfig& cfg, const QuadratureRule& rule);

// Least-squares fit against E[H]: (EH' EH)^-1 EH' y.  Throws
// IllConditionedError when the normal-equation matrix is unusable.
SignalParams linear_unbiased(const ModelConfig& cfg, const ExpectedBasis& eh,
                             const SampleSet& samples);

// Same fit with the jitter-free basis H(0); the baseline that pretends
// sampling was exact.
SignalParams linear_nojitter(const ModelConfig& cfg, const SampleSet& samples);

// Weighted fit (EH' D^-1 EH)^-1 EH' D^-1 y with D the diagonal of the signal
// covariance implied by an assumed coefficient vector plus noise.  The
// weights depend on x_assumed, which is exactly why this is not a valid
// estimator; it exists to demonstrate that circularity.  With x_assumed = 0
// the weights are identically 1 and the result equals linear_unbiased.
SignalParams blue_diagnostic(const ModelConfig& cfg, const SignalParams& x_assumed,
                             const SampleSet& samples, const QuadratureRule& rule);

}  // namespace sigjit
