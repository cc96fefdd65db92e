#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "sigjit/model.hpp"
#include "sigjit/quadrature.hpp"

namespace sigjit {

// Thrown when every mixture component underflows for a sample, leaving the
// posterior node weights undefined.
class DegenerateSampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Immutable evaluation context: the jitter quadrature rule plus, by default,
// the precomputed table of basis rows h_n(z_j) for all N samples and J nodes.
struct LikelihoodContext {
  ModelConfig cfg;
  QuadratureRule rule;
  std::vector<double> log_w;  // log weights; -inf where a weight underflowed
  Mat basis;                  // (N*J) x K, row n*J + j = h_n(z_j)
  bool has_table = false;

  explicit LikelihoodContext(const ModelConfig& cfg, int nodes = 100,
                             JitterFamily family = JitterFamily::Auto,
                             bool precompute_basis = true);

  int nodes() const { return rule.order(); }
  const double* basis_at(int n, int j) const {
    return basis.row(n * rule.order() + j);
  }
};

// Reusable scratch for the per-sample mixture evaluation.
struct LikelihoodWorkspace {
  std::vector<double> mu;  // conditional means h_n(z_j)' x
  std::vector<double> pi;  // posterior node weights
  std::vector<double> h;   // basis row scratch for table-less contexts
};

// log p(y_n; x) under the quadrature mixture
// sum_j w_j N(y_n; h_n(z_j)' x, sigma_w^2).  When want_posterior is set the
// workspace pi vector is filled with the normalized node posteriors; a fully
// underflowed mixture then raises DegenerateSampleError.
double marginal_log_pdf_ws(const LikelihoodContext& ctx, int n, double y_n,
                           const SignalParams& x, LikelihoodWorkspace& ws,
                           bool want_posterior);

double marginal_log_pdf(const LikelihoodContext& ctx, int n, double y_n,
                        const SignalParams& x);
double marginal_pdf(const LikelihoodContext& ctx, int n, double y_n,
                    const SignalParams& x);

// Gradient of the marginal density with respect to x.
std::vector<double> marginal_pdf_grad(const LikelihoodContext& ctx, int n, double y_n,
                                      const SignalParams& x);

// Gradient of log p(y_n; x); computed from posterior node weights so it stays
// finite in the far tails.  The workspace variant writes into g.
void score_ws(const LikelihoodContext& ctx, int n, double y_n, const SignalParams& x,
              LikelihoodWorkspace& ws, std::span<double> g);
std::vector<double> score(const LikelihoodContext& ctx, int n, double y_n,
                          const SignalParams& x);

// sum_n log p(y_n; x), each term floored at log(1e-300).
double log_likelihood(const LikelihoodContext& ctx, const SampleSet& samples,
                      const SignalParams& x);

}  // namespace sigjit
