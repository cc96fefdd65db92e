#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace sigjit {

enum class RuleFamily {
  GaussHermiteStdNormal,     // weight N(x; 0, 1) on the real line
  GaussLegendre,             // weight 1 on [a, b]
  GaussLegendreTanRemapped,  // Gauss-Legendre pushed through x -> tan(x)
};

struct QuadratureRule {
  RuleFamily family{};
  std::vector<double> abscissas;  // strictly increasing
  std::vector<double> weights;    // nonnegative

  int order() const { return static_cast<int>(abscissas.size()); }
};

// Eigenvalues (ascending) of the symmetric tridiagonal matrix with the given
// diagonal and off-diagonal, together with the first component of each
// unit-norm eigenvector, computed by implicit-shift QL.  The eigenvector
// components are sign-normalized to be nonnegative.
void tridiagonal_eigen(std::span<const double> diag, std::span<const double> offdiag,
                       std::vector<double>& eigenvalues,
                       std::vector<double>& first_components);

// Gauss-Hermite rule normalized against the standard normal density:
// sum_j w_j f(x_j) ~ integral f(x) N(x; 0, 1) dx, sum of weights 1.
QuadratureRule gauss_hermite_rule(int nodes);

// Gauss-Legendre rule on [a, b] with unit weight; sum of weights b - a.
QuadratureRule gauss_legendre_rule(int nodes, double a, double b);

// Transform a rule on (-pi/2, pi/2) through x' = tan(x) with
// w'_j = weight_fn(x'_j) (1 + x'_j^2) w_j, turning it into a rule for
// integral f(x) weight_fn(x) dx over the real line.
QuadratureRule tan_remap(const QuadratureRule& rule,
                         const std::function<double(double)>& weight_fn);

// Apply a rule to f.  For the Gauss-Hermite family the affine map
// sigma x + mu is applied to the nodes so the rule integrates against
// N(x; mu, sigma^2); other families evaluate f at the stored abscissas.
double integrate(const QuadratureRule& rule, const std::function<double(double)>& f,
                 double mu = 0.0, double sigma = 1.0);

enum class JitterFamily { Auto, GaussHermite, GaussLegendreTan };

// Nodes z_j and weights w_j with sum_j w_j f(z_j) ~ E[f(z)], z ~ N(0, sigma_z^2).
// Auto picks Gauss-Hermite for sigma_z <= 0.1 and tan-remapped Gauss-Legendre
// above, where the wider support keeps the node spread usable.  sigma_z = 0
// degenerates to the single node 0 with weight 1.
QuadratureRule jitter_rule(double sigma_z, int nodes,
                           JitterFamily family = JitterFamily::Auto);

// Process-wide cache of immutable base rules keyed by family, order, and
// interval.  The interval arguments are ignored for the Hermite family.
std::shared_ptr<const QuadratureRule> cached_rule(RuleFamily family, int nodes,
                                                  double a = 0.0, double b = 0.0);

}  // namespace sigjit
