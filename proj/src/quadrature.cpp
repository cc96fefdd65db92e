#include "sigjit/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace sigjit {

void tridiagonal_eigen(std::span<const double> diag, std::span<const double> offdiag,
                       std::vector<double>& eigenvalues,
                       std::vector<double>& first_components) {
  const int n = static_cast<int>(diag.size());
  if (n == 0) throw std::invalid_argument("empty diagonal");
  if (static_cast<int>(offdiag.size()) != n - 1)
    throw std::invalid_argument("off-diagonal length must be n - 1");
  for (double v : diag)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite diagonal entry");
  for (double v : offdiag)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite off-diagonal entry");

  std::vector<double> d(diag.begin(), diag.end());
  std::vector<double> e(n, 0.0);
  std::copy(offdiag.begin(), offdiag.end(), e.begin());
  std::vector<double> q(n, 0.0);
  q[0] = 1.0;

  const double eps = std::numeric_limits<double>::epsilon();
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (iter++ == 100) throw std::runtime_error("tridiagonal QL failed to converge");
        // Compute implicit shift
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        // Implicit QL transformation, rotating the tracked first row along
        int i;
        for (i = m - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          f = q[i + 1];
          q[i + 1] = s * q[i] + c * f;
          q[i] = c * q[i] - s * f;
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return d[a] < d[b]; });

  eigenvalues.resize(n);
  first_components.resize(n);
  for (int i = 0; i < n; ++i) {
    eigenvalues[i] = d[idx[i]];
    first_components[i] = std::fabs(q[idx[i]]);
  }
}

namespace {

void validate_rule(const QuadratureRule& rule) {
  const int n = rule.order();
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(rule.abscissas[j]) || !std::isfinite(rule.weights[j]))
      throw std::runtime_error("non-finite quadrature rule entry");
    if (rule.weights[j] < 0.0) throw std::runtime_error("negative quadrature weight");
    if (j > 0 && !(rule.abscissas[j] > rule.abscissas[j - 1]))
      throw std::runtime_error("quadrature abscissas not strictly increasing");
  }
}

// Fold the rule onto its mirror image so symmetric node pairs come out
// exactly negated and equally weighted.
void symmetrize_rule(QuadratureRule& rule) {
  const int n = rule.order();
  for (int j = 0; j < n / 2; ++j) {
    const int k = n - 1 - j;
    const double x = 0.5 * (rule.abscissas[j] - rule.abscissas[k]);
    const double w = 0.5 * (rule.weights[j] + rule.weights[k]);
    rule.abscissas[j] = x;
    rule.abscissas[k] = -x;
    rule.weights[j] = w;
    rule.weights[k] = w;
  }
  if (n % 2 == 1) rule.abscissas[n / 2] = 0.0;
}

}  // namespace

QuadratureRule gauss_hermite_rule(int nodes) {
  if (nodes < 1) throw std::invalid_argument("rule order must be at least 1");
  std::vector<double> d(nodes, 0.0);
  std::vector<double> e(nodes - 1);
  for (int k = 1; k < nodes; ++k) e[k - 1] = std::sqrt(static_cast<double>(k));

  QuadratureRule rule;
  rule.family = RuleFamily::GaussHermiteStdNormal;
  std::vector<double> q;
  tridiagonal_eigen(d, e, rule.abscissas, q);
  rule.weights.resize(nodes);
  for (int j = 0; j < nodes; ++j) rule.weights[j] = q[j] * q[j];
  symmetrize_rule(rule);
  validate_rule(rule);
  return rule;
}

QuadratureRule gauss_legendre_rule(int nodes, double a, double b) {
  if (nodes < 1) throw std::invalid_argument("rule order must be at least 1");
  if (!(a < b)) throw std::invalid_argument("interval must satisfy a < b");
  std::vector<double> d(nodes, 0.0);
  std::vector<double> e(nodes - 1);
  for (int k = 1; k < nodes; ++k)
    e[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);

  QuadratureRule rule;
  rule.family = RuleFamily::GaussLegendre;
  std::vector<double> q;
  tridiagonal_eigen(d, e, rule.abscissas, q);
  rule.weights.resize(nodes);
  for (int j = 0; j < nodes; ++j) rule.weights[j] = 2.0 * q[j] * q[j];
  symmetrize_rule(rule);

  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  for (int j = 0; j < nodes; ++j) {
    rule.abscissas[j] = c + h * rule.abscissas[j];
    rule.weights[j] *= h;
  }
  validate_rule(rule);
  return rule;
}

QuadratureRule tan_remap(const QuadratureRule& rule,
                         const std::function<double(double)>& weight_fn) {
  const int n = rule.order();
  for (double x : rule.abscissas)
    if (!(std::fabs(x) < M_PI / 2.0))
      throw std::invalid_argument("tan remap needs abscissas inside (-pi/2, pi/2)");

  QuadratureRule out;
  out.family = RuleFamily::GaussLegendreTanRemapped;
  out.abscissas.resize(n);
  out.weights.resize(n);
  for (int j = 0; j < n; ++j) {
    const double t = std::tan(rule.abscissas[j]);
    out.abscissas[j] = t;
    out.weights[j] = weight_fn(t) * (1.0 + t * t) * rule.weights[j];
  }
  validate_rule(out);
  return out;
}

double integrate(const QuadratureRule& rule, const std::function<double(double)>& f,
                 double mu, double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  double s = 0.0;
  const int n = rule.order();
  if (rule.family == RuleFamily::GaussHermiteStdNormal) {
    for (int j = 0; j < n; ++j)
      s += rule.weights[j] * f(sigma * rule.abscissas[j] + mu);
  } else {
    for (int j = 0; j < n; ++j) s += rule.weights[j] * f(rule.abscissas[j]);
  }
  return s;
}

QuadratureRule jitter_rule(double sigma_z, int nodes, JitterFamily family) {
  if (!(sigma_z >= 0.0) || !std::isfinite(sigma_z))
    throw std::invalid_argument("sigma_z must be finite and nonnegative");
  if (nodes < 1) throw std::invalid_argument("rule order must be at least 1");

  if (sigma_z == 0.0) {
    QuadratureRule rule;
    rule.family = RuleFamily::GaussHermiteStdNormal;
    rule.abscissas = {0.0};
    rule.weights = {1.0};
    return rule;
  }

  JitterFamily pick = family;
  if (pick == JitterFamily::Auto)
    pick = sigma_z <= 0.1 ? JitterFamily::GaussHermite : JitterFamily::GaussLegendreTan;

  if (pick == JitterFamily::GaussHermite) {
    auto base = cached_rule(RuleFamily::GaussHermiteStdNormal, nodes);
    QuadratureRule rule = *base;
    for (double& x : rule.abscissas) x *= sigma_z;
    return rule;
  }

  auto base = cached_rule(RuleFamily::GaussLegendre, nodes, -M_PI / 2.0, M_PI / 2.0);
  const double inv_norm = 1.0 / (sigma_z * std::sqrt(2.0 * M_PI));
  const double inv_two_var = 1.0 / (2.0 * sigma_z * sigma_z);
  return tan_remap(*base, [=](double z) {
    return inv_norm * std::exp(-z * z * inv_two_var);
  });
}

std::shared_ptr<const QuadratureRule> cached_rule(RuleFamily family, int nodes,
                                                  double a, double b) {
  using Key = std::tuple<int, int, double, double>;
  static std::map<Key, std::shared_ptr<const QuadratureRule>> cache;
  static std::mutex mtx;

  if (family == RuleFamily::GaussHermiteStdNormal) {
    a = 0.0;
    b = 0.0;
  }
  const Key key{static_cast<int>(family), nodes, a, b};
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::shared_ptr<const QuadratureRule> rule;
  switch (family) {
    case RuleFamily::GaussHermiteStdNormal:
      rule = std::make_shared<const QuadratureRule>(gauss_hermite_rule(nodes));
      break;
    case RuleFamily::GaussLegendre:
      rule = std::make_shared<const QuadratureRule>(gauss_legendre_rule(nodes, a, b));
      break;
    default:
      throw std::invalid_argument("only base rule families are cached");
  }
  cache.emplace(key, rule);
  return rule;
}

}  // namespace sigjit
