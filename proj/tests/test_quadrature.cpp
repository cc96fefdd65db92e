#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sigjit/numeric.hpp"
#include "sigjit/quadrature.hpp"

using namespace sigjit;

namespace {

double gaussian_moment(int degree) {
  // E[x^d] for x ~ N(0,1): (d-1)!! for even d, 0 for odd.
  if (degree % 2 == 1) return 0.0;
  double m = 1.0;
  for (int k = degree - 1; k > 1; k -= 2) m *= k;
  return m;
}

double rule_moment(const QuadratureRule& rule, int degree) {
  double s = 0.0;
  for (int j = 0; j < rule.order(); ++j)
    s += rule.weights[j] * std::pow(rule.abscissas[j], degree);
  return s;
}

// Relative error of the quadrature moment against the closed form.  Zero
// moments arise from cancellation of huge symmetric terms, so the error is
// measured against the size of those terms rather than against zero.
double moment_rel_error(const QuadratureRule& rule, int degree, double want) {
  double sum = 0.0, abs_sum = 0.0;
  for (int j = 0; j < rule.order(); ++j) {
    const double term = rule.weights[j] * std::pow(rule.abscissas[j], degree);
    sum += term;
    abs_sum += std::fabs(term);
  }
  const double scale = std::max(std::fabs(want), abs_sum);
  return scale > 0.0 ? std::fabs(sum - want) / scale : std::fabs(sum - want);
}

}  // namespace

TEST_CASE("tridiagonal_eigen matches the spelled out 2x2 case") {
  std::vector<double> eig, first;
  tridiagonal_eigen(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0}, eig, first);
  REQUIRE(eig.size() == 2);
  CHECK(eig[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(eig[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(first[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(first[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
}

TEST_CASE("tridiagonal_eigen eigenvalues match Sturm bisection") {
  for (std::uint64_t seed : {3u, 4u}) {
    const int n = 14;
    NormalSampler rng(seed);
    std::vector<double> d = normal_vector(rng, n);
    std::vector<double> e = normal_vector(rng, n - 1);

    std::vector<double> eig, first;
    tridiagonal_eigen(d, e, eig, first);
    const std::vector<double> want = oracle::sturm_eigenvalues(d, e);
    for (int i = 0; i < n; ++i)
      CHECK(eig[i] == doctest::Approx(want[i]).epsilon(1e-11).scale(1.0));
    for (int i = 1; i < n; ++i) CHECK(eig[i] >= eig[i - 1]);
  }
}

TEST_CASE("tridiagonal_eigen first components match a Jacobi eigensolver") {
  const int n = 9;
  NormalSampler rng(8);
  std::vector<double> d = normal_vector(rng, n);
  std::vector<double> e = normal_vector(rng, n - 1);

  std::vector<std::vector<double>> full(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) full[i][i] = d[i];
  for (int i = 0; i + 1 < n; ++i) full[i][i + 1] = full[i + 1][i] = e[i];

  std::vector<double> jac_values;
  std::vector<std::vector<double>> jac_vectors;
  oracle::jacobi_eigen(full, jac_values, jac_vectors);

  std::vector<double> eig, first;
  tridiagonal_eigen(d, e, eig, first);
  for (int i = 0; i < n; ++i) {
    CHECK(eig[i] == doctest::Approx(jac_values[i]).epsilon(1e-10).scale(1.0));
    CHECK(first[i] ==
          doctest::Approx(std::fabs(jac_vectors[i][0])).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("tridiagonal_eigen input validation") {
  std::vector<double> eig, first;
  CHECK_THROWS_AS(tridiagonal_eigen(std::vector<double>{}, std::vector<double>{}, eig, first),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      tridiagonal_eigen(std::vector<double>{1.0, 2.0}, std::vector<double>{}, eig, first),
      std::invalid_argument);
  const double nan = std::nan("");
  CHECK_THROWS_AS(
      tridiagonal_eigen(std::vector<double>{nan, 0.0}, std::vector<double>{1.0}, eig, first),
      std::invalid_argument);
}

TEST_CASE("small Gauss-Hermite rules take their closed forms") {
  const QuadratureRule r1 = gauss_hermite_rule(1);
  REQUIRE(r1.order() == 1);
  CHECK(r1.abscissas[0] == 0.0);
  CHECK(r1.weights[0] == doctest::Approx(1.0).epsilon(1e-14));

  const QuadratureRule r2 = gauss_hermite_rule(2);
  CHECK(r2.abscissas[0] == doctest::Approx(-1.0).epsilon(1e-13));
  CHECK(r2.abscissas[1] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(r2.weights[0] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(r2.weights[1] == doctest::Approx(0.5).epsilon(1e-13));

  const QuadratureRule r3 = gauss_hermite_rule(3);
  CHECK(r3.abscissas[1] == 0.0);
  CHECK(r3.abscissas[2] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-13));
  CHECK(r3.weights[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
  CHECK(r3.weights[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("Gauss-Hermite rules integrate moments exactly") {
  for (int J : {1, 2, 3, 5, 8, 13, 21}) {
    const QuadratureRule rule = gauss_hermite_rule(J);
    double wsum = 0.0;
    for (double w : rule.weights) wsum += w;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
    for (int d = 0; d <= 2 * J - 1; ++d)
      CHECK(moment_rel_error(rule, d, gaussian_moment(d)) < 1e-9);
  }
  // The degree-8 moment needs J >= 5: 7!! = 105.
  CHECK(rule_moment(gauss_hermite_rule(5), 8) == doctest::Approx(105.0).epsilon(1e-12));
}

TEST_CASE("Gauss-Hermite rules are exactly symmetric") {
  for (int J : {2, 5, 10, 129}) {
    const QuadratureRule rule = gauss_hermite_rule(J);
    for (int j = 0; j < J; ++j) {
      CHECK(rule.abscissas[j] == -rule.abscissas[J - 1 - j]);
      CHECK(rule.weights[j] == rule.weights[J - 1 - j]);
    }
    if (J % 2 == 1) CHECK(rule.abscissas[J / 2] == 0.0);
  }
}

TEST_CASE("Gauss-Hermite weights stay strictly positive through J = 200") {
  for (int J : {50, 129, 200}) {
    const QuadratureRule rule = gauss_hermite_rule(J);
    for (double w : rule.weights) CHECK(w > 0.0);
    for (int j = 1; j < J; ++j) CHECK(rule.abscissas[j] > rule.abscissas[j - 1]);
  }
}

TEST_CASE("very large Gauss-Hermite rules stay well formed despite tail underflow") {
  const QuadratureRule rule = gauss_hermite_rule(1000);
  double wsum = 0.0;
  int positive = 0;
  for (double w : rule.weights) {
    REQUIRE(w >= 0.0);
    REQUIRE(std::isfinite(w));
    if (w > 0.0) ++positive;
    wsum += w;
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(positive > 500);
  for (int j = 1; j < rule.order(); ++j)
    CHECK(rule.abscissas[j] > rule.abscissas[j - 1]);
}

TEST_CASE("small Gauss-Legendre rules take their closed forms") {
  const QuadratureRule r1 = gauss_legendre_rule(1, -1.0, 1.0);
  CHECK(r1.abscissas[0] == 0.0);
  CHECK(r1.weights[0] == doctest::Approx(2.0).epsilon(1e-14));

  const QuadratureRule r2 = gauss_legendre_rule(2, -1.0, 1.0);
  CHECK(r2.abscissas[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(r2.abscissas[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r2.weights[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Gauss-Legendre rules integrate polynomials exactly") {
  struct Interval {
    double a, b;
  };
  for (const Interval iv : {Interval{-1.0, 1.0}, Interval{0.3, 2.7}, Interval{-4.0, -1.0}}) {
    for (int J : {1, 2, 3, 6, 12, 20}) {
      const QuadratureRule rule = gauss_legendre_rule(J, iv.a, iv.b);
      double wsum = 0.0;
      for (double w : rule.weights) wsum += w;
      CHECK(wsum == doctest::Approx(iv.b - iv.a).epsilon(1e-13));
      for (int d = 0; d <= 2 * J - 1; ++d) {
        const double want =
            (std::pow(iv.b, d + 1) - std::pow(iv.a, d + 1)) / (d + 1);
        CHECK(moment_rel_error(rule, d, want) < 1e-9);
      }
    }
  }
  CHECK_THROWS_AS(gauss_legendre_rule(3, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gauss_legendre_rule(0, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(gauss_hermite_rule(0), std::invalid_argument);
}

TEST_CASE("abscissas agree with characteristic polynomial roots") {
  for (int J : {3, 7, 12}) {
    const QuadratureRule gh = gauss_hermite_rule(J);
    const auto hroots = oracle::roots_by_bisection(
        [J](long double x) { return oracle::hermite_value(J, x); }, -8.0, 8.0, J);
    for (int j = 0; j < J; ++j)
      CHECK(std::fabs(gh.abscissas[j] - hroots[j]) < 1e-10);

    const QuadratureRule gl = gauss_legendre_rule(J, -1.0, 1.0);
    const auto lroots = oracle::roots_by_bisection(
        [J](long double x) { return oracle::legendre_value(J, x); }, -1.0, 1.0, J);
    for (int j = 0; j < J; ++j)
      CHECK(std::fabs(gl.abscissas[j] - lroots[j]) < 1e-10);
  }
}

TEST_CASE("tan_remap reproduces Gaussian expectations") {
  const QuadratureRule base = gauss_legendre_rule(200, -M_PI / 2.0, M_PI / 2.0);
  const double sigma = 0.4;
  auto normal_pdf = [sigma](double z) {
    return std::exp(-z * z / (2.0 * sigma * sigma)) /
           (sigma * std::sqrt(2.0 * M_PI));
  };
  const QuadratureRule remapped = tan_remap(base, normal_pdf);
  CHECK(remapped.family == RuleFamily::GaussLegendreTanRemapped);
  for (int j = 1; j < remapped.order(); ++j)
    CHECK(remapped.abscissas[j] > remapped.abscissas[j - 1]);

  CHECK(rule_moment(remapped, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rule_moment(remapped, 2) == doctest::Approx(sigma * sigma).epsilon(1e-8));
  CHECK(rule_moment(remapped, 4) ==
        doctest::Approx(3.0 * std::pow(sigma, 4)).epsilon(1e-7));

  const QuadratureRule bad = gauss_legendre_rule(4, -2.0, 2.0);
  CHECK_THROWS_AS(tan_remap(bad, normal_pdf), std::invalid_argument);
}

TEST_CASE("integrate applies the affine map only for the Hermite family") {
  const QuadratureRule gh = gauss_hermite_rule(5);
  const double mu = 0.7, sigma = 0.3;
  const double second = integrate(gh, [](double x) { return x * x; }, mu, sigma);
  CHECK(second == doctest::Approx(sigma * sigma + mu * mu).epsilon(1e-13));

  const QuadratureRule gl = gauss_legendre_rule(8, 0.0, 1.0);
  const double plain = integrate(gl, [](double x) { return x * x; });
  CHECK(plain == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  const double ignored = integrate(gl, [](double x) { return x * x; }, 5.0, 2.0);
  CHECK(ignored == plain);
  CHECK_THROWS_AS(integrate(gh, [](double x) { return x; }, 0.0, -1.0),
                  std::invalid_argument);
}

TEST_CASE("jitter_rule selects families by sigma and honors overrides") {
  const QuadratureRule degenerate = jitter_rule(0.0, 50);
  REQUIRE(degenerate.order() == 1);
  CHECK(degenerate.abscissas[0] == 0.0);
  CHECK(degenerate.weights[0] == 1.0);

  const QuadratureRule low = jitter_rule(0.05, 40);
  CHECK(low.family == RuleFamily::GaussHermiteStdNormal);
  const QuadratureRule base = gauss_hermite_rule(40);
  for (int j = 0; j < 40; ++j) {
    CHECK(low.abscissas[j] == 0.05 * base.abscissas[j]);
    CHECK(low.weights[j] == base.weights[j]);
  }

  const QuadratureRule boundary = jitter_rule(0.1, 40);
  CHECK(boundary.family == RuleFamily::GaussHermiteStdNormal);

  const QuadratureRule high = jitter_rule(0.3, 40);
  CHECK(high.family == RuleFamily::GaussLegendreTanRemapped);

  const QuadratureRule forced = jitter_rule(0.05, 40, JitterFamily::GaussLegendreTan);
  CHECK(forced.family == RuleFamily::GaussLegendreTanRemapped);

  CHECK_THROWS_AS(jitter_rule(-0.1, 10), std::invalid_argument);
  CHECK_THROWS_AS(jitter_rule(0.1, 0), std::invalid_argument);
}

TEST_CASE("jitter_rule reproduces Gaussian moments in both regimes") {
  for (double sigma : {0.02, 0.1, 0.25, 0.6}) {
    const QuadratureRule rule = jitter_rule(sigma, 100);
    CHECK(rule_moment(rule, 0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(rule_moment(rule, 2) == doctest::Approx(sigma * sigma).epsilon(1e-7));
    CHECK(rule_moment(rule, 4) ==
          doctest::Approx(3.0 * std::pow(sigma, 4)).epsilon(1e-6));
  }
}

TEST_CASE("Gauss-Hermite error decays with rule order on a smooth integrand") {
  auto f = [](double x) { return std::cos(x); };
  const double exact = std::exp(-0.5);
  double prev_err = 1.0;
  for (int J : {2, 4, 8}) {
    const double err = std::fabs(integrate(gauss_hermite_rule(J), f) - exact);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 1e-8);
}

TEST_CASE("cached_rule reuses identical rule objects") {
  const auto a = cached_rule(RuleFamily::GaussHermiteStdNormal, 64);
  const auto b = cached_rule(RuleFamily::GaussHermiteStdNormal, 64, 3.0, 5.0);
  CHECK(a.get() == b.get());
  const auto c = cached_rule(RuleFamily::GaussLegendre, 64, -1.0, 1.0);
  CHECK(a.get() != c.get());
  const auto d = cached_rule(RuleFamily::GaussLegendre, 64, -1.0, 1.0);
  CHECK(c.get() == d.get());
  CHECK_THROWS_AS(cached_rule(RuleFamily::GaussLegendreTanRemapped, 8),
                  std::invalid_argument);
}
