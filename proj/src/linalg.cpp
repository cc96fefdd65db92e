#include "sigjit/linalg.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace sigjit {

double norm1(const Mat& a) {
  double best = 0.0;
  for (int j = 0; j < a.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows; ++i) s += std::fabs(a(i, j));
    if (s > best) best = s;
  }
  return best;
}

double trace(const Mat& a) {
  double s = 0.0;
  for (int i = 0; i < a.rows && i < a.cols; ++i) s += a(i, i);
  return s;
}

void symmetrize(Mat& a) {
  for (int i = 0; i < a.rows; ++i)
    for (int j = i + 1; j < a.cols; ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
}

bool cholesky(const Mat& a, Mat& lower) {
  const int n = a.rows;
  lower = Mat(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
        lower(i, i) = std::sqrt(s);
      } else {
        lower(i, j) = s / lower(j, j);
      }
    }
  }
  return true;
}

void cholesky_solve(const Mat& lower, std::span<const double> b, std::span<double> x) {
  const int n = lower.rows;
  // L u = b
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= lower(i, k) * x[k];
    x[i] = s / lower(i, i);
  }
  // Lᵀ x = u
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= lower(k, i) * x[k];
    x[i] = s / lower(i, i);
  }
}

Mat cholesky_inverse(const Mat& lower) {
  const int n = lower.rows;
  // Invert L in place into linv (forward substitution column by column).
  Mat linv(n, n);
  for (int j = 0; j < n; ++j) {
    linv(j, j) = 1.0 / lower(j, j);
    for (int i = j + 1; i < n; ++i) {
      double s = 0.0;
      for (int k = j; k < i; ++k) s -= lower(i, k) * linv(k, j);
      linv(i, j) = s / lower(i, i);
    }
  }
  // A⁻¹ = L⁻ᵀ L⁻¹
  Mat inv(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int k = i; k < n; ++k) s += linv(k, i) * linv(k, j);
      inv(i, j) = s;
      inv(j, i) = s;
    }
  return inv;
}

namespace {

Mat checked_factor(const Mat& a, double cond_limit, double* cond_out, Mat* inv_out) {
  Mat lower;
  if (!cholesky(a, lower)) {
    if (cond_out) *cond_out = std::numeric_limits<double>::infinity();
    throw IllConditionedError("matrix is not positive definite",
                              std::numeric_limits<double>::infinity());
  }
  Mat inv = cholesky_inverse(lower);
  double cond = norm1(a) * norm1(inv);
  if (cond_out) *cond_out = cond;
  if (!(cond < cond_limit)) {
    throw IllConditionedError("matrix condition " + std::to_string(cond) +
                                  " exceeds limit " + std::to_string(cond_limit),
                              cond);
  }
  if (inv_out) *inv_out = std::move(inv);
  return lower;
}

}  // namespace

std::vector<double> spd_solve(const Mat& a, std::span<const double> b,
                              double cond_limit, double* cond_out) {
  Mat lower = checked_factor(a, cond_limit, cond_out, nullptr);
  std::vector<double> x(b.size());
  cholesky_solve(lower, b, x);
  return x;
}

Mat spd_inverse_checked(const Mat& a, double cond_limit, double* cond_out) {
  Mat inv;
  checked_factor(a, cond_limit, cond_out, &inv);
  return inv;
}

}  // namespace sigjit
