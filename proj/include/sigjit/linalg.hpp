#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigjit {

// Thrown when a normal-equation or Fisher matrix is numerically unusable.
class IllConditionedError : public std::runtime_error {
 public:
  IllConditionedError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

// Dense row-major matrix, sized for small K (tens of columns).
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
};

// Max absolute column sum.
double norm1(const Mat& a);

double trace(const Mat& a);

// a := (a + aᵀ)/2
void symmetrize(Mat& a);

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
// Returns false on a nonpositive pivot.
bool cholesky(const Mat& a, Mat& lower);

// Solve (L Lᵀ) x = b given the Cholesky factor.
void cholesky_solve(const Mat& lower, std::span<const double> b, std::span<double> x);

// (L Lᵀ)⁻¹ given the Cholesky factor.
Mat cholesky_inverse(const Mat& lower);

// Solve A x = b for symmetric positive definite A.  Throws IllConditionedError
// when factorization breaks down or the exact 1-norm condition number
// ‖A‖₁‖A⁻¹‖₁ exceeds cond_limit.  The condition number is reported through
// cond_out when non-null.
std::vector<double> spd_solve(const Mat& a, std::span<const double> b,
                              double cond_limit = 1e12, double* cond_out = nullptr);

// Condition-checked inverse with the same contract as spd_solve.
Mat spd_inverse_checked(const Mat& a, double cond_limit = 1e12, double* cond_out = nullptr);

}  // namespace sigjit
