#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sigjit {

// log(Σ exp(v_i)) with the maximum factored out; -inf for empty input.
double log_sum_exp(std::span<const double> v);

// Seed-deterministic standard normal generator: Box-Muller over mt19937_64.
// The draw sequence depends only on the seed, never on platform library
// internals, so experiment outputs stay reproducible bit for bit.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}

  // N(0, 1)
  double operator()();

  // U[0, 1)
  double uniform();

  // Next raw engine word, for deriving child seeds.
  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::vector<double> normal_vector(NormalSampler& rng, int n);

double mean(std::span<const double> v);

// Sample standard deviation (ddof = 1); 0 for fewer than two entries.
double sample_std(std::span<const double> v);

// Median; takes a copy and sorts it.
double median(std::vector<double> v);

}  // namespace sigjit
