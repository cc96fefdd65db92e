#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sigjit/crb.hpp"
#include "sigjit/em.hpp"

namespace sigjit {

enum class ExperimentKind {
  HistogramValidation,
  Convergence,
  InitSensitivity,
  BlueInvalidity,
  CrbComparison,
  MsePerformance,
  JitterImprovement,
};

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

// Cartesian grid of model settings; empty axes fall back to kind defaults.
struct GridSpec {
  std::vector<int> K;
  std::vector<int> M;
  std::vector<int> J;
  std::vector<double> sigma_z;
  std::vector<double> sigma_w;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::MsePerformance;
  bool kind_set = false;
  GridSpec grid;
  int trials = 100;
  std::uint64_t base_seed = 0;
  std::string output_path;  // directory for CSV output; empty keeps results in memory
  int threads = 1;

  // Strict parse: unknown keys anywhere are an error.
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::filesystem::path& path);
};

struct GridPoint {
  int K = 0;
  int M = 0;
  int J = 0;
  double sigma_z = 0.0;
  double sigma_w = 0.0;
};

std::vector<GridPoint> expand_grid(const GridSpec& grid);

// One estimator applied to one simulated draw.  wall_ms is diagnostic only
// and never serialized, so outputs stay byte-identical across machines and
// thread counts.
struct TrialRecord {
  GridPoint point;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string estimator;
  bool ok = true;
  std::string error;
  double sq_error = 0.0;     // ||xhat - x_true||^2
  std::vector<double> err;   // xhat - x_true
  int iterations = 0;        // EM only
  std::string termination;   // EM only
  double wall_ms = 0.0;
};

struct MseSummaryRow {
  GridPoint point;
  std::string estimator;
  int ok_trials = 0;
  int failures = 0;
  double mse_mean = 0.0;     // mean of ||err||^2 / K
  double mse_ci_half = 0.0;  // 1.96 sd / sqrt(trials)
  double rms_bias = 0.0;     // sqrt(mean_k bias_k^2)
};

struct MseResult {
  std::vector<TrialRecord> records;
  std::vector<MseSummaryRow> summary;
};

MseResult run_mse_sweep(const ExperimentConfig& cfg);

struct CrbSummaryRow {
  GridPoint point;
  std::string estimator;
  int ok_trials = 0;
  int failures = 0;
  double total_mse_mean = 0.0;  // mean of ||err||^2
  double total_mse_ci_half = 0.0;
  double bias_sq_total = 0.0;   // ||mean err||^2
  double crb_y = 0.0;
  double crb_yz = 0.0;
  double cond_y = 0.0;
  double cond_yz = 0.0;
};

struct CrbResult {
  std::vector<double> x_fixed;  // coefficients shared by every trial
  std::vector<TrialRecord> records;
  std::vector<CrbSummaryRow> summary;
};

CrbResult run_crb_comparison(const ExperimentConfig& cfg);

struct ConvergenceCurves {
  GridPoint point;
  int trials = 0;
  int solver_failures = 0;
  std::vector<double> median_dist;  // per iteration, ||x_i - x_final||
  std::vector<double> median_gap;   // per iteration, ll_final - ll_i
  double median_iters_to_tol = 0.0; // first step below 1e-8, capped at max_iter
};

struct ConvergenceResult {
  std::vector<ConvergenceCurves> curves;
};

ConvergenceResult run_convergence(const ExperimentConfig& cfg);

struct InitTrialRow {
  GridPoint point;
  int trial = 0;
  std::string init;
  double final_loglik = 0.0;
  double rel_loglik = 0.0;  // relative to the NoJitterLinear run
  int iterations = 0;
};

struct InitSummaryRow {
  GridPoint point;
  int trials = 0;
  double median_spread = 0.0;          // max - min final log-likelihood per trial
  double frac_spread_below_tol = 0.0;  // spread < 1e-3
  double frac_nojitter_near_best = 0.0;
};

struct InitResult {
  std::vector<InitTrialRow> rows;
  std::vector<InitSummaryRow> summary;
};

InitResult run_init_sensitivity(const ExperimentConfig& cfg);

struct BlueResult {
  GridPoint point;
  std::vector<double> x_true;
  std::vector<double> direction;                // x_assumed = tau * direction
  std::vector<double> taus;
  std::vector<std::vector<double>> estimates;   // per tau, K coefficients
  double max_variation = 0.0;                   // worst coefficient range over tau
  bool zero_matches_unweighted = false;         // tau = 0 equals linear_unbiased bitwise
};

BlueResult run_blue_invalidity(const ExperimentConfig& cfg);

struct MseCurve {
  std::vector<double> sigma_z;
  std::vector<double> mse;
};

struct ImprovementFactor {
  bool measurable = false;
  double factor = 1.0;
  double sigma_z_at_max = 0.0;  // jitter level of the EM curve at the maximum
};

// Maximum horizontal gap between two MSE-versus-sigma_z curves on log-log
// axes: at matched MSE levels, how much more jitter the first curve tolerates
// than the second.  Points below sigma_min are ignored; levels are taken at
// the curve knots and inverted at the last crossing from the right.
ImprovementFactor improvement_factor(const MseCurve& em, const MseCurve& linear,
                                     double sigma_min);

struct ImprovementCase {
  int K = 0;
  int M = 0;
  int J = 0;
  double sigma_w = 0.0;
  MseCurve em;
  MseCurve lin;
  std::vector<double> em_ci_half;
  std::vector<double> lin_ci_half;
  ImprovementFactor factor;
};

struct ImprovementResult {
  std::vector<ImprovementCase> cases;
};

ImprovementResult run_jitter_improvement(const ExperimentConfig& cfg);

struct HistogramBinRow {
  int n = 0;
  double center = 0.0;
  double observed_density = 0.0;
  double model_density = 0.0;
  double band = 0.0;  // three binomial standard errors, density units
  bool within = false;
};

struct HistogramPerN {
  int n = 0;
  int bins = 0;
  double frac_within = 0.0;
};

struct HistogramResult {
  GridPoint point;
  int draws = 0;
  std::vector<double> x_true;
  std::vector<HistogramPerN> per_n;
  std::vector<HistogramBinRow> bins;
  int worst_n = 0;
  double worst_frac = 1.0;
};

HistogramResult run_histogram_validation(const ExperimentConfig& cfg);

// Dispatch on cfg.kind, write CSV output when configured, and print one
// headline line per result group.
void run_experiment(const ExperimentConfig& cfg);

}  // namespace sigjit
