#include "sigjit/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sigjit/csv.hpp"
#include "sigjit/numeric.hpp"

namespace sigjit {

namespace {

constexpr double kCiFactor = 1.96;
constexpr std::uint64_t kSeedMix = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t v = base ^ (kSeedMix * (salt + 1));
  v ^= v >> 33;
  v *= 0xff51afd7ed558ccdULL;
  v ^= v >> 33;
  return v;
}

void parallel_for(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || jobs <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mtx;
  const int n_workers = std::min(threads, jobs);
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= jobs) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mtx);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += format_double(v[i]);
  }
  return out;
}

GridSpec grid_with_defaults(GridSpec g, ExperimentKind kind) {
  auto def_i = [](std::vector<int>& v, std::initializer_list<int> d) {
    if (v.empty()) v.assign(d);
  };
  auto def_d = [](std::vector<double>& v, std::initializer_list<double> d) {
    if (v.empty()) v.assign(d);
  };
  switch (kind) {
    case ExperimentKind::HistogramValidation:
      def_i(g.K, {10});
      def_i(g.M, {4});
      def_i(g.J, {129});
      def_d(g.sigma_z, {0.75});
      def_d(g.sigma_w, {0.1});
      break;
    case ExperimentKind::Convergence:
      def_i(g.K, {10});
      def_i(g.M, {4});
      def_i(g.J, {100});
      def_d(g.sigma_z, {0.1, 0.25, 0.4});
      def_d(g.sigma_w, {0.1});
      break;
    case ExperimentKind::InitSensitivity:
      def_i(g.K, {10});
      def_i(g.M, {8});
      def_i(g.J, {100});
      def_d(g.sigma_z, {0.05});
      def_d(g.sigma_w, {0.25});
      break;
    case ExperimentKind::BlueInvalidity:
      def_i(g.K, {3});
      def_i(g.M, {2});
      def_i(g.J, {100});
      def_d(g.sigma_z, {0.25});
      def_d(g.sigma_w, {0.25});
      break;
    case ExperimentKind::CrbComparison:
      def_i(g.K, {10});
      def_i(g.M, {16});
      def_i(g.J, {100});
      def_d(g.sigma_z, {0.01, 0.05, 0.1, 0.2});
      def_d(g.sigma_w, {0.05});
      break;
    case ExperimentKind::MsePerformance:
      def_i(g.K, {10});
      def_i(g.M, {16});
      def_i(g.J, {100});
      def_d(g.sigma_z, {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5});
      def_d(g.sigma_w, {0.05});
      break;
    case ExperimentKind::JitterImprovement: {
      def_i(g.K, {10});
      def_i(g.M, {16});
      def_i(g.J, {100});
      if (g.sigma_z.empty()) {
        const double lo = std::log(0.01), hi = std::log(0.5);
        for (int i = 0; i < 10; ++i)
          g.sigma_z.push_back(std::exp(lo + (hi - lo) * i / 9.0));
      }
      def_d(g.sigma_w, {0.05});
      break;
    }
  }
  return g;
}

std::filesystem::path prepare_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.output_path);
  std::filesystem::create_directories(dir);
  return dir;
}

void point_fields(CsvWriter& csv, const GridPoint& gp) {
  csv.field(gp.K).field(gp.M).field(gp.J).field(gp.sigma_z).field(gp.sigma_w);
}

const std::vector<std::string> kPointHeader = {"K", "M", "J", "sigma_z", "sigma_w"};

std::vector<std::string> with_point_header(std::initializer_list<std::string> rest) {
  std::vector<std::string> h = kPointHeader;
  h.insert(h.end(), rest);
  return h;
}

void write_trials_csv(const std::filesystem::path& path,
                      const std::vector<TrialRecord>& records) {
  CsvWriter csv(path);
  csv.header(with_point_header({"trial", "seed", "estimator", "ok", "sq_error", "err",
                                "iterations", "termination", "error"}));
  for (const TrialRecord& r : records) {
    point_fields(csv, r.point);
    csv.field(r.trial).field(r.seed).field(r.estimator).field(r.ok ? 1 : 0);
    csv.field(r.sq_error).field(join_doubles(r.err));
    csv.field(r.iterations).field(r.termination).field(sanitize(r.error));
    csv.end_row();
  }
}

TrialRecord make_record(const GridPoint& gp, int trial, std::uint64_t seed,
                        std::string estimator, const std::vector<double>& xhat,
                        const std::vector<double>& xtrue) {
  TrialRecord r;
  r.point = gp;
  r.trial = trial;
  r.seed = seed;
  r.estimator = std::move(estimator);
  r.err.resize(xtrue.size());
  double s = 0.0;
  for (std::size_t k = 0; k < xtrue.size(); ++k) {
    const double e = xhat[k] - xtrue[k];
    r.err[k] = e;
    s += e * e;
  }
  r.sq_error = s;
  return r;
}

TrialRecord fail_record(const GridPoint& gp, int trial, std::uint64_t seed,
                        std::string estimator, const std::string& what) {
  TrialRecord r;
  r.point = gp;
  r.trial = trial;
  r.seed = seed;
  r.estimator = std::move(estimator);
  r.ok = false;
  r.error = what;
  return r;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Aggregate ok-trial squared errors for one (point, estimator) group.
struct GroupStats {
  int ok = 0;
  int failures = 0;
  double mean_sq = 0.0;
  double ci_half_sq = 0.0;   // on the squared-error mean
  std::vector<double> bias;  // mean error per coefficient
};

GroupStats group_stats(const std::vector<TrialRecord>& records, std::size_t begin,
                       std::size_t stride, std::size_t offset, int K) {
  GroupStats st;
  st.bias.assign(K, 0.0);
  std::vector<double> sq;
  for (std::size_t i = begin + offset; i < records.size(); i += stride) {
    const TrialRecord& r = records[i];
    if (!r.ok) {
      ++st.failures;
      continue;
    }
    sq.push_back(r.sq_error);
    for (int k = 0; k < K; ++k) st.bias[k] += r.err[k];
  }
  st.ok = static_cast<int>(sq.size());
  if (st.ok > 0) {
    st.mean_sq = mean(sq);
    st.ci_half_sq = kCiFactor * sample_std(sq) / std::sqrt(static_cast<double>(st.ok));
    for (double& b : st.bias) b /= st.ok;
  }
  return st;
}

EmSettings default_em_settings(int nodes) {
  EmSettings s;
  s.nodes = nodes;
  return s;
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::HistogramValidation: return "histogram";
    case ExperimentKind::Convergence: return "convergence";
    case ExperimentKind::InitSensitivity: return "init";
    case ExperimentKind::BlueInvalidity: return "blue";
    case ExperimentKind::CrbComparison: return "crb";
    case ExperimentKind::MsePerformance: return "mse";
    case ExperimentKind::JitterImprovement: return "improvement";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  if (name == "histogram") return ExperimentKind::HistogramValidation;
  if (name == "convergence") return ExperimentKind::Convergence;
  if (name == "init") return ExperimentKind::InitSensitivity;
  if (name == "blue") return ExperimentKind::BlueInvalidity;
  if (name == "crb") return ExperimentKind::CrbComparison;
  if (name == "mse") return ExperimentKind::MsePerformance;
  if (name == "improvement") return ExperimentKind::JitterImprovement;
  throw std::invalid_argument("unknown experiment kind: " + name);
}

std::vector<GridPoint> expand_grid(const GridSpec& grid) {
  std::vector<GridPoint> points;
  for (int K : grid.K)
    for (int M : grid.M)
      for (int J : grid.J)
        for (double sw : grid.sigma_w)
          for (double sz : grid.sigma_z) points.push_back({K, M, J, sz, sw});
  return points;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");

  static const std::set<std::string> top_keys = {"kind", "grid", "trials", "base_seed",
                                                 "output_path"};
  for (const auto& item : j.items())
    if (!top_keys.count(item.key()))
      throw std::invalid_argument("unknown config key: " + item.key());

  auto as_ints = [](const nlohmann::json& v) {
    std::vector<int> out;
    if (v.is_array())
      for (const auto& e : v) out.push_back(e.get<int>());
    else
      out.push_back(v.get<int>());
    return out;
  };
  auto as_doubles = [](const nlohmann::json& v) {
    std::vector<double> out;
    if (v.is_array())
      for (const auto& e : v) out.push_back(e.get<double>());
    else
      out.push_back(v.get<double>());
    return out;
  };

  ExperimentConfig cfg;
  if (j.contains("kind")) {
    cfg.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    cfg.kind_set = true;
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    if (!g.is_object()) throw std::invalid_argument("grid must be a JSON object");
    static const std::set<std::string> grid_keys = {"K", "M", "J", "sigma_z", "sigma_w"};
    for (const auto& item : g.items())
      if (!grid_keys.count(item.key()))
        throw std::invalid_argument("unknown grid key: " + item.key());
    if (g.contains("K")) cfg.grid.K = as_ints(g.at("K"));
    if (g.contains("M")) cfg.grid.M = as_ints(g.at("M"));
    if (g.contains("J")) cfg.grid.J = as_ints(g.at("J"));
    if (g.contains("sigma_z")) cfg.grid.sigma_z = as_doubles(g.at("sigma_z"));
    if (g.contains("sigma_w")) cfg.grid.sigma_w = as_doubles(g.at("sigma_w"));
  }
  if (j.contains("trials")) {
    cfg.trials = j.at("trials").get<int>();
    if (cfg.trials < 1) throw std::invalid_argument("trials must be at least 1");
  }
  if (j.contains("base_seed")) cfg.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("output_path")) cfg.output_path = j.at("output_path").get<std::string>();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

namespace {

// One simulated draw pushed through the standard estimator set.  Writes
// n_estimators records starting at out.
void standard_trial(const ExperimentConfig& cfg, const GridPoint& gp,
                    const ModelConfig& mc, const LikelihoodContext& ctx,
                    const ExpectedBasis& eh, int trial, const std::vector<double>* x_fixed,
                    bool with_nojitter, TrialRecord* out) {
  const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(trial);
  NormalSampler rng(seed);
  std::vector<double> xt = x_fixed ? *x_fixed : normal_vector(rng, gp.K);
  SampleSet ss = generate_samples(mc, SignalParams{xt}, rng.raw());

  int slot = 0;
  if (with_nojitter) {
    Stopwatch sw;
    try {
      SignalParams est = linear_nojitter(mc, ss);
      out[slot] = make_record(gp, trial, seed, "linear_nojitter", est.x, xt);
    } catch (const std::exception& e) {
      out[slot] = fail_record(gp, trial, seed, "linear_nojitter", e.what());
    }
    out[slot].wall_ms = sw.ms();
    ++slot;
  }
  {
    Stopwatch sw;
    try {
      SignalParams est = linear_unbiased(mc, eh, ss);
      out[slot] = make_record(gp, trial, seed, "linear_unbiased", est.x, xt);
    } catch (const std::exception& e) {
      out[slot] = fail_record(gp, trial, seed, "linear_unbiased", e.what());
    }
    out[slot].wall_ms = sw.ms();
    ++slot;
  }
  {
    Stopwatch sw;
    try {
      EmTrace trace = run_em(ctx, ss, default_em_settings(gp.J));
      out[slot] = make_record(gp, trial, seed, "em", trace.final_x().x, xt);
      out[slot].iterations = trace.iterations;
      out[slot].termination = to_string(trace.termination);
    } catch (const std::exception& e) {
      out[slot] = fail_record(gp, trial, seed, "em", e.what());
    }
    out[slot].wall_ms = sw.ms();
  }
}

}  // namespace

MseResult run_mse_sweep(const ExperimentConfig& cfg) {
  const auto grid = expand_grid(grid_with_defaults(cfg.grid, ExperimentKind::MsePerformance));
  const char* names[] = {"linear_nojitter", "linear_unbiased", "em"};
  MseResult res;
  for (const GridPoint& gp : grid) {
    const ModelConfig mc(gp.K, gp.M, gp.sigma_z, gp.sigma_w);
    const LikelihoodContext ctx(mc, gp.J);
    const ExpectedBasis eh = expected_H(mc, ctx.rule);
    const int T = cfg.trials;
    std::vector<TrialRecord> recs(static_cast<std::size_t>(T) * 3);
    parallel_for(T, cfg.threads, [&](int t) {
      standard_trial(cfg, gp, mc, ctx, eh, t, nullptr, true, &recs[t * 3]);
    });

    for (int e = 0; e < 3; ++e) {
      GroupStats st = group_stats(recs, 0, 3, e, gp.K);
      MseSummaryRow row;
      row.point = gp;
      row.estimator = names[e];
      row.ok_trials = st.ok;
      row.failures = st.failures;
      row.mse_mean = st.mean_sq / gp.K;
      row.mse_ci_half = st.ci_half_sq / gp.K;
      double b2 = 0.0;
      for (double b : st.bias) b2 += b * b;
      row.rms_bias = std::sqrt(b2 / gp.K);
      res.summary.push_back(std::move(row));
    }
    res.records.insert(res.records.end(), std::make_move_iterator(recs.begin()),
                       std::make_move_iterator(recs.end()));
  }

  if (!cfg.output_path.empty()) {
    const auto dir = prepare_output_dir(cfg);
    write_trials_csv(dir / "trials.csv", res.records);
    CsvWriter csv(dir / "summary.csv");
    csv.header(with_point_header(
        {"estimator", "trials", "failures", "mse_mean", "mse_ci_half", "rms_bias"}));
    for (const MseSummaryRow& r : res.summary) {
      point_fields(csv, r.point);
      csv.field(r.estimator).field(r.ok_trials).field(r.failures);
      csv.field(r.mse_mean).field(r.mse_ci_half).field(r.rms_bias);
      csv.end_row();
    }
  }
  return res;
}

CrbResult run_crb_comparison(const ExperimentConfig& cfg) {
  const auto grid = expand_grid(grid_with_defaults(cfg.grid, ExperimentKind::CrbComparison));
  const char* names[] = {"linear_unbiased", "em"};
  CrbResult res;
  for (const GridPoint& gp : grid) {
    const ModelConfig mc(gp.K, gp.M, gp.sigma_z, gp.sigma_w);

    // Same coefficients for every trial and every grid point sharing K.
    NormalSampler xr(cfg.base_seed);
    const std::vector<double> x_fixed = normal_vector(xr, gp.K);
    if (res.x_fixed.empty()) res.x_fixed = x_fixed;

    const FisherEstimate fe =
        crb_values(mc, SignalParams{x_fixed}, 1000, mix_seed(cfg.base_seed, 77), 1000);

    const LikelihoodContext ctx(mc, gp.J);
    const ExpectedBasis eh = expected_H(mc, ctx.rule);
    const int T = cfg.trials;
    std::vector<TrialRecord> recs(static_cast<std::size_t>(T) * 2);
    parallel_for(T, cfg.threads, [&](int t) {
      standard_trial(cfg, gp, mc, ctx, eh, t, &x_fixed, false, &recs[t * 2]);
    });

    for (int e = 0; e < 2; ++e) {
      GroupStats st = group_stats(recs, 0, 2, e, gp.K);
      CrbSummaryRow row;
      row.point = gp;
      row.estimator = names[e];
      row.ok_trials = st.ok;
      row.failures = st.failures;
      row.total_mse_mean = st.mean_sq;
      row.total_mse_ci_half = st.ci_half_sq;
      double b2 = 0.0;
      for (double b : st.bias) b2 += b * b;
      row.bias_sq_total = b2;
      row.crb_y = fe.crb_y;
      row.crb_yz = fe.crb_yz;
      row.cond_y = fe.cond_y;
      row.cond_yz = fe.cond_yz;
      res.summary.push_back(std::move(row));
    }
    res.records.insert(res.records.end(), std::make_move_iterator(recs.begin()),
                       std::make_move_iterator(recs.end()));
  }

  if (!cfg.output_path.empty()) {
    const auto dir = prepare_output_dir(cfg);
    write_trials_csv(dir / "trials.csv", res.records);
    CsvWriter csv(dir / "summary.csv");
    csv.header(with_point_header({"estimator", "trials", "failures", "total_mse_mean",
                                  "total_mse_ci_half", "bias_sq_total", "crb_y", "crb_yz",
                                  "cond_y", "cond_yz"}));
    for (const CrbSummaryRow& r : res.summary) {
      point_fields(csv, r.point);
      csv.field(r.estimator).field(r.ok_trials).field(r.failures);
      csv.field(r.total_mse_mean).field(r.total_mse_ci_half).field(r.bias_sq_total);
      csv.field(r.crb_y).field(r.crb_yz).field(r.cond_y).field(r.cond_yz);
      csv.end_row();
    }
  }
  return res;
}

ConvergenceResult run_convergence(const ExperimentConfig& cfg) {
  const auto grid = expand_grid(grid_with_defaults(cfg.grid, ExperimentKind::Convergence));
  constexpr int kMaxIter = 500;
  constexpr double kStepTol = 1e-8;
  ConvergenceResult res;
  for (const GridPoint& gp : grid) {
    const ModelConfig mc(gp.K, gp.M, gp.sigma_z, gp.sigma_w);
    const LikelihoodContext ctx(mc, gp.J);
    const int T = cfg.trials;
    std::vector<EmTrace> traces(T);
    parallel_for(T, cfg.threads, [&](int t) {
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(t);
      NormalSampler rng(seed);
      std::vector<double> xt = normal_vector(rng, gp.K);
      SampleSet ss = generate_samples(mc, SignalParams{xt}, rng.raw());
      EmSettings s = default_em_settings(gp.J);
      s.max_iter = kMaxIter;
      s.delta_x = 0.0;
      s.delta_loglik = 0.0;
      traces[t] = run_em(ctx, ss, s);
    });

    ConvergenceCurves curves;
    curves.point = gp;
    curves.trials = T;
    curves.median_dist.resize(kMaxIter + 1);
    curves.median_gap.resize(kMaxIter + 1);
    std::vector<double> iters_to_tol(T);
    for (int t = 0; t < T; ++t) {
      if (traces[t].termination == EmTermination::SolverFailure) ++curves.solver_failures;
      const auto& iters = traces[t].iterates;
      double found = kMaxIter;
      for (std::size_t i = 1; i < iters.size(); ++i) {
        double step2 = 0.0;
        for (int k = 0; k < gp.K; ++k) {
          const double d = iters[i].x[k] - iters[i - 1].x[k];
          step2 += d * d;
        }
        if (std::sqrt(step2) < kStepTol) {
          found = static_cast<double>(i);
          break;
        }
      }
      iters_to_tol[t] = found;
    }
    std::vector<double> buf(T);
    for (int i = 0; i <= kMaxIter; ++i) {
      for (int t = 0; t < T; ++t) {
        const auto& tr = traces[t];
        const std::size_t idx =
            std::min<std::size_t>(i, tr.iterates.size() - 1);
        const auto& xf = tr.final_x().x;
        double d2 = 0.0;
        for (int k = 0; k < gp.K; ++k) {
          const double d = tr.iterates[idx].x[k] - xf[k];
          d2 += d * d;
        }
        buf[t] = std::sqrt(d2);
      }
      curves.median_dist[i] = median(buf);
      for (int t = 0; t < T; ++t) {
        const auto& tr = traces[t];
        const std::size_t idx = std::min<std::size_t>(i, tr.logliks.size() - 1);
        buf[t] = tr.final_loglik() - tr.logliks[idx];
      }
      curves.median_gap[i] = median(buf);
    }
    curves.median_iters_to_tol = median(iters_to_tol);
    res.curves.push_back(std::move(curves));
  }

  if (!cfg.output_path.empty()) {
    const auto dir = prepare_output_dir(cfg);
    CsvWriter csv(dir / "curves.csv");
    csv.header(with_point_header({"iteration", "median_dist_to_final", "median_loglik_gap"}));
    for (const ConvergenceCurves& c : res.curves)
      for (std::size_t i = 0; i < c.median_dist.size(); ++i) {
        point_fields(csv, c.point);
        csv.field(static_cast<int>(i)).field(c.median_dist[i]).field(c.median_gap[i]);
        csv.end_row();
      }
    CsvWriter sum(dir / "summary.csv");
    sum.header(with_point_header({"trials", "solver_failures", "median_iters_to_tol"}));
    for (const ConvergenceCurves& c : res.curves) {
      point_fields(sum, c.point);
      sum.field(c.trials).field(c.solver_failures).field(c.median_iters_to_tol);
      sum.end_row();
    }
  }
  return res;
}

InitResult run_init_sensitivity(const ExperimentConfig& cfg) {
  const auto grid = expand_grid(grid_with_defaults(cfg.grid, ExperimentKind::InitSensitivity));
  constexpr int kRandomInits = 10;
  constexpr int kRuns = 3 + kRandomInits;
  constexpr double kSpreadTol = 1e-3;
  InitResult res;
  for (const GridPoint& gp : grid) {
    const ModelConfig mc(gp.K, gp.M, gp.sigma_z, gp.sigma_w);
    const LikelihoodContext ctx(mc, gp.J);
    const int T = cfg.trials;
    std::vector<InitTrialRow> rows(static_cast<std::size_t>(T) * kRuns);
    parallel_for(T, cfg.threads, [&](int t) {
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(t);
      NormalSampler rng(seed);
      std::vector<double> xt = normal_vector(rng, gp.K);
      SampleSet ss = generate_samples(mc, SignalParams{xt}, rng.raw());

      struct RunSpec {
        std::string name;
        EmSettings settings;
      };
      std::vector<RunSpec> specs;
      {
        EmSettings s = default_em_settings(gp.J);
        s.init = EmInit::TrueX;
        s.init_x = xt;
        specs.push_back({"true", s});
      }
      {
        EmSettings s = default_em_settings(gp.J);
        s.init = EmInit::NoJitterLinear;
        specs.push_back({"nojitter", s});
      }
      {
        EmSettings s = default_em_settings(gp.J);
        s.init = EmInit::Zero;
        specs.push_back({"zero", s});
      }
      for (int r = 0; r < kRandomInits; ++r) {
        EmSettings s = default_em_settings(gp.J);
        s.init = EmInit::Random;
        s.init_seed = rng.raw();
        specs.push_back({"random" + std::to_string(r), s});
      }

      double nojitter_ll = 0.0;
      for (int r = 0; r < kRuns; ++r) {
        EmTrace trace = run_em(ctx, ss, specs[r].settings);
        InitTrialRow row;
        row.point = gp;
        row.trial = t;
        row.init = specs[r].name;
        row.final_loglik = trace.final_loglik();
        row.iterations = trace.iterations;
        rows[static_cast<std::size_t>(t) * kRuns + r] = std::move(row);
        if (specs[r].name == "nojitter") nojitter_ll = trace.final_loglik();
      }
      for (int r = 0; r < kRuns; ++r) {
        auto& row = rows[static_cast<std::size_t>(t) * kRuns + r];
        row.rel_loglik = row.final_loglik - nojitter_ll;
      }
    });

    InitSummaryRow sumrow;
    sumrow.point = gp;
    sumrow.trials = T;
    std::vector<double> spreads(T);
    int below = 0, nj_near = 0;
    for (int t = 0; t < T; ++t) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      double nj = 0.0;
      for (int r = 0; r < kRuns; ++r) {
        const auto& row = rows[static_cast<std::size_t>(t) * kRuns + r];
        lo = std::min(lo, row.final_loglik);
        hi = std::max(hi, row.final_loglik);
        if (row.init == "nojitter") nj = row.final_loglik;
      }
      spreads[t] = hi - lo;
      if (spreads[t] < kSpreadTol) ++below;
      if (hi - nj < kSpreadTol) ++nj_near;
    }
    sumrow.median_spread = median(spreads);
    sumrow.frac_spread_below_tol = static_cast<double>(below) / T;
    sumrow.frac_nojitter_near_best = static_cast<double>(nj_near) / T;
    res.summary.push_back(sumrow);
    res.rows.insert(res.rows.end(), std::make_move_iterator(rows.begin()),
                    std::make_move_iterator(rows.end()));
  }

  if (!cfg.output_path.empty()) {
    const auto dir = prepare_output_dir(cfg);
    CsvWriter csv(dir / "trials.csv");
    csv.header(with_point_header({"trial", "init", "final_loglik", "rel_loglik", "iterations"}));
    for (const InitTrialRow& r : res.rows) {
      point_fields(csv, r.point);
      csv.field(r.trial).field(r.init).field(r.final_loglik).field(r.rel_loglik);
      csv.field(r.iterations);
      csv.end_row();
    }
    CsvWriter sum(dir / "summary.csv");
    sum.header(with_point_header({"trials", "median_spread", "frac_spread_below_tol",
                                  "frac_nojitter_near_best"}));
    for (const InitSummaryRow& r : res.summary) {
      point_fields(sum, r.point);
      sum.field(r.trials).field(r.median_spread).field(r.frac_spread_below_tol);
      sum.field(r.frac_nojitter_near_best);
      sum.end_row();
    }
  }
  return res;
}

BlueResult run_blue_invalidity(const ExperimentConfig& cfg) {
  const auto grid = expand_grid(grid_with_defaults(cfg.grid, ExperimentKind::BlueInvalidity));
  const GridPoint gp = grid.front();
  const ModelConfig mc(gp.K, gp.M, gp.sigma_z, gp.sigma_w);

  NormalSampler rng(cfg.base_seed);
  BlueResult res;
  res.point = gp;
  res.x_true = normal_vector(rng, gp.K);
  const SampleSet ss = generate_samples(mc, SignalParams{res.x_true}, rng.raw());
  res.direction = normal_vector(rng, gp.K);

  const QuadratureRule rule = jitter_rule(gp.sigma_z, gp.J);
  for (int i = 0; i <= 10; ++i) res.taus.push_back(0.2 * i);
  for (double tau : res.taus) {
    std::vector<double> xa(gp.K);
    for (int k = 0; k < gp.K; ++k) xa[k] = tau * res.direction[k];
    res.estimates.push_back(blue_diagnostic(mc, SignalParams{xa}, ss, rule).x);
  }

  const ExpectedBasis eh = expected_H(mc, rule);
  const std::vector<double> ref = linear_unbiased(mc, eh, ss).x;
  res.zero_matches_unweighted =
      std::memcmp(res.estimates.front().data(), ref.data(), sizeof(double) * gp.K) == 0;

  for (int k = 0; k < gp.K; ++k) {
    double lo = res.estimates[0][k], hi = lo;
    for (const auto& est : res.estimates) {
      lo = std::min(lo, est[k]);
      hi = std::max(hi, est[k]);
    }
    res.max_variation = std::max(res.max_variation, hi - lo);
  }

  if (!cfg.output_path.empty()) {
    const auto dir = prepare_output_dir(cfg);
    CsvWriter csv(dir / "sweep.csv");
    csv.header(with_point_header({"tau", "coeff_index", "estimate"}));
    for (std::size_t i = 0; i < res.taus.size(); ++i)
      for (int k = 0; k < gp.K; ++k) {
        point_fields(csv, gp);
        csv.field(res.taus[i]).field(k).field(res.estimates[i][k]);
        csv.end_row();
      }
    CsvWriter sum(dir / "summary.csv");
    sum.header(with_point_header({"n_tau", "max_variation", "zero_matches_unweighted"}));
    point_fields(sum, gp);
    sum.field(static_cast<int>(res.taus.size())).field(res.max_variation);
    sum.field(res.zero_matches_unweighted ? 1 : 0);
    sum.end_row();
  }
  return res;
}

namespace {

struct LogCurve {
  std::vector<double> ls, lm;
};

LogCurve to_log_curve(const MseCurve& c, double sigma_min) {
  LogCurve out;
  for (std::size_t i = 0; i < c.sigma_z.size(); ++i)
    if (c.sigma_z[i] >= sigma_min && c.mse[i] > 0.0) {
      out.ls.push_back(std::log(c.sigma_z[i]));
      out.lm.push_back(std::log(c.mse[i]));
    }
  return out;
}

// Rightmost point where the piecewise-linear curve attains level L.
std::optional<double> invert_last(const LogCurve& c, double L) {
  for (int i = static_cast<int>(c.ls.size()) - 2; i >= 0; --i) {
    const double a = c.lm[i], b = c.lm[i + 1];
    if (L < std::min(a, b) || L > std::max(a, b)) continue;
    if (a == b) return c.ls[i + 1];
    const double t = (L - a) / (b - a);
    return c.ls[i] + t * (c.ls[i + 1] - c.ls[i]);
  }
  return std::nullopt;
}

}  // namespace

ImprovementFactor improvement_factor(const MseCurve& em, const MseCurve& linear,
                                     double sigma_min) {
  ImprovementFactor out;
  const LogCurve e = to_log_curve(em, sigma_min);
  const LogCurve l = to_log_curve(linear, sigma_min);
  if (e.ls.size() < 2 || l.ls.size() < 2) return out;

  std::vector<double> levels;
  levels.insert(levels.end(), e.lm.begin(), e.lm.end());
  levels.insert(levels.end(), l.lm.begin(), l.lm.end());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  for (double L : levels) {
    const auto se = invert_last(e, L);
    const auto sl = invert_last(l, L);
    if (!se || !sl) continue;
    const double ratio = std::exp(*se - *sl);
    if (!out.measurable || ratio > out.factor) {
      out.factor = ratio;
      out.sigma_z_at_max = std::exp(*se);
    }
    out.measurable = true;
  }
  return out;
}

ImprovementResult run_jitter_improvement(const ExperimentConfig& cfg) {
  GridSpec g = grid_with_defaults(cfg.grid, ExperimentKind::JitterImprovement);
  std::vector<double> sigmas = g.sigma_z;
  std::sort(sigmas.begin(), sigmas.end());

  ImprovementResult res;
  for (int K : g.K)
    for (int M : g.M)
      for (int J : g.J)
        for (double sw : g.sigma_w) {
          ImprovementCase c;
          c.K = K;
          c.M = M;
          c.J = J;
          c.sigma_w = sw;
          for (double sz : sigmas) {
            const GridPoint gp{K, M, J, sz, sw};
            const ModelConfig mc(K, M, sz, sw);
            const LikelihoodContext ctx(mc, J);
            const ExpectedBasis eh = expected_H(mc, ctx.rule);
            const int T = cfg.trials;
            std::vector<TrialRecord> recs(static_cast<std::size_t>(T) * 2);
            parallel_for(T, cfg.threads, [&](int t) {
              standard_trial(cfg, gp, mc, ctx, eh, t, nullptr, false, &recs[t * 2]);
            });
            GroupStats lin_st = group_stats(recs, 0, 2, 0, K);
            GroupStats em_st = group_stats(recs, 0, 2, 1, K);
            c.lin.sigma_z.push_back(sz);
            c.lin.mse.push_back(lin_st.mean_sq);
            c.lin_ci_half.push_back(lin_st.ci_half_sq);
            c.em.sigma_z.push_back(sz);
            c.em.mse.push_back(em_st.mean_sq);
            c.em_ci_half.push_back(em_st.ci_half_sq);
          }
          c.factor = improvement_factor(c.em, c.lin, sw);
          res.cases.push_back(std::move(c));
        }

  if (!cfg.output_path.empty()) {
    const auto dir = prepare_output_dir(cfg);
    CsvWriter csv(dir / "curves.csv");
    csv.header({"K", "M", "J", "sigma_w", "estimator", "sigma_z", "mse_mean", "mse_ci_half"});
    for (const ImprovementCase& c : res.cases)
      for (std::size_t i = 0; i < c.em.sigma_z.size(); ++i) {
        csv.field(c.K).field(c.M).field(c.J).field(c.sigma_w);
        csv.field(std::string("linear_unbiased")).field(c.lin.sigma_z[i]);
        csv.field(c.lin.mse[i]).field(c.lin_ci_half[i]);
        csv.end_row();
        csv.field(c.K).field(c.M).field(c.J).field(c.sigma_w);
        csv.field(std::string("em")).field(c.em.sigma_z[i]);
        csv.field(c.em.mse[i]).field(c.em_ci_half[i]);
        csv.end_row();
      }
    CsvWriter sum(dir / "summary.csv");
    sum.header({"K", "M", "J", "sigma_w", "measurable", "improvement_factor",
                "sigma_z_at_max"});
    for (const ImprovementCase& c : res.cases) {
      sum.field(c.K).field(c.M).field(c.J).field(c.sigma_w);
      sum.field(c.factor.measurable ? 1 : 0).field(c.factor.factor);
      sum.field(c.factor.sigma_z_at_max);
      sum.end_row();
    }
  }
  return res;
}

HistogramResult run_histogram_validation(const ExperimentConfig& cfg) {
  const auto grid = expand_grid(grid_with_defaults(cfg.grid, ExperimentKind::HistogramValidation));
  const GridPoint gp = grid.front();
  const ModelConfig mc(gp.K, gp.M, gp.sigma_z, gp.sigma_w);
  constexpr int kDraws = 100000;
  constexpr double kBinWidth = 0.05;

  HistogramResult res;
  res.point = gp;
  res.draws = kDraws;
  NormalSampler xr(cfg.base_seed);
  res.x_true = normal_vector(xr, gp.K);
  const SignalParams x{res.x_true};
  const LikelihoodContext ctx(mc, gp.J);

  res.per_n.resize(mc.N);
  std::vector<std::vector<HistogramBinRow>> rows_per_n(mc.N);
  parallel_for(mc.N, cfg.threads, [&](int n) {
    NormalSampler rng(mix_seed(cfg.base_seed, static_cast<std::uint64_t>(n)));
    std::vector<double> h(gp.K);
    std::vector<double> ys(kDraws);
    for (int s = 0; s < kDraws; ++s) {
      const double z = gp.sigma_z * rng();
      const double w = gp.sigma_w * rng();
      basis_row_into(mc, n, z, h.data());
      double v = 0.0;
      for (int k = 0; k < gp.K; ++k) v += h[k] * res.x_true[k];
      ys[s] = v + w;
    }
    long long bin_lo = std::numeric_limits<long long>::max();
    long long bin_hi = std::numeric_limits<long long>::min();
    for (double y : ys) {
      const long long b = static_cast<long long>(std::floor(y / kBinWidth));
      bin_lo = std::min(bin_lo, b);
      bin_hi = std::max(bin_hi, b);
    }
    const int n_bins = static_cast<int>(bin_hi - bin_lo + 1);
    std::vector<int> counts(n_bins, 0);
    for (double y : ys) {
      const long long b = static_cast<long long>(std::floor(y / kBinWidth));
      ++counts[static_cast<int>(b - bin_lo)];
    }

    int within = 0;
    auto& rows = rows_per_n[n];
    rows.reserve(n_bins);
    for (int b = 0; b < n_bins; ++b) {
      const double left = (bin_lo + b) * kBinWidth;
      const double mid = left + 0.5 * kBinWidth;
      const double right = left + kBinWidth;
      // Bin probability under the quadrature density, Simpson on the bin.
      const double p_left = marginal_pdf(ctx, n, left, x);
      const double p_mid = marginal_pdf(ctx, n, mid, x);
      const double p_right = marginal_pdf(ctx, n, right, x);
      const double p_bin = kBinWidth * (p_left + 4.0 * p_mid + p_right) / 6.0;

      HistogramBinRow row;
      row.n = n;
      row.center = mid;
      row.observed_density = counts[b] / (kDraws * kBinWidth);
      row.model_density = p_bin / kBinWidth;
      const double p_clamped = std::clamp(p_bin, 0.0, 1.0);
      row.band = 3.0 * std::sqrt(p_clamped * (1.0 - p_clamped) / kDraws) / kBinWidth;
      row.within = std::fabs(row.observed_density - row.model_density) <= row.band;
      if (row.within) ++within;
      rows.push_back(row);
    }
    res.per_n[n] = {n, n_bins, static_cast<double>(within) / n_bins};
  });

  res.worst_n = 0;
  res.worst_frac = 1.0;
  for (const HistogramPerN& p : res.per_n) {
    if (p.frac_within < res.worst_frac) {
      res.worst_frac = p.frac_within;
      res.worst_n = p.n;
    }
    res.bins.insert(res.bins.end(), rows_per_n[p.n].begin(), rows_per_n[p.n].end());
  }

  if (!cfg.output_path.empty()) {
    const auto dir = prepare_output_dir(cfg);
    CsvWriter csv(dir / "bins.csv");
    csv.header({"n", "center", "observed_density", "model_density", "band", "within"});
    for (const HistogramBinRow& r : res.bins) {
      csv.field(r.n).field(r.center).field(r.observed_density).field(r.model_density);
      csv.field(r.band).field(r.within ? 1 : 0);
      csv.end_row();
    }
    CsvWriter sum(dir / "summary.csv");
    sum.header(with_point_header({"draws", "n", "bins", "frac_within"}));
    for (const HistogramPerN& p : res.per_n) {
      point_fields(sum, gp);
      sum.field(res.draws).field(p.n).field(p.bins).field(p.frac_within);
      sum.end_row();
    }
  }
  return res;
}

void run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::MsePerformance: {
      MseResult r = run_mse_sweep(cfg);
      for (const MseSummaryRow& s : r.summary)
        std::cout << "mse K=" << s.point.K << " M=" << s.point.M
                  << " sigma_z=" << s.point.sigma_z << " " << s.estimator
                  << " mse=" << s.mse_mean << " ci=" << s.mse_ci_half
                  << " failures=" << s.failures << "\n";
      break;
    }
    case ExperimentKind::CrbComparison: {
      CrbResult r = run_crb_comparison(cfg);
      for (const CrbSummaryRow& s : r.summary)
        std::cout << "crb K=" << s.point.K << " sigma_z=" << s.point.sigma_z << " "
                  << s.estimator << " total_mse=" << s.total_mse_mean
                  << " crb_y=" << s.crb_y << " crb_yz=" << s.crb_yz << "\n";
      break;
    }
    case ExperimentKind::Convergence: {
      ConvergenceResult r = run_convergence(cfg);
      for (const ConvergenceCurves& c : r.curves)
        std::cout << "convergence sigma_z=" << c.point.sigma_z
                  << " median_iters_to_tol=" << c.median_iters_to_tol
                  << " solver_failures=" << c.solver_failures << "\n";
      break;
    }
    case ExperimentKind::InitSensitivity: {
      InitResult r = run_init_sensitivity(cfg);
      for (const InitSummaryRow& s : r.summary)
        std::cout << "init sigma_z=" << s.point.sigma_z
                  << " median_spread=" << s.median_spread
                  << " frac_spread_below_tol=" << s.frac_spread_below_tol << "\n";
      break;
    }
    case ExperimentKind::BlueInvalidity: {
      BlueResult r = run_blue_invalidity(cfg);
      std::cout << "blue max_variation=" << r.max_variation
                << " zero_matches_unweighted=" << (r.zero_matches_unweighted ? 1 : 0)
                << "\n";
      break;
    }
    case ExperimentKind::JitterImprovement: {
      ImprovementResult r = run_jitter_improvement(cfg);
      for (const ImprovementCase& c : r.cases)
        std::cout << "improvement K=" << c.K << " M=" << c.M << " sigma_w=" << c.sigma_w
                  << " factor=" << c.factor.factor
                  << " sigma_z_at_max=" << c.factor.sigma_z_at_max << "\n";
      break;
    }
    case ExperimentKind::HistogramValidation: {
      HistogramResult r = run_histogram_validation(cfg);
      std::cout << "histogram worst_n=" << r.worst_n << " worst_frac=" << r.worst_frac
                << "\n";
      break;
    }
  }
}

}  // namespace sigjit
