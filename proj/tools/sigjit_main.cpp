#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigjit/crb.hpp"
#include "sigjit/csv.hpp"
#include "sigjit/em.hpp"
#include "sigjit/experiments.hpp"
#include "sigjit/linear.hpp"
#include "sigjit/numeric.hpp"

namespace {

sigjit::ModelConfig model_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const nlohmann::json j = nlohmann::json::parse(buf.str());
  if (!j.is_object()) throw std::invalid_argument("model config must be a JSON object");
  for (const auto& item : j.items()) {
    const std::string& k = item.key();
    if (k != "K" && k != "M" && k != "sigma_z" && k != "sigma_w")
      throw std::invalid_argument("unknown model config key: " + k);
  }
  return sigjit::ModelConfig(j.at("K").get<int>(), j.at("M").get<int>(),
                             j.at("sigma_z").get<double>(), j.at("sigma_w").get<double>());
}

sigjit::JitterFamily family_from_string(const std::string& name) {
  if (name == "auto") return sigjit::JitterFamily::Auto;
  if (name == "gh") return sigjit::JitterFamily::GaussHermite;
  if (name == "gltan") return sigjit::JitterFamily::GaussLegendreTan;
  throw std::invalid_argument("unknown family: " + name);
}

void print_rule(const sigjit::QuadratureRule& rule) {
  std::cout << "x,w\n";
  for (int j = 0; j < rule.order(); ++j)
    std::cout << sigjit::format_double(rule.abscissas[j]) << ','
              << sigjit::format_double(rule.weights[j]) << '\n';
}

void print_coefficients(const std::vector<double>& x, const std::string& out_path) {
  if (out_path.empty()) {
    for (double v : x) std::cout << sigjit::format_double(v) << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
  out << "k,x\n";
  for (std::size_t k = 0; k < x.size(); ++k)
    out << k << ',' << sigjit::format_double(x[k]) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimation of bandlimited signals from jittered, noisy samples"};
  app.require_subcommand(1);

  // rules
  auto* rules_cmd = app.add_subcommand("rules", "Print a quadrature rule as CSV");
  std::string rules_family = "gh";
  int rules_nodes = 10;
  double rules_a = -1.0, rules_b = 1.0, rules_sigma = 0.1;
  rules_cmd->add_option("--family", rules_family, "gh, gl, or jitter")
      ->check(CLI::IsMember({"gh", "gl", "jitter"}));
  rules_cmd->add_option("--nodes", rules_nodes, "rule order");
  rules_cmd->add_option("--a", rules_a, "left endpoint (gl)");
  rules_cmd->add_option("--b", rules_b, "right endpoint (gl)");
  rules_cmd->add_option("--sigma-z", rules_sigma, "jitter level (jitter family)");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Draw one sample set and write CSV");
  std::string sim_config, sim_out;
  std::uint64_t sim_seed = 0;
  sim_cmd->add_option("--config", sim_config, "model config JSON")->required();
  sim_cmd->add_option("--seed", sim_seed, "random seed");
  sim_cmd->add_option("--out", sim_out, "output CSV path")->required();

  // estimate
  auto* est_cmd = app.add_subcommand("estimate", "Estimate coefficients from samples");
  std::string est_config, est_samples, est_method = "em", est_out, est_init = "nojitter";
  std::string est_family = "auto";
  int est_nodes = 100, est_max_iter = 100;
  std::uint64_t est_init_seed = 0;
  est_cmd->add_option("--config", est_config, "model config JSON")->required();
  est_cmd->add_option("--samples", est_samples, "samples CSV with a y column")->required();
  est_cmd->add_option("--method", est_method, "em, linear, or nojitter")
      ->check(CLI::IsMember({"em", "linear", "nojitter"}));
  est_cmd->add_option("--nodes", est_nodes, "quadrature nodes");
  est_cmd->add_option("--family", est_family, "auto, gh, or gltan")
      ->check(CLI::IsMember({"auto", "gh", "gltan"}));
  est_cmd->add_option("--max-iter", est_max_iter, "EM iteration cap");
  est_cmd->add_option("--init", est_init, "EM init: nojitter, zero, or random")
      ->check(CLI::IsMember({"nojitter", "zero", "random"}));
  est_cmd->add_option("--init-seed", est_init_seed, "seed for random init");
  est_cmd->add_option("--out", est_out, "write k,x CSV instead of stdout");

  // crb
  auto* crb_cmd = app.add_subcommand("crb", "Estimation bounds at a coefficient vector");
  std::string crb_config, crb_x;
  int crb_draws = 1000, crb_nodes = 1000;
  std::uint64_t crb_seed = 0;
  std::string crb_family = "auto";
  crb_cmd->add_option("--config", crb_config, "model config JSON")->required();
  crb_cmd->add_option("--x", crb_x, "coefficient file, one value per line")->required();
  crb_cmd->add_option("--mc-draws", crb_draws, "Monte Carlo draws per sample");
  crb_cmd->add_option("--nodes", crb_nodes, "quadrature nodes");
  crb_cmd->add_option("--seed", crb_seed, "random seed");
  crb_cmd->add_option("--family", crb_family, "auto, gh, or gltan")
      ->check(CLI::IsMember({"auto", "gh", "gltan"}));

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run a simulation study");
  std::string exp_kind, exp_config, exp_out;
  std::uint64_t exp_seed = 0;
  bool exp_seed_set = false;
  int exp_threads = 1;
  exp_cmd->add_option("--kind", exp_kind,
                      "mse, crb, convergence, init, blue, improvement, or histogram")
      ->check(CLI::IsMember(
          {"mse", "crb", "convergence", "init", "blue", "improvement", "histogram"}));
  exp_cmd->add_option("--config", exp_config, "experiment config JSON");
  exp_cmd->add_option("--out", exp_out, "output directory");
  exp_cmd->add_option("--seed", exp_seed, "base seed override")
      ->each([&](const std::string&) { exp_seed_set = true; });
  exp_cmd->add_option("--threads", exp_threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rules_cmd->parsed()) {
      if (rules_family == "gh") {
        print_rule(sigjit::gauss_hermite_rule(rules_nodes));
      } else if (rules_family == "gl") {
        print_rule(sigjit::gauss_legendre_rule(rules_nodes, rules_a, rules_b));
      } else {
        print_rule(sigjit::jitter_rule(rules_sigma, rules_nodes));
      }
      return 0;
    }

    if (sim_cmd->parsed()) {
      const sigjit::ModelConfig cfg = model_from_json_file(sim_config);
      sigjit::NormalSampler rng(sim_seed);
      sigjit::SignalParams x{sigjit::normal_vector(rng, cfg.K)};
      const sigjit::SampleSet ss = sigjit::generate_samples(cfg, x, rng.raw());
      sigjit::write_samples_csv(sim_out, ss);
      std::cerr << "wrote " << ss.y.size() << " samples to " << sim_out << "\n";
      return 0;
    }

    if (est_cmd->parsed()) {
      const sigjit::ModelConfig cfg = model_from_json_file(est_config);
      sigjit::SampleSet ss = sigjit::read_samples_csv(est_samples);
      if (static_cast<int>(ss.y.size()) != cfg.N)
        throw std::runtime_error("sample count does not match K*M");

      if (est_method == "nojitter") {
        print_coefficients(sigjit::linear_nojitter(cfg, ss).x, est_out);
      } else if (est_method == "linear") {
        const sigjit::QuadratureRule rule =
            sigjit::jitter_rule(cfg.sigma_z, est_nodes, family_from_string(est_family));
        const sigjit::ExpectedBasis eh = sigjit::expected_H(cfg, rule);
        print_coefficients(sigjit::linear_unbiased(cfg, eh, ss).x, est_out);
      } else {
        sigjit::EmSettings settings;
        settings.nodes = est_nodes;
        settings.family = family_from_string(est_family);
        settings.max_iter = est_max_iter;
        if (est_init == "zero") settings.init = sigjit::EmInit::Zero;
        if (est_init == "random") {
          settings.init = sigjit::EmInit::Random;
          settings.init_seed = est_init_seed;
        }
        const sigjit::EmTrace trace = sigjit::run_em(cfg, ss, settings);
        std::cerr << "em iterations=" << trace.iterations
                  << " termination=" << sigjit::to_string(trace.termination)
                  << " loglik=" << sigjit::format_double(trace.final_loglik()) << "\n";
        print_coefficients(trace.final_x().x, est_out);
      }
      return 0;
    }

    if (crb_cmd->parsed()) {
      const sigjit::ModelConfig cfg = model_from_json_file(crb_config);
      const std::vector<double> x = sigjit::read_vector(crb_x);
      if (static_cast<int>(x.size()) != cfg.K)
        throw std::runtime_error("coefficient count does not match K");
      const sigjit::FisherEstimate fe =
          sigjit::crb_values(cfg, sigjit::SignalParams{x}, crb_draws, crb_seed, crb_nodes,
                             family_from_string(crb_family));
      std::cout << "crb_y," << sigjit::format_double(fe.crb_y) << "\n";
      std::cout << "crb_yz," << sigjit::format_double(fe.crb_yz) << "\n";
      std::cout << "cond_y," << sigjit::format_double(fe.cond_y) << "\n";
      std::cout << "cond_yz," << sigjit::format_double(fe.cond_yz) << "\n";
      return 0;
    }

    if (exp_cmd->parsed()) {
      sigjit::ExperimentConfig cfg;
      if (!exp_config.empty()) cfg = sigjit::ExperimentConfig::from_json_file(exp_config);
      if (!exp_kind.empty()) {
        cfg.kind = sigjit::experiment_kind_from_string(exp_kind);
        cfg.kind_set = true;
      }
      if (!cfg.kind_set)
        throw std::runtime_error("experiment kind missing: pass --kind or set it in the config");
      if (exp_seed_set) cfg.base_seed = exp_seed;
      if (!exp_out.empty()) cfg.output_path = exp_out;
      cfg.threads = exp_threads;
      sigjit::run_experiment(cfg);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
