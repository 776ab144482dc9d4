// Command line front end: run, sweep, compare, gradcheck.

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kfp/experiment.hpp"
#include "kfp/io.hpp"
#include "kfp/net.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<kfp::Point> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> t(0.0, 5.0), x(-1.0, 1.0), v(-10.0, 10.0);
  std::vector<kfp::Point> points;
  for (std::size_t i = 0; i < n; ++i) points.push_back({t(rng), x(rng), v(rng)});
  return points;
}

int print_error(const std::string& status, const std::string& message, int code) {
  std::cout << nlohmann::json{{"status", status}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural and finite-volume solvers for the 1D kinetic Fokker-Planck equation"};
  app.require_subcommand(1);

  std::string spec_path;
  auto* run = app.add_subcommand("run", "Run one experiment spec");
  run->add_option("spec", spec_path, "Experiment spec (JSON)")->required();

  std::string sweep_spec, sweep_param, sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per parameter value");
  sweep->add_option("spec", sweep_spec, "Template experiment spec (JSON)")->required();
  sweep->add_option("--param", sweep_param, "sigma, beta, bc or ic")->required();
  sweep->add_option("--values", sweep_values, "Comma separated values")->required();

  std::string ckpt_path, dump_path;
  auto* compare = app.add_subcommand("compare", "Network vs reference trajectory errors");
  compare->add_option("checkpoint", ckpt_path, "Network checkpoint")->required()->check(CLI::ExistingFile);
  compare->add_option("trajectory", dump_path, "Reference trajectory dump")->required()->check(CLI::ExistingFile);

  bool full = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of network derivatives");
  gradcheck->add_flag("--full", full, "Also check the 3-128-256-128-2 network");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const kfp::RunOutcome outcome = kfp::run_experiment_file(spec_path, kfp::output_root());
      std::cout << outcome.to_json().dump() << '\n';
      return outcome.exit_code;
    }
    if (*sweep) {
      std::ifstream in(sweep_spec);
      if (!in) throw kfp::ConfigError("cannot read spec file " + sweep_spec);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw kfp::ConfigError(std::string("malformed spec: ") + e.what());
      }
      const auto result = kfp::sweep(j, sweep_param, split_csv(sweep_values), kfp::output_root());
      nlohmann::json report = {{"status", "ok"}, {"summary", result.summary.string()}, {"runs", nlohmann::json::array()}};
      for (const auto& r : result.runs) report["runs"].push_back(r.to_json());
      std::cout << report.dump() << '\n';
      return 0;
    }
    if (*compare) {
      const auto rows = kfp::compare(kfp::load_checkpoint(ckpt_path), kfp::load_trajectory(dump_path));
      std::cout << "t,l2_err,linf_err\n";
      for (const auto& r : rows)
        std::cout << kfp::format_number(r.t) << ',' << kfp::format_number(r.l2_err) << ','
                  << kfp::format_number(r.linf_err) << '\n';
      return 0;
    }
    if (*gradcheck) {
      nlohmann::json report;
      const auto toy = kfp::init_network({{3, 4, 2}}, 1);
      const double toy_err = kfp::grad_check(toy, random_points(100, 2));
      report["toy_3_4_2"] = toy_err;
      bool ok = toy_err <= 1e-4;
      if (full) {
        kfp::GradCheckOptions options;
        options.max_params = 2000;
        const auto net = kfp::init_network(kfp::Architecture::standard(), 1);
        const double full_err = kfp::grad_check(net, random_points(5, 3), options);
        report["full_3_128_256_128_2"] = full_err;
        ok = ok && full_err <= 1e-3;
      }
      report["status"] = ok ? "ok" : "failed";
      std::cout << report.dump() << '\n';
      return ok ? 0 : 1;
    }
  } catch (const kfp::ConfigError& e) {
    return print_error("config error", e.what(), 2);
  } catch (const std::exception& e) {
    return print_error("runtime error", e.what(), 3);
  }
  return 0;
}
