#pragma once
/**
 * @file experiment.hpp
 * @brief Experiment runner behind the command line tool: configure, train,
 *        diagnose, compare with the finite-volume reference, emit artifacts.
 *
 * Run directory layout (under the output root):
 *
 *   <name>/config.json                 normalized spec echo
 *   <name>/history.csv                 per-step loss breakdown (pinn)
 *   <name>/checkpoints/epoch_<n>.bin   network checkpoints (pinn)
 *   <name>/<name>_pinn_macro.csv       macroscopic series of the network
 *   <name>/<name>_fd_macro.csv         macroscopic series of the reference
 *   <name>/fd_trajectory.bin           reference snapshots at diagnostic times
 *   <name>/profiles/<name>_<src>_profile_t<t>_x<x>.csv
 *   <name>/compare.csv                 t,l2_err,linf_err (mode both)
 */

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfp/diag.hpp"
#include "kfp/domain.hpp"
#include "kfp/train.hpp"

namespace kfp {

enum class RunMode { Pinn, Fd, Both };

struct ProfileRequest {
  double t;
  double x;
};

struct ExperimentSpec {
  std::string name;
  Problem problem;
  GridSpacing grid;
  TrainConfig train;
  RunMode mode = RunMode::Both;
  std::vector<double> diag_times;
  std::vector<ProfileRequest> profiles;
  /// Diagnostic (x, v) spacing; defaults to the training grid.
  double diag_dx = 0.0;
  double diag_dv = 0.0;
  /// Reference solver spacing and CFL safety; spacing defaults to the training grid.
  double fd_dx = 0.0;
  double fd_dv = 0.0;
  double fd_safety = 0.9;
};

/// Parses and validates a spec. Throws ConfigError on any invalid entry.
ExperimentSpec parse_experiment(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentSpec& spec);

struct RunOutcome {
  int exit_code = 0;
  std::string status = "ok";  // "ok", "config error", "runtime error"
  std::string message;
  std::filesystem::path directory;
  std::optional<MacroRecord> final_pinn;
  std::optional<MacroRecord> final_fd;

  nlohmann::json to_json() const;
};

/// Output root from KFP_OUTPUT_ROOT, else "runs".
std::filesystem::path output_root();

RunOutcome run_experiment(const nlohmann::json& spec_json, const std::filesystem::path& root);
RunOutcome run_experiment_file(const std::filesystem::path& spec_path, const std::filesystem::path& root);

struct SweepOutcome {
  std::vector<std::string> values;
  std::vector<RunOutcome> runs;
  std::filesystem::path summary;
};

/// One independent run per value of `parameter` (sigma, beta, bc or ic) and a
/// summary CSV of final-time macroscopic quantities. Failed runs are marked in
/// the summary and do not stop the sweep.
SweepOutcome sweep(const nlohmann::json& template_spec, const std::string& parameter,
                   const std::vector<std::string>& values, const std::filesystem::path& root);

struct CompareRow {
  double t;
  double l2_err;
  double linf_err;
};

/// Network vs reference errors on every frame of a trajectory dump.
std::vector<CompareRow> compare(const NetParams& params, const std::vector<FieldSnapshot>& frames);

}  // namespace kfp
