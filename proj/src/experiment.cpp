#include "kfp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kfp/fdsolver.hpp"
#include "kfp/io.hpp"

namespace kfp {

namespace fs = std::filesystem;

namespace {

RunMode parse_mode(const std::string& name) {
  if (name == "pinn") return RunMode::Pinn;
  if (name == "fd") return RunMode::Fd;
  if (name == "both") return RunMode::Both;
  throw ConfigError("unknown mode '" + name + "'");
}

std::string mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::Pinn: return "pinn";
    case RunMode::Fd: return "fd";
    case RunMode::Both: return "both";
  }
  return "both";
}

bool uses_pinn(RunMode m) { return m != RunMode::Fd; }
bool uses_fd(RunMode m) { return m != RunMode::Pinn; }

std::string short_number(double value) {
  std::ostringstream os;
  os << value;
  return os.str();
}

std::string to_csv(const std::function<void(std::ostream&)>& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

// Mass of the initial condition sampled at the nodes of a grid.
double initial_mass(const Problem& problem, std::span<const double> x, std::span<const double> v) {
  const FieldSnapshot s =
      snapshot([&](double, double xx, double vv) { return eval_initial(problem.ic, xx, vv); }, 0.0, x, v);
  return riemann_integral(s, [](double, double) { return 1.0; });
}

std::size_t nearest_index(std::span<const double> nodes, double value) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (std::abs(nodes[i] - value) < std::abs(nodes[best] - value)) best = i;
  return best;
}

std::string profile_file(const std::string& experiment, const ProfileRequest& p) {
  return experiment + "_profile_t" + short_number(p.t) + "_x" + short_number(p.x) + ".csv";
}

void run_pinn(const ExperimentSpec& spec, const fs::path& dir, RunOutcome& outcome, const std::vector<double>& diag_x,
              const std::vector<double>& diag_v, const std::vector<FieldSnapshot>* reference) {
  const GridSet grid = make_grid(spec.problem, spec.grid);
  const TrainResult result = train(spec.problem, grid, spec.train, [&](std::size_t epoch, const NetParams& params) {
    save_checkpoint(params, dir / "checkpoints" / ("epoch_" + std::to_string(epoch) + ".bin"));
  });
  write_text(dir / "history.csv", to_csv([&](std::ostream& os) { write_history_csv(result.history, os); }));
  if (result.aborted) throw NonFiniteError("training aborted: " + result.abort_reason);
  save_checkpoint(result.params, dir / "checkpoints" / "final.bin");

  const double m_ref = initial_mass(spec.problem, diag_x, diag_v);
  const auto records = time_series([&](double t) { return snapshot(result.params, t, diag_x, diag_v); },
                                   spec.problem, spec.diag_times, m_ref);
  write_text(dir / (spec.name + "_pinn_macro.csv"), to_csv([&](std::ostream& os) { write_macro_csv(records, os); }));
  if (!records.empty()) outcome.final_pinn = records.back();

  const std::string experiment = spec.name + "_pinn";
  for (const ProfileRequest& p : spec.profiles) {
    const FieldSnapshot s = snapshot(result.params, p.t, std::vector<double>{p.x}, diag_v);
    const std::vector<double> raw(s.values.data(), s.values.data() + s.values.size());
    const auto shown = truncate_profile(raw);
    write_text(dir / "profiles" / profile_file(experiment, p),
               to_csv([&](std::ostream& os) { write_profile_csv(diag_v, shown, os); }));
  }

  if (reference != nullptr) {
    const auto rows = compare(result.params, *reference);
    std::ostringstream os;
    os << "t,l2_err,linf_err\n";
    for (const CompareRow& r : rows)
      os << format_number(r.t) << ',' << format_number(r.l2_err) << ',' << format_number(r.linf_err) << '\n';
    write_text(dir / "compare.csv", os.str());
  }
}

// Returns the reference snapshots at the diagnostic times.
std::vector<FieldSnapshot> run_fd(const ExperimentSpec& spec, const fs::path& dir, RunOutcome& outcome) {
  const FdGrid grid = FdGrid::make(spec.problem, spec.fd_dx, spec.fd_dv);
  std::vector<double> times = spec.diag_times;
  for (const ProfileRequest& p : spec.profiles) times.push_back(p.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  FdSolveOptions options;
  options.safety = spec.fd_safety;
  const auto frames = solve(spec.problem, grid, times, options);
  const double m_ref =
      macroscopic(initial_state(spec.problem, grid, options.ic_subcells).field, spec.problem.sigma, spec.problem.beta, 1.0)
          .mass;

  std::vector<FieldSnapshot> diag_frames;
  std::vector<MacroRecord> records;
  for (double t : spec.diag_times) {
    const auto& frame = frames[static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin())];
    diag_frames.push_back(frame);
    records.push_back(macroscopic(frame, spec.problem.sigma, spec.problem.beta, m_ref));
  }
  write_text(dir / (spec.name + "_fd_macro.csv"), to_csv([&](std::ostream& os) { write_macro_csv(records, os); }));
  if (!records.empty()) {
    outcome.final_fd = records.back();
    save_trajectory(diag_frames, dir / "fd_trajectory.bin");
  }

  const std::string experiment = spec.name + "_fd";
  for (const ProfileRequest& p : spec.profiles) {
    const auto& frame = frames[static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), p.t) - times.begin())];
    const auto j = static_cast<Eigen::Index>(nearest_index(frame.x, p.x));
    std::vector<double> row(static_cast<std::size_t>(frame.values.cols()));
    for (Eigen::Index k = 0; k < frame.values.cols(); ++k) row[static_cast<std::size_t>(k)] = frame.values(j, k);
    write_text(dir / "profiles" / profile_file(experiment, p),
               to_csv([&](std::ostream& os) { write_profile_csv(frame.v, row, os); }));
  }
  return diag_frames;
}

}  // namespace

ExperimentSpec parse_experiment(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("experiment spec must be a JSON object");
  ExperimentSpec spec;
  try {
    spec.name = j.value("name", std::string("experiment"));
    if (spec.name.empty() || spec.name.find_first_of("/\\") != std::string::npos)
      throw ConfigError("experiment name must be a plain, non-empty file name");
    spec.problem = problem_from_json(j);
    spec.grid = grid_from_json(j);
    spec.mode = parse_mode(j.value("mode", std::string("both")));
    spec.train = train_config_from_json(j.value("train", nlohmann::json::object()));

    const nlohmann::json diag = j.value("diag", nlohmann::json::object());
    if (diag.contains("times")) {
      spec.diag_times = diag.at("times").get<std::vector<double>>();
    } else {
      for (int i = 0; i <= 10; ++i) spec.diag_times.push_back(spec.problem.t_end * i / 10.0);
    }
    for (const auto& p : diag.value("profiles", nlohmann::json::array()))
      spec.profiles.push_back({p.at("t").get<double>(), p.at("x").get<double>()});
    spec.diag_dx = diag.value("dx", spec.grid.dx);
    spec.diag_dv = diag.value("dv", spec.grid.dv);

    const nlohmann::json fd = j.value("fd", nlohmann::json::object());
    spec.fd_dx = fd.value("dx", spec.grid.dx);
    spec.fd_dv = fd.value("dv", spec.grid.dv);
    spec.fd_safety = fd.value("safety", spec.fd_safety);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment spec: ") + e.what());
  }

  if (!std::is_sorted(spec.diag_times.begin(), spec.diag_times.end()))
    throw ConfigError("diagnostic times must be sorted");
  for (double t : spec.diag_times)
    if (t < 0.0 || t > spec.problem.t_end) throw ConfigError("diagnostic time outside [0, T]");
  for (const ProfileRequest& p : spec.profiles) {
    if (p.t < 0.0 || p.t > spec.problem.t_end) throw ConfigError("profile time outside [0, T]");
    if (p.x < -1.0 || p.x > 1.0) throw ConfigError("profile position outside [-1, 1]");
  }
  if (!(spec.fd_safety > 0.0 && spec.fd_safety <= 1.0)) throw ConfigError("fd safety must lie in (0, 1]");
  // Grid checks up front so a bad spec produces no artifacts.
  if (uses_pinn(spec.mode)) uniform_nodes({0.0, spec.problem.t_end}, spec.grid.dt);
  uniform_nodes(spec.problem.x_domain, spec.grid.dx);
  uniform_nodes(spec.problem.v_domain, spec.grid.dv);
  uniform_nodes(spec.problem.x_domain, spec.diag_dx);
  uniform_nodes(spec.problem.v_domain, spec.diag_dv);
  if (uses_fd(spec.mode)) FdGrid::make(spec.problem, spec.fd_dx, spec.fd_dv);
  return spec;
}

nlohmann::json experiment_to_json(const ExperimentSpec& spec) {
  nlohmann::json j = problem_to_json(spec.problem);
  j["name"] = spec.name;
  j["mode"] = mode_name(spec.mode);
  j["grid"] = {{"dt", spec.grid.dt}, {"dx", spec.grid.dx}, {"dv", spec.grid.dv}};
  j["train"] = train_config_to_json(spec.train);
  nlohmann::json profiles = nlohmann::json::array();
  for (const ProfileRequest& p : spec.profiles) profiles.push_back({{"t", p.t}, {"x", p.x}});
  j["diag"] = {{"times", spec.diag_times}, {"profiles", profiles}, {"dx", spec.diag_dx}, {"dv", spec.diag_dv}};
  j["fd"] = {{"dx", spec.fd_dx}, {"dv", spec.fd_dv}, {"safety", spec.fd_safety}};
  return j;
}

nlohmann::json RunOutcome::to_json() const {
  nlohmann::json j = {{"status", status}, {"exit_code", exit_code}, {"directory", directory.string()}};
  if (!message.empty()) j["message"] = message;
  return j;
}

fs::path output_root() {
  if (const char* env = std::getenv("KFP_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

RunOutcome run_experiment(const nlohmann::json& spec_json, const fs::path& root) {
  RunOutcome outcome;
  ExperimentSpec spec;
  try {
    spec = parse_experiment(spec_json);
  } catch (const ConfigError& e) {
    outcome.exit_code = 2;
    outcome.status = "config error";
    outcome.message = e.what();
    return outcome;
  }

  outcome.directory = root / spec.name;
  try {
    fs::create_directories(outcome.directory);
    write_text(outcome.directory / "config.json", experiment_to_json(spec).dump(2) + "\n");
    const auto diag_x = uniform_nodes(spec.problem.x_domain, spec.diag_dx);
    const auto diag_v = uniform_nodes(spec.problem.v_domain, spec.diag_dv);
    std::vector<FieldSnapshot> reference;
    if (uses_fd(spec.mode)) reference = run_fd(spec, outcome.directory, outcome);
    if (uses_pinn(spec.mode))
      run_pinn(spec, outcome.directory, outcome, diag_x, diag_v, spec.mode == RunMode::Both ? &reference : nullptr);
  } catch (const std::exception& e) {
    outcome.exit_code = 3;
    outcome.status = "runtime error";
    outcome.message = e.what();
    try {
      write_text(outcome.directory / "error.json", outcome.to_json().dump(2) + "\n");
    } catch (const std::exception&) {
      // The outcome JSON on stdout still reports the failure.
    }
  }
  return outcome;
}

RunOutcome run_experiment_file(const fs::path& spec_path, const fs::path& root) {
  nlohmann::json j;
  try {
    std::ifstream in(spec_path);
    if (!in) throw ConfigError("cannot read spec file " + spec_path.string());
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    RunOutcome outcome;
    outcome.exit_code = 2;
    outcome.status = "config error";
    outcome.message = e.what();
    return outcome;
  }
  return run_experiment(j, root);
}

SweepOutcome sweep(const nlohmann::json& template_spec, const std::string& parameter,
                   const std::vector<std::string>& values, const fs::path& root) {
  if (parameter != "sigma" && parameter != "beta" && parameter != "bc" && parameter != "ic")
    throw ConfigError("sweep parameter must be one of sigma, beta, bc, ic");
  if (values.empty()) throw ConfigError("sweep needs at least one value");

  SweepOutcome out;
  const std::string base = template_spec.value("name", std::string("experiment"));
  std::ostringstream summary;
  summary << "value,status,t,mass,ke,ent,fe,eta,linf,ke_inf,ent_inf,fe_inf\n";
  for (const std::string& value : values) {
    nlohmann::json spec = template_spec;
    spec["name"] = base + "_" + parameter + value;
    RunOutcome run;
    try {
      if (parameter == "sigma" || parameter == "beta") {
        std::size_t used = 0;
        const double number = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        spec[parameter] = number;
      } else {
        spec[parameter] = value;
      }
      run = run_experiment(spec, root);
    } catch (const std::exception& e) {
      run.exit_code = 2;
      run.status = "config error";
      run.message = std::string("bad sweep value '") + value + "': " + e.what();
    }

    const std::optional<MacroRecord>& final = run.final_fd ? run.final_fd : run.final_pinn;
    summary << value << ',' << (run.exit_code == 0 ? "ok" : "failed");
    if (run.exit_code == 0 && final) {
      const MacroRecord& r = *final;
      summary << ',' << format_number(r.t) << ',' << format_number(r.mass) << ',' << format_number(r.kinetic_energy)
              << ',' << format_number(r.entropy) << ',' << (r.free_energy ? format_number(*r.free_energy) : "")
              << ',' << (r.lyapunov ? format_number(*r.lyapunov) : "") << ',' << format_number(r.l_inf);
      const double sigma = spec.value("sigma", 1.0);
      const double beta = spec.value("beta", 1.0);
      if (beta > 0.0 && r.mass > 0.0) {
        const auto eq = equilibrium_quantities(sigma, beta, r.mass);
        summary << ',' << format_number(eq.kinetic_energy) << ',' << format_number(eq.entropy) << ','
                << format_number(eq.free_energy);
      } else {
        summary << ",,,";
      }
    } else {
      summary << ",,,,,,,,,,";
    }
    summary << '\n';
    out.values.push_back(value);
    out.runs.push_back(std::move(run));
  }
  out.summary = root / (base + "_" + parameter + "_summary.csv");
  write_text(out.summary, summary.str());
  return out;
}

std::vector<CompareRow> compare(const NetParams& params, const std::vector<FieldSnapshot>& frames) {
  std::vector<CompareRow> rows;
  rows.reserve(frames.size());
  for (const FieldSnapshot& frame : frames) {
    const FieldSnapshot net = snapshot(params, frame.t, frame.x, frame.v);
    const FieldError err = field_error(net, frame);
    rows.push_back({frame.t, err.l2, err.linf});
  }
  return rows;
}

}  // namespace kfp
