#include "kfp/io.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kfp {

namespace {

constexpr std::array<char, 8> kNetMagic{'K', 'F', 'P', 'N', 'E', 'T', '0', '1'};
constexpr std::array<char, 8> kTrajMagic{'K', 'F', 'P', 'T', 'R', 'J', '0', '1'};

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("unexpected end of file");
  return value;
}

void expect_magic(std::istream& in, const std::array<char, 8>& magic, const std::filesystem::path& path) {
  std::array<char, 8> found{};
  in.read(found.data(), found.size());
  if (!in || found != magic) throw std::runtime_error("bad file header: " + path.string());
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

std::string optional_number(const std::optional<double>& value) { return value ? format_number(*value) : ""; }

}  // namespace

std::string format_number(double value) {
  std::array<char, 32> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return {buf.data(), static_cast<std::size_t>(n)};
}

void save_checkpoint(const NetParams& params, const std::filesystem::path& path) {
  const std::size_t n = params.parameter_count();
  if (path.extension() == ".json") {
    std::vector<double> flat(n);
    for (std::size_t i = 0; i < n; ++i) flat[i] = params.at(i);
    const nlohmann::json j = {{"layer_sizes", params.layer_sizes}, {"seed", params.seed}, {"params", flat}};
    open_out(path) << j.dump() << '\n';
    return;
  }
  auto out = open_out(path, std::ios::binary);
  out.write(kNetMagic.data(), kNetMagic.size());
  put<std::uint64_t>(out, params.layer_sizes.size());
  for (int s : params.layer_sizes) put<std::uint64_t>(out, static_cast<std::uint64_t>(s));
  put<std::uint64_t>(out, params.seed);
  for (std::size_t i = 0; i < n; ++i) put<double>(out, params.at(i));
}

NetParams load_checkpoint(const std::filesystem::path& path) {
  Architecture arch;
  std::uint64_t seed = 0;
  std::vector<double> flat;
  if (path.extension() == ".json") {
    auto in = open_in(path);
    const nlohmann::json j = nlohmann::json::parse(in);
    arch.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    seed = j.at("seed").get<std::uint64_t>();
    flat = j.at("params").get<std::vector<double>>();
  } else {
    auto in = open_in(path, std::ios::binary);
    expect_magic(in, kNetMagic, path);
    const auto n_layers = get<std::uint64_t>(in);
    if (n_layers > 1024) throw std::runtime_error("implausible layer count in " + path.string());
    for (std::uint64_t i = 0; i < n_layers; ++i) arch.layer_sizes.push_back(static_cast<int>(get<std::uint64_t>(in)));
    seed = get<std::uint64_t>(in);
    arch.validate();
    flat.resize(NetParams::zeros(arch).parameter_count());
    for (double& value : flat) value = get<double>(in);
  }
  NetParams params = NetParams::zeros(arch);
  params.seed = seed;
  if (flat.size() != params.parameter_count()) throw std::runtime_error("checkpoint size mismatch: " + path.string());
  for (std::size_t i = 0; i < flat.size(); ++i) params.at(i) = flat[i];
  return params;
}

void save_trajectory(const std::vector<FieldSnapshot>& frames, const std::filesystem::path& path) {
  if (frames.empty()) throw std::invalid_argument("empty trajectory");
  const FieldSnapshot& first = frames.front();
  auto out = open_out(path, std::ios::binary);
  out.write(kTrajMagic.data(), kTrajMagic.size());
  put<std::uint64_t>(out, first.x.size());
  put<std::uint64_t>(out, first.v.size());
  put<std::uint64_t>(out, frames.size());
  for (double x : first.x) put(out, x);
  for (double v : first.v) put(out, v);
  for (const FieldSnapshot& s : frames) {
    if (s.x != first.x || s.v != first.v) throw std::invalid_argument("trajectory frames use different grids");
    put(out, s.t);
    for (Eigen::Index j = 0; j < s.values.rows(); ++j)
      for (Eigen::Index k = 0; k < s.values.cols(); ++k) put(out, s.values(j, k));
  }
}

std::vector<FieldSnapshot> load_trajectory(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  expect_magic(in, kTrajMagic, path);
  const auto nx = get<std::uint64_t>(in);
  const auto nv = get<std::uint64_t>(in);
  const auto n_frames = get<std::uint64_t>(in);
  if (nx > (1u << 24) || nv > (1u << 24) || n_frames > (1u << 24))
    throw std::runtime_error("implausible trajectory header in " + path.string());
  std::vector<double> x(nx), v(nv);
  for (double& value : x) value = get<double>(in);
  for (double& value : v) value = get<double>(in);
  std::vector<FieldSnapshot> frames;
  frames.reserve(n_frames);
  for (std::uint64_t n = 0; n < n_frames; ++n) {
    FieldSnapshot s{get<double>(in), x, v, Eigen::MatrixXd(nx, nv)};
    for (Eigen::Index j = 0; j < s.values.rows(); ++j)
      for (Eigen::Index k = 0; k < s.values.cols(); ++k) s.values(j, k) = get<double>(in);
    frames.push_back(std::move(s));
  }
  return frames;
}

void write_history_csv(const std::vector<HistoryRow>& history, std::ostream& out) {
  out << "epoch,ge,ic,bc,mass,total\n";
  for (const HistoryRow& row : history) {
    out << row.epoch << ',' << format_number(row.loss.ge) << ',' << format_number(row.loss.ic) << ','
        << format_number(row.loss.bc) << ',' << format_number(row.loss.mass) << ',' << format_number(row.loss.total)
        << '\n';
  }
}

void write_macro_csv(const std::vector<MacroRecord>& records, std::ostream& out) {
  out << "t,mass,mean_abs,ke,ent,fe,eta,linf\n";
  for (const MacroRecord& r : records) {
    out << format_number(r.t) << ',' << format_number(r.mass) << ',' << format_number(r.mean_abs) << ','
        << format_number(r.kinetic_energy) << ',' << format_number(r.entropy) << ',' << optional_number(r.free_energy)
        << ',' << optional_number(r.lyapunov) << ',' << format_number(r.l_inf) << '\n';
  }
}

void write_profile_csv(std::span<const double> v, std::span<const double> f, std::ostream& out) {
  if (v.size() != f.size()) throw std::invalid_argument("profile size mismatch");
  out << "v,f\n";
  for (std::size_t k = 0; k < v.size(); ++k) out << format_number(v[k]) << ',' << format_number(f[k]) << '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) { open_out(path) << text; }

}  // namespace kfp
