#pragma once
/**
 * @file io.hpp
 * @brief Checkpoints, trajectory dumps and CSV emitters.
 *
 * Checkpoints: JSON {"layer_sizes", "seed", "params"} or binary
 *   "KFPNET01" | u64 n_layers | u64 layer_sizes[n] | u64 seed | f64 params[]
 * with params flattened per layer as row-major weights then biases.
 *
 * Trajectory dumps:
 *   "KFPTRJ01" | u64 nx | u64 nv | u64 frames | f64 x[nx] | f64 v[nv]
 *   | frames x (f64 t | f64 values[nx*nv] row-major in x)
 *
 * All integers and doubles are little-endian.
 */

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "kfp/diag.hpp"
#include "kfp/net.hpp"
#include "kfp/train.hpp"

namespace kfp {

/// 17 significant digits.
std::string format_number(double value);

/// Format picked by extension: ".json" for JSON, anything else binary.
void save_checkpoint(const NetParams& params, const std::filesystem::path& path);
NetParams load_checkpoint(const std::filesystem::path& path);

void save_trajectory(const std::vector<FieldSnapshot>& frames, const std::filesystem::path& path);
std::vector<FieldSnapshot> load_trajectory(const std::filesystem::path& path);

/// epoch,ge,ic,bc,mass,total (wall-clock is left out so reruns compare equal)
void write_history_csv(const std::vector<HistoryRow>& history, std::ostream& out);
/// t,mass,mean_abs,ke,ent,fe,eta,linf (fe/eta empty when undefined)
void write_macro_csv(const std::vector<MacroRecord>& records, std::ostream& out);
/// v,f
void write_profile_csv(std::span<const double> v, std::span<const double> f, std::ostream& out);

/// Writes text to a file, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace kfp
