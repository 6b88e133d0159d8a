#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rebound/experiments.hpp"

namespace rebound {

inline constexpr const char* kToolVersion = "reboundlab 1.0.0";

// A parsed configuration file: either a single run or a viscosity sweep,
// together with solver settings, the time horizon, and the fully resolved
// echo (all defaults materialized) used for manifests.
struct LoadedConfig {
  std::variant<ModelConfig, SweepConfig> value;
  IntegratorSettings settings;
  double t_end = 2.0;
  nlohmann::ordered_json echo;

  bool is_sweep() const { return std::holds_alternative<SweepConfig>(value); }
  const ModelConfig& model() const { return std::get<ModelConfig>(value); }
  const SweepConfig& sweep() const { return std::get<SweepConfig>(value); }
};

// Schema (flat JSON object, SI units):
//   M, m, k            shell mass, internal mass, spring stiffness
//   h0, hdot0          initial gap and gap velocity
//   xi0, xidot0        initial elongation state (default 0)
//   mu | mu_values     viscosity (single run) or strictly decreasing sweep list
//   c1, c2, c3         shorthand for the coupled power-law drag, or instead
//   drag               an object {"type": ..., ...} selecting any drag law
//   mode               "coupled" (default) or "rigid_body"
//   t_end              time horizon (default 2)
//   rel_tol, abs_tol   solver tolerances (defaults 1e-8, 1e-10)
//   audit_grid_size    sweep metric grid (sweep configs only, default 10000)
// Unknown keys are rejected.
LoadedConfig parse_config_json(const nlohmann::ordered_json& j);
LoadedConfig load_config(const std::filesystem::path& path);

// %.17g: enough digits that parsing the text recovers the exact double.
std::string format_g17(double x);
// Shortest decimal that round-trips; used in file names.
std::string format_shortest(double x);

// Header: t,h,h_dot,xi,xi_dot,energy,ledger,residual — one row per accepted
// step, 17 significant digits, LF line endings.
void emit_trajectory_csv(const Trajectory& traj,
                         const std::filesystem::path& file);

struct SweepFiles {
  std::vector<std::filesystem::path> trajectory_files;  // traj_mu=<value>.csv
  std::filesystem::path summary_file;                   // summary.csv
};

// One trajectory CSV per completed member plus a summary CSV with header
// mu,h_min,t_min,rebound_height,dev_h,dev_xi,energy_residual.
SweepFiles emit_sweep_csv(const SweepResult& sweep,
                          const std::filesystem::path& out_dir);

// Header: h,alpha,gamma,dim,D_lub,D_analytic,exponent — log-spaced gap grid;
// D_analytic is the ball closed form (radius 1/(2 gamma)) when alpha == 1,
// nan otherwise.
void emit_drag_table(const BodyGeometry& geometry, double h_min, double h_max,
                     int points, const std::filesystem::path& file);

struct RunManifest {
  std::string tool_version;
  std::string command;
  nlohmann::ordered_json config;    // resolved echo; replayable
  nlohmann::ordered_json settings;  // solver settings and t_end
  std::vector<std::string> outputs;
  double runtime_seconds = 0.0;
};

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& dir);
RunManifest read_manifest(const std::filesystem::path& file);

// Entry point behind main(): subcommands simulate, sweep, drag-table, audit,
// verify.  Exit codes: 0 success, 1 parse/validation/usage, 2 numerical
// failure, 3 property-suite failure.
int cli_dispatch(int argc, const char* const* argv);

}  // namespace rebound
