#include "rebound/cli_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "rebound/acceptance.hpp"

namespace rebound {

namespace {

using nlohmann::ordered_json;

double require_number(const ordered_json& j, const std::string& key) {
  if (!j.contains(key)) fail_validation(key, "is required");
  if (!j.at(key).is_number()) fail_validation(key, "must be a number");
  return j.at(key).get<double>();
}

double number_or(const ordered_json& j, const std::string& key, double def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_number()) fail_validation(key, "must be a number");
  return j.at(key).get<double>();
}

void reject_unknown_keys(const ordered_json& j,
                         const std::set<std::string>& allowed,
                         const std::string& scope) {
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      fail_validation(scope + item.key(), "is not a recognized key");
    }
  }
}

DragLaw parse_drag_object(const ordered_json& d, double shell_mass) {
  if (!d.is_object()) fail_validation("drag", "must be an object");
  if (!d.contains("type") || !d.at("type").is_string()) {
    fail_validation("drag.type", "must be a string");
  }
  const std::string type = d.at("type").get<std::string>();
  const auto check = [&](std::initializer_list<const char*> keys) {
    std::set<std::string> allowed{"type"};
    for (const char* k : keys) allowed.insert(k);
    reject_unknown_keys(d, allowed, "drag.");
  };
  if (type == "power_law_coupled") {
    check({"c1", "c2", "c3"});
    return PowerLawCoupled{require_number(d, "c1"), require_number(d, "c2"),
                           require_number(d, "c3"), shell_mass};
  }
  if (type == "prototype_d1") {
    check({"c"});
    return PrototypeD1{require_number(d, "c")};
  }
  if (type == "prototype_d2") {
    check({});
    return PrototypeD2{};
  }
  if (type == "rigid_power") {
    check({"coefficient", "alpha"});
    return RigidPower{require_number(d, "coefficient"),
                      number_or(d, "alpha", 1.5)};
  }
  if (type == "lubrication") {
    check({"alpha", "gamma", "dim", "quad_tol"});
    BodyGeometry g;
    g.alpha = require_number(d, "alpha");
    g.gamma = require_number(d, "gamma");
    g.dim = static_cast<int>(require_number(d, "dim"));
    return LubricationDrag(g, number_or(d, "quad_tol", 1e-8));
  }
  if (type == "analytic_ball") {
    check({"radius", "dim"});
    return AnalyticBall{require_number(d, "radius"),
                        static_cast<int>(require_number(d, "dim"))};
  }
  fail_validation("drag.type", "must be one of power_law_coupled, "
                               "prototype_d1, prototype_d2, rigid_power, "
                               "lubrication, analytic_ball");
}

ordered_json drag_to_json(const DragLaw& law) {
  ordered_json d;
  if (const auto* p = std::get_if<PowerLawCoupled>(&law)) {
    d["type"] = "power_law_coupled";
    d["c1"] = p->c1;
    d["c2"] = p->c2;
    d["c3"] = p->c3;
  } else if (const auto* p = std::get_if<PrototypeD1>(&law)) {
    d["type"] = "prototype_d1";
    d["c"] = p->c;
  } else if (std::get_if<PrototypeD2>(&law)) {
    d["type"] = "prototype_d2";
  } else if (const auto* p = std::get_if<RigidPower>(&law)) {
    d["type"] = "rigid_power";
    d["coefficient"] = p->coefficient;
    d["alpha"] = p->alpha;
  } else if (const auto* p = std::get_if<LubricationDrag>(&law)) {
    d["type"] = "lubrication";
    d["alpha"] = p->geometry().alpha;
    d["gamma"] = p->geometry().gamma;
    d["dim"] = p->geometry().dim;
    d["quad_tol"] = p->quad_tol();
  } else if (const auto* p = std::get_if<AnalyticBall>(&law)) {
    d["type"] = "analytic_ball";
    d["radius"] = p->radius;
    d["dim"] = p->dim;
  }
  return d;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot open " + file.string() +
                                     " for writing");
  return out;
}

void finish_out(std::ofstream& out, const std::filesystem::path& file) {
  out.flush();
  if (!out) fail(Errc::io_error, "write failed for " + file.string());
}

}  // namespace

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_shortest(double x) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

LoadedConfig parse_config_json(const ordered_json& j) {
  if (!j.is_object()) fail_validation("config", "must be a JSON object");
  reject_unknown_keys(
      j,
      {"M", "m", "k", "h0", "hdot0", "xi0", "xidot0", "mu", "mu_values", "c1",
       "c2", "c3", "drag", "mode", "t_end", "rel_tol", "abs_tol",
       "audit_grid_size"},
      "");

  ModelConfig base;
  base.spring.shell_mass = require_number(j, "M");
  base.spring.internal_mass = require_number(j, "m");
  base.spring.stiffness = require_number(j, "k");
  base.initial.t = 0.0;
  base.initial.h = require_number(j, "h0");
  base.initial.h_dot = require_number(j, "hdot0");
  base.initial.xi = number_or(j, "xi0", 0.0);
  base.initial.xi_dot = number_or(j, "xidot0", 0.0);

  const bool flat_drag =
      j.contains("c1") || j.contains("c2") || j.contains("c3");
  if (flat_drag && j.contains("drag")) {
    fail_validation("drag", "give either c1,c2,c3 or a drag object, not both");
  }
  if (flat_drag) {
    if (!(j.contains("c1") && j.contains("c2") && j.contains("c3"))) {
      fail_validation("c1/c2/c3", "must be given together");
    }
    base.drag = PowerLawCoupled{require_number(j, "c1"),
                                require_number(j, "c2"),
                                require_number(j, "c3"),
                                base.spring.shell_mass};
  } else if (j.contains("drag")) {
    base.drag = parse_drag_object(j.at("drag"), base.spring.shell_mass);
  } else {
    fail_validation("drag", "a drag law is required (c1,c2,c3 or drag object)");
  }

  if (j.contains("mode")) {
    if (!j.at("mode").is_string()) fail_validation("mode", "must be a string");
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "coupled") {
      base.mode = SimMode::coupled;
    } else if (mode == "rigid_body") {
      base.mode = SimMode::rigid_body;
    } else {
      fail_validation("mode", "must be \"coupled\" or \"rigid_body\"");
    }
  }

  LoadedConfig out;
  out.t_end = number_or(j, "t_end", 2.0);
  out.settings.rel_tol = number_or(j, "rel_tol", 1e-8);
  out.settings.abs_tol = number_or(j, "abs_tol", 1e-10);
  out.settings.validate();

  const bool has_mu = j.contains("mu");
  const bool has_list = j.contains("mu_values");
  if (has_mu == has_list) {
    fail_validation("mu", "exactly one of mu / mu_values is required");
  }
  if (has_mu) {
    if (j.contains("audit_grid_size")) {
      fail_validation("audit_grid_size", "applies to sweep configs only");
    }
    base.mu = require_number(j, "mu");
    base.validate();
    out.value = base;
  } else {
    if (!j.at("mu_values").is_array()) {
      fail_validation("mu_values", "must be an array of numbers");
    }
    SweepConfig sweep;
    for (const auto& v : j.at("mu_values")) {
      if (!v.is_number()) {
        fail_validation("mu_values", "must be an array of numbers");
      }
      sweep.mu_values.push_back(v.get<double>());
    }
    sweep.base = base;
    sweep.t_end = out.t_end;
    sweep.audit_grid_size =
        static_cast<int>(number_or(j, "audit_grid_size", 10000));
    sweep.validate();
    out.value = sweep;
  }

  // Resolved echo: canonical key order, drag in object form, defaults
  // materialized.  Parsing the echo reproduces this configuration.
  ordered_json echo;
  echo["M"] = base.spring.shell_mass;
  echo["m"] = base.spring.internal_mass;
  echo["k"] = base.spring.stiffness;
  echo["drag"] = drag_to_json(base.drag);
  if (has_mu) {
    echo["mu"] = base.mu;
  } else {
    echo["mu_values"] = std::get<SweepConfig>(out.value).mu_values;
  }
  echo["h0"] = base.initial.h;
  echo["hdot0"] = base.initial.h_dot;
  echo["xi0"] = base.initial.xi;
  echo["xidot0"] = base.initial.xi_dot;
  echo["mode"] =
      base.mode == SimMode::rigid_body ? "rigid_body" : "coupled";
  echo["t_end"] = out.t_end;
  echo["rel_tol"] = out.settings.rel_tol;
  echo["abs_tol"] = out.settings.abs_tol;
  if (has_list) {
    echo["audit_grid_size"] = std::get<SweepConfig>(out.value).audit_grid_size;
  }
  out.echo = std::move(echo);
  return out;
}

LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::parse_error, std::string(e.what()) + " in " + path.string());
  }
  return parse_config_json(j);
}

void emit_trajectory_csv(const Trajectory& traj,
                         const std::filesystem::path& file) {
  std::ofstream out = open_out(file);
  out << "t,h,h_dot,xi,xi_dot,energy,ledger,residual\n";
  const double f0 = traj.initial_energy();
  for (const Sample& s : traj.samples()) {
    const double f = energy(s.state, traj.config());
    out << format_g17(s.state.t) << ',' << format_g17(s.state.h) << ','
        << format_g17(s.state.h_dot) << ',' << format_g17(s.state.xi) << ','
        << format_g17(s.state.xi_dot) << ',' << format_g17(f) << ','
        << format_g17(s.ledger) << ',' << format_g17(f + s.ledger - f0)
        << '\n';
  }
  finish_out(out, file);
}

SweepFiles emit_sweep_csv(const SweepResult& sweep,
                          const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(Errc::io_error, "cannot create " + out_dir.string());

  SweepFiles files;
  for (const SweepMember& m : sweep.members) {
    if (!m.trajectory) continue;
    const std::filesystem::path file =
        out_dir / ("traj_mu=" + format_shortest(m.mu) + ".csv");
    emit_trajectory_csv(*m.trajectory, file);
    files.trajectory_files.push_back(file);
  }

  files.summary_file = out_dir / "summary.csv";
  std::ofstream out = open_out(files.summary_file);
  out << "mu,h_min,t_min,rebound_height,dev_h,dev_xi,energy_residual\n";
  for (const MemberMetrics& row : summarize(sweep)) {
    out << format_g17(row.mu) << ',' << format_g17(row.h_min) << ','
        << format_g17(row.t_min) << ',' << format_g17(row.rebound_height)
        << ',' << format_g17(row.dev_h) << ',' << format_g17(row.dev_xi)
        << ',' << format_g17(row.energy_residual) << '\n';
  }
  finish_out(out, files.summary_file);
  return files;
}

void emit_drag_table(const BodyGeometry& geometry, double h_min, double h_max,
                     int points, const std::filesystem::path& file) {
  geometry.validate();
  if (!(h_min > 0.0) || !(h_max >= h_min)) {
    fail_validation("h_min/h_max", "need 0 < h_min <= h_max");
  }
  if (points < 1) fail_validation("points", "must be >= 1");

  const LubricationDrag lub(geometry);
  const AsymptoticDecay decay =
      asymptotic_exponent(geometry.alpha, geometry.dim);
  const double radius = 1.0 / (2.0 * geometry.gamma);

  std::ofstream out = open_out(file);
  out << "h,alpha,gamma,dim,D_lub,D_analytic,exponent\n";
  for (int i = 0; i < points; ++i) {
    const double frac =
        points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    const double h = h_min * std::pow(h_max / h_min, frac);
    const double analytic =
        geometry.alpha == 1.0
            ? analytic_ball_shape_factor(radius, h, geometry.dim)
            : std::numeric_limits<double>::quiet_NaN();
    out << format_g17(h) << ',' << format_g17(geometry.alpha) << ','
        << format_g17(geometry.gamma) << ',' << geometry.dim << ','
        << format_g17(lub(h)) << ',' << format_g17(analytic) << ','
        << format_g17(decay.exponent) << '\n';
  }
  finish_out(out, file);
}

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::io_error, "cannot create " + dir.string());
  ordered_json j;
  j["tool_version"] = manifest.tool_version;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["settings"] = manifest.settings;
  j["outputs"] = manifest.outputs;
  j["runtime_seconds"] = manifest.runtime_seconds;
  const std::filesystem::path file = dir / "manifest.json";
  std::ofstream out = open_out(file);
  out << j.dump(2) << '\n';
  finish_out(out, file);
}

RunManifest read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + file.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::parse_error, std::string(e.what()) + " in " + file.string());
  }
  RunManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.settings = j.at("settings");
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.runtime_seconds = j.at("runtime_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail_validation("manifest", std::string("is incomplete: ") + e.what());
  }
  return m;
}

namespace {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::parse_error:
    case Errc::validation_error:
    case Errc::io_error:
      return 1;
    default:
      return 2;  // numerical failure
  }
}

ordered_json settings_json(const IntegratorSettings& s, double t_end) {
  ordered_json j;
  j["rel_tol"] = s.rel_tol;
  j["abs_tol"] = s.abs_tol;
  j["t_end"] = t_end;
  return j;
}

int cmd_simulate(const std::string& config_path, double t_end_flag,
                 bool t_end_given, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  LoadedConfig cfg = load_config(config_path);
  if (cfg.is_sweep()) {
    fail_validation("config",
                    "simulate needs a single-run config (found mu_values)");
  }
  const double t_end = t_end_given ? t_end_flag : cfg.t_end;
  cfg.echo["t_end"] = t_end;

  const Trajectory traj = integrate(cfg.model(), t_end, cfg.settings);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(Errc::io_error, "cannot create " + out_dir);
  emit_trajectory_csv(traj, std::filesystem::path(out_dir) / "trajectory.csv");

  const auto min_ev = locate_events(traj, EventKind::min_distance);
  const EnergyResidual res = energy_residual(traj);
  std::cout << "steps: " << traj.dense_steps().size()
            << "  min h: " << format_shortest(min_ev.front().state.h)
            << " at t = " << format_shortest(min_ev.front().t)
            << "  max |energy residual|: " << format_shortest(res.value)
            << '\n';
  if (traj.stiffness_warning()) {
    std::cout << "note: stiffness warning raised"
              << (traj.used_stiff_fallback() ? "; implicit fallback engaged"
                                             : "")
              << '\n';
  }

  RunManifest m;
  m.tool_version = kToolVersion;
  m.command = "simulate";
  m.config = cfg.echo;
  m.settings = settings_json(cfg.settings, t_end);
  m.outputs = {"trajectory.csv"};
  m.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_manifest(m, out_dir);
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  LoadedConfig cfg = load_config(config_path);
  if (!cfg.is_sweep()) {
    fail_validation("config", "sweep needs a config with mu_values");
  }

  const SweepResult sweep = run_sweep(cfg.sweep(), cfg.settings);
  const SweepFiles files = emit_sweep_csv(sweep, out_dir);

  int failed = 0;
  for (const SweepMember& m : sweep.members) {
    if (m.trajectory) {
      const ReboundReport r = detect_rebound(*m.trajectory);
      std::cout << "mu = " << format_shortest(m.mu)
                << ": min h = " << format_shortest(r.h_min)
                << ", rebound height = "
                << format_shortest(r.max_post_min_h - r.h_min) << '\n';
    } else {
      std::cerr << "mu = " << format_shortest(m.mu) << ": FAILED: " << m.error
                << '\n';
      ++failed;
    }
  }
  if (sweep.members.size() - failed >= 3) {
    const ReboundVerdict v = physical_rebound_verdict(sweep);
    std::cout << "rebound verdict: " << verdict_name(v.verdict) << " ("
              << v.note << ")\n";
  }

  RunManifest m;
  m.tool_version = kToolVersion;
  m.command = "sweep";
  m.config = cfg.echo;
  m.settings = settings_json(cfg.settings, cfg.sweep().t_end);
  for (const auto& f : files.trajectory_files) {
    m.outputs.push_back(f.filename().string());
  }
  m.outputs.push_back(files.summary_file.filename().string());
  m.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_manifest(m, out_dir);
  return failed == 0 ? 0 : 2;
}

int cmd_audit(const std::string& config_path, double h_min, double h_max,
              int h_points, double xi_max, int xi_points) {
  LoadedConfig cfg = load_config(config_path);
  const ModelConfig& base =
      cfg.is_sweep() ? cfg.sweep().base : cfg.model();

  if (!(h_min > 0.0) || !(h_max >= h_min)) {
    fail_validation("h-min/h-max", "need 0 < h-min <= h-max");
  }
  if (h_points < 2 || xi_points < 2) {
    fail_validation("points", "need at least 2 grid points per axis");
  }
  std::vector<double> h_grid, xi_grid;
  for (int i = 0; i < h_points; ++i) {
    h_grid.push_back(h_min * std::pow(h_max / h_min,
                                      static_cast<double>(i) / (h_points - 1)));
  }
  for (int i = 0; i < xi_points; ++i) {
    xi_grid.push_back(-xi_max +
                      2.0 * xi_max * static_cast<double>(i) / (xi_points - 1));
  }

  const AuditReport report = assumption_audit(base.drag, h_grid, xi_grid);
  const auto line = [](const AuditCheck& c) {
    std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name;
    if (c.witness) {
      std::cout << "  [witness: h = " << format_shortest(c.witness->h) << ", "
                << c.witness->detail << "]";
    }
    std::cout << '\n';
  };
  std::cout << "drag law: " << describe(base.drag)
            << "  (decay exponent tested: " << format_shortest(report.alpha_used)
            << ")\n";
  line(report.lower_bound);
  line(report.monotone_in_xi);
  line(report.compressed_lower);
  line(report.vanishing_integral);
  std::cout << "compressed-integral trend slope: "
            << format_shortest(report.trend_slope) << '\n';
  std::cout << (report.all_pass() ? "ALL CHECKS PASS" : "CHECKS FAILED")
            << '\n';
  return report.all_pass() ? 0 : 3;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"Spring-mass shell vs. wall: viscous-drag rebound laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  double t_end_flag = 2.0;

  CLI::App* simulate =
      app.add_subcommand("simulate", "Integrate one configuration");
  simulate->add_option("--config", config_path, "JSON configuration file")
      ->required();
  CLI::Option* t_end_opt =
      simulate->add_option("--t-end", t_end_flag, "Override the time horizon");
  simulate->add_option("--out", out_path, "Output directory")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "Run a viscosity sweep");
  sweep->add_option("--config", config_path, "JSON configuration file")
      ->required();
  sweep->add_option("--out", out_path, "Output directory")->required();

  BodyGeometry geom;
  double table_h_min = 1e-4, table_h_max = 1e-1;
  int table_points = 25;
  CLI::App* table = app.add_subcommand(
      "drag-table", "Tabulate the lubrication drag factor against the ball "
                    "closed form");
  table->add_option("--alpha", geom.alpha, "Profile exponent")->required();
  table->add_option("--gamma", geom.gamma, "Profile coefficient")->required();
  table->add_option("--dim", geom.dim, "Geometry dimension (2 or 3)")
      ->required();
  table->add_option("--h-min", table_h_min, "Smallest gap");
  table->add_option("--h-max", table_h_max, "Largest gap");
  table->add_option("--points", table_points, "Number of rows");
  table->add_option("--out", out_path, "Output CSV file")->required();

  double audit_h_min = 1e-3, audit_h_max = 1.0, audit_xi_max = 0.05;
  int audit_h_points = 32, audit_xi_points = 21;
  CLI::App* audit = app.add_subcommand(
      "audit", "Check the structural drag assumptions on a grid");
  audit->add_option("--config", config_path, "JSON configuration file")
      ->required();
  audit->add_option("--h-min", audit_h_min, "Smallest gap in the grid");
  audit->add_option("--h-max", audit_h_max, "Largest gap in the grid");
  audit->add_option("--h-points", audit_h_points, "Gap grid size");
  audit->add_option("--xi-max", audit_xi_max, "Elongation grid half-width");
  audit->add_option("--xi-points", audit_xi_points, "Elongation grid size");

  bool inject_fault = false;
  CLI::App* verify =
      app.add_subcommand("verify", "Run the full acceptance property suite");
  verify
      ->add_flag("--inject-fault", inject_fault,
                 "Corrupt the energy-ledger check (failure-path test hook)")
      ->group("");  // hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(config_path, t_end_flag, t_end_opt->count() > 0,
                          out_path);
    }
    if (sweep->parsed()) return cmd_sweep(config_path, out_path);
    if (table->parsed()) {
      emit_drag_table(geom, table_h_min, table_h_max, table_points, out_path);
      std::cout << "wrote " << out_path << '\n';
      return 0;
    }
    if (audit->parsed()) {
      return cmd_audit(config_path, audit_h_min, audit_h_max, audit_h_points,
                       audit_xi_max, audit_xi_points);
    }
    if (verify->parsed()) {
      AcceptanceOptions opts;
      opts.inject_energy_fault = inject_fault;
      return run_acceptance(std::cout, opts).all_pass() ? 0 : 3;
    }
  } catch (const Error& e) {
    std::cerr << errc_name(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace rebound
