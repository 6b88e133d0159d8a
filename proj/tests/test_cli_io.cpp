#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rebound/cli_io.hpp"

using namespace rebound;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "reboundlab_cli_tests";

fs::path tmp_file(const std::string& name) {
  fs::create_directories(kTmp);
  return kTmp / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

template <typename Fn>
std::string failure_of(Errc expect, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    CHECK(e.code() == expect);
    return e.what();
  }
  REQUIRE(false);
  return {};
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("reboundlab");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

struct CoutCapture {
  std::ostringstream oss;
  std::streambuf* old;
  CoutCapture() : old(std::cout.rdbuf(oss.rdbuf())) {}
  ~CoutCapture() { std::cout.rdbuf(old); }
  std::string text() const { return oss.str(); }
};

const char* kCanonicalFlat = R"({
  "M": 1.0, "m": 8.2, "k": 10000.0,
  "c1": 0.1, "c2": 20.0, "c3": 7.4,
  "h0": 0.3, "hdot0": -0.5, "mu": 0.1
})";

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("flat configuration parses with defaults materialized") {
  const LoadedConfig lc = parse_config_json(ordered_json::parse(kCanonicalFlat));
  REQUIRE_FALSE(lc.is_sweep());
  const ModelConfig& m = lc.model();
  CHECK(m.spring.shell_mass == 1.0);
  CHECK(m.spring.internal_mass == 8.2);
  CHECK(m.spring.stiffness == 10000.0);
  CHECK(m.mu == 0.1);
  CHECK(m.initial.h == 0.3);
  CHECK(m.initial.h_dot == -0.5);
  CHECK(m.initial.xi == 0.0);
  CHECK(m.initial.xi_dot == 0.0);
  CHECK(m.mode == SimMode::coupled);
  REQUIRE(std::holds_alternative<PowerLawCoupled>(m.drag));
  const auto& d = std::get<PowerLawCoupled>(m.drag);
  CHECK(d.c1 == 0.1);
  CHECK(d.c2 == 20.0);
  CHECK(d.c3 == 7.4);
  CHECK(d.shell_mass == 1.0);
  CHECK(lc.t_end == 2.0);
  CHECK(lc.settings.rel_tol == 1e-8);
  CHECK(lc.settings.abs_tol == 1e-10);

  CHECK(lc.echo.at("mode") == "coupled");
  CHECK(lc.echo.at("t_end") == 2.0);
  CHECK(lc.echo.at("drag").at("type") == "power_law_coupled");
  // The echo is replayable and idempotent.
  const LoadedConfig again = parse_config_json(lc.echo);
  CHECK(again.echo == lc.echo);
  CHECK_FALSE(again.is_sweep());
  CHECK(std::get<PowerLawCoupled>(again.model().drag).c2 == 20.0);
}

TEST_CASE("sweep configuration parses") {
  ordered_json j = ordered_json::parse(kCanonicalFlat);
  j.erase("mu");
  j["mu_values"] = {0.1, 0.05, 0.01};
  j["audit_grid_size"] = 500;
  j["rel_tol"] = 1e-7;
  const LoadedConfig lc = parse_config_json(j);
  REQUIRE(lc.is_sweep());
  CHECK(lc.sweep().mu_values == std::vector<double>{0.1, 0.05, 0.01});
  CHECK(lc.sweep().audit_grid_size == 500);
  CHECK(lc.sweep().t_end == 2.0);
  CHECK(lc.settings.rel_tol == 1e-7);
  CHECK(lc.echo.at("audit_grid_size") == 500);
  CHECK(parse_config_json(lc.echo).echo == lc.echo);
}

TEST_CASE("configuration rejection names the offending key") {
  const auto parse = [](ordered_json j) {
    return [j] { parse_config_json(j); };
  };
  ordered_json base = ordered_json::parse(kCanonicalFlat);

  ordered_json j = base;
  j.erase("h0");
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "h0"));

  j = base;
  j["banana"] = 1.0;
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "banana"));

  j = base;
  j["mu_values"] = {0.1, 0.05};
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "mu"));

  j = base;
  j.erase("mu");
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "mu"));

  j = base;
  j["drag"] = {{"type", "prototype_d2"}};
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "drag"));

  j = base;
  j.erase("c2");
  j.erase("c3");
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "c1"));

  j = base;
  j["audit_grid_size"] = 100;
  CHECK(contains(failure_of(Errc::validation_error, parse(j)),
                 "audit_grid_size"));

  j = base;
  j["mode"] = "floating";
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "mode"));

  j = base;
  j.erase("c1");
  j.erase("c2");
  j.erase("c3");
  j["drag"] = {{"type", "frictionless"}};
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "drag.type"));

  j = base;
  j["h0"] = "tall";
  CHECK(contains(failure_of(Errc::validation_error, parse(j)), "h0"));
}

TEST_CASE("config files: missing, malformed, well-formed") {
  CHECK(failure_of(Errc::io_error,
                   [] { load_config(kTmp / "no_such_config.json"); }) != "");

  const fs::path bad = tmp_file("broken.json");
  write_file(bad, "{ \"M\": 1.0, ");
  const std::string msg =
      failure_of(Errc::parse_error, [&] { load_config(bad); });
  CHECK(contains(msg, "broken.json"));

  const fs::path good = tmp_file("good.json");
  write_file(good, kCanonicalFlat);
  CHECK(load_config(good).model().mu == 0.1);
}

TEST_CASE("numeric formatting round-trips") {
  const double pi = std::acos(-1.0);
  for (double x : {0.1, 0.05, 0.3, -0.5, 5.2930528795615089e-10, pi, 1e308,
                   2.2250738585072014e-308, -1.0 / 3.0}) {
    CHECK(std::strtod(format_g17(x).c_str(), nullptr) == x);
    CHECK(std::strtod(format_shortest(x).c_str(), nullptr) == x);
  }
  CHECK(format_shortest(0.1) == "0.1");
  CHECK(format_shortest(0.05) == "0.05");
  CHECK(format_shortest(2.0) == "2");
}

TEST_CASE("trajectory CSV layout and exactness") {
  ModelConfig cfg;
  cfg.spring = {1.0, 8.2, 1e4};
  cfg.drag = PowerLawCoupled{0.1, 20.0, 7.4, 1.0};
  cfg.mu = 0.1;
  cfg.initial = {0.0, 0.3, -0.5, 0.0, 0.0};
  const Trajectory traj = integrate(cfg, 0.2);

  const fs::path file = tmp_file("traj.csv");
  emit_trajectory_csv(traj, file);
  const std::string text = slurp(file);
  CHECK_FALSE(contains(text, "\r"));

  const auto rows = lines_of(text);
  REQUIRE(rows.size() == traj.samples().size() + 1);
  CHECK(rows[0] == "t,h,h_dot,xi,xi_dot,energy,ledger,residual");

  const double f0 = traj.initial_energy();
  for (std::size_t i : {std::size_t(1), rows.size() - 1}) {
    const auto cols = fields_of(rows[i]);
    REQUIRE(cols.size() == 8);
    const Sample& s = traj.samples()[i - 1];
    CHECK(std::strtod(cols[0].c_str(), nullptr) == s.state.t);
    CHECK(std::strtod(cols[1].c_str(), nullptr) == s.state.h);
    CHECK(std::strtod(cols[2].c_str(), nullptr) == s.state.h_dot);
    CHECK(std::strtod(cols[3].c_str(), nullptr) == s.state.xi);
    CHECK(std::strtod(cols[4].c_str(), nullptr) == s.state.xi_dot);
    const double f = energy(s.state, cfg);
    CHECK(std::strtod(cols[5].c_str(), nullptr) == f);
    CHECK(std::strtod(cols[6].c_str(), nullptr) == s.ledger);
    CHECK(std::strtod(cols[7].c_str(), nullptr) == f + s.ledger - f0);
  }
  const auto first = fields_of(rows[1]);
  CHECK(first[7] == "0");  // residual vanishes identically at t = 0
}

TEST_CASE("sweep CSV files and summary") {
  SweepConfig cfg;
  cfg.base.spring = {1.0, 8.2, 1e4};
  cfg.base.drag = PowerLawCoupled{0.1, 20.0, 7.4, 1.0};
  cfg.base.initial = {0.0, 0.3, -0.5, 0.0, 0.0};
  cfg.mu_values = {0.1, 0.05};
  const SweepResult sweep = run_sweep(cfg);
  REQUIRE(sweep.complete());

  const fs::path dir = kTmp / "sweep_out";
  fs::remove_all(dir);
  const SweepFiles files = emit_sweep_csv(sweep, dir);
  REQUIRE(files.trajectory_files.size() == 2);
  CHECK(files.trajectory_files[0].filename() == "traj_mu=0.1.csv");
  CHECK(files.trajectory_files[1].filename() == "traj_mu=0.05.csv");
  CHECK(files.summary_file.filename() == "summary.csv");
  CHECK(fs::exists(files.trajectory_files[0]));
  CHECK(fs::exists(files.trajectory_files[1]));

  const auto rows = lines_of(slurp(files.summary_file));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "mu,h_min,t_min,rebound_height,dev_h,dev_xi,energy_residual");
  CHECK(std::strtod(fields_of(rows[1])[0].c_str(), nullptr) == 0.1);
  CHECK(std::strtod(fields_of(rows[2])[0].c_str(), nullptr) == 0.05);
  for (std::size_t i : {std::size_t(1), std::size_t(2)}) {
    const auto cols = fields_of(rows[i]);
    REQUIRE(cols.size() == 7);
    CHECK(std::strtod(cols[1].c_str(), nullptr) > 0.0);  // h_min
    CHECK(std::strtod(cols[3].c_str(), nullptr) > 0.0);  // rebound height
  }
}

TEST_CASE("drag table columns against the closed form") {
  const fs::path file = tmp_file("table_ball.csv");
  emit_drag_table(BodyGeometry{1.0, 2.5, 3}, 1e-3, 1e-1, 7, file);
  const auto rows = lines_of(slurp(file));
  REQUIRE(rows.size() == 8);
  CHECK(rows[0] == "h,alpha,gamma,dim,D_lub,D_analytic,exponent");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cols = fields_of(rows[i]);
    REQUIRE(cols.size() == 7);
    const double h = std::strtod(cols[0].c_str(), nullptr);
    const double lub = std::strtod(cols[4].c_str(), nullptr);
    const double ball = std::strtod(cols[5].c_str(), nullptr);
    CHECK(h == doctest::Approx(1e-3 * std::pow(100.0, (i - 1) / 6.0))
                   .epsilon(1e-12));
    CHECK(std::abs(lub - ball) / ball <= 1e-6);
    CHECK(std::strtod(cols[6].c_str(), nullptr) == -1.0);
  }

  // Non-parabolic profile: no closed form, D_analytic is nan.
  const fs::path file2 = tmp_file("table_steep.csv");
  emit_drag_table(BodyGeometry{2.0, 1.0, 3}, 1e-3, 1e-2, 3, file2);
  const auto rows2 = lines_of(slurp(file2));
  REQUIRE(rows2.size() == 4);
  const auto cols2 = fields_of(rows2[1]);
  CHECK(std::isnan(std::strtod(cols2[5].c_str(), nullptr)));
  CHECK(std::strtod(cols2[6].c_str(), nullptr) ==
        doctest::Approx(-5.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("simulate writes a replayable manifest") {
  const fs::path cfg_file = tmp_file("sim.json");
  write_file(cfg_file, kCanonicalFlat);
  const fs::path dir1 = kTmp / "sim_run1";
  const fs::path dir2 = kTmp / "sim_run2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  std::string console;
  {
    CoutCapture cap;
    REQUIRE(run_cli({"simulate", "--config", cfg_file.string(), "--t-end",
                     "0.3", "--out", dir1.string()}) == 0);
    console = cap.text();
  }
  CHECK(contains(console, "min h"));
  CHECK(fs::exists(dir1 / "trajectory.csv"));

  const RunManifest m = read_manifest(dir1 / "manifest.json");
  CHECK(m.tool_version == kToolVersion);
  CHECK(m.command == "simulate");
  REQUIRE(m.outputs == std::vector<std::string>{"trajectory.csv"});
  CHECK(m.settings.at("t_end") == 0.3);
  CHECK(m.runtime_seconds >= 0.0);
  CHECK(m.config.at("t_end") == 0.3);  // echo reflects the flag override

  // Replaying the manifest config reproduces the run byte for byte.
  const LoadedConfig replay = parse_config_json(m.config);
  IntegratorSettings s;
  s.rel_tol = m.settings.at("rel_tol").get<double>();
  s.abs_tol = m.settings.at("abs_tol").get<double>();
  const Trajectory traj =
      integrate(replay.model(), m.settings.at("t_end").get<double>(), s);
  const fs::path replay_csv = tmp_file("replay.csv");
  emit_trajectory_csv(traj, replay_csv);
  CHECK(slurp(replay_csv) == slurp(dir1 / "trajectory.csv"));

  // And a second CLI invocation is bitwise deterministic.
  {
    CoutCapture cap;
    REQUIRE(run_cli({"simulate", "--config", cfg_file.string(), "--t-end",
                     "0.3", "--out", dir2.string()}) == 0);
  }
  CHECK(slurp(dir2 / "trajectory.csv") == slurp(dir1 / "trajectory.csv"));

  CHECK(failure_of(Errc::io_error,
                   [] { read_manifest(kTmp / "absent_manifest.json"); }) != "");
  const fs::path hollow = tmp_file("hollow.json");
  write_file(hollow, "{}");
  CHECK(contains(failure_of(Errc::validation_error,
                            [&] { read_manifest(hollow); }),
                 "manifest"));
}

TEST_CASE("dispatch exit codes") {
  const fs::path cfg_file = tmp_file("codes.json");
  write_file(cfg_file, kCanonicalFlat);
  const fs::path sweep_file = tmp_file("codes_sweep.json");
  {
    ordered_json j = ordered_json::parse(kCanonicalFlat);
    j.erase("mu");
    j["mu_values"] = {0.1, 0.05};
    write_file(sweep_file, j.dump());
  }
  const fs::path out = (kTmp / "codes_out").string();

  CHECK(run_cli({}) == 1);                    // a subcommand is required
  CHECK(run_cli({"simulate"}) == 1);          // missing required options
  CHECK(run_cli({"teleport"}) == 1);          // unknown subcommand
  {
    CoutCapture cap;
    CHECK(run_cli({"--help"}) == 0);
  }

  // simulate <-> sweep config mismatches.
  CHECK(run_cli({"simulate", "--config", sweep_file.string(), "--out",
                 out.string()}) == 1);
  CHECK(run_cli({"sweep", "--config", cfg_file.string(), "--out",
                 out.string()}) == 1);
  CHECK(run_cli({"simulate", "--config",
                 (kTmp / "nowhere.json").string(), "--out", out.string()}) ==
        1);

  // Divergent film integral surfaces as a numerical failure.
  CHECK(run_cli({"drag-table", "--alpha", "0.2", "--gamma", "1.0", "--dim",
                 "3", "--out", tmp_file("div.csv").string()}) == 2);
}

TEST_CASE("audit subcommand: passing and failing laws") {
  ordered_json j = ordered_json::parse(kCanonicalFlat);
  j.erase("c1");
  j.erase("c2");
  j.erase("c3");
  j["mu"] = 0.01;

  j["drag"] = {{"type", "prototype_d2"}};
  const fs::path ok_cfg = tmp_file("audit_d2.json");
  write_file(ok_cfg, j.dump());
  std::string console;
  {
    CoutCapture cap;
    CHECK(run_cli({"audit", "--config", ok_cfg.string()}) == 0);
    console = cap.text();
  }
  CHECK(contains(console, "ALL CHECKS PASS"));
  CHECK(contains(console, "monotone_in_xi"));

  j["drag"] = {{"type", "prototype_d1"}, {"c", 20.0}};
  const fs::path bad_cfg = tmp_file("audit_d1.json");
  write_file(bad_cfg, j.dump());
  {
    CoutCapture cap;
    CHECK(run_cli({"audit", "--config", bad_cfg.string()}) == 3);
    console = cap.text();
  }
  CHECK(contains(console, "CHECKS FAILED"));
  CHECK(contains(console, "witness"));
}

TEST_CASE("fault-injection hook trips the property suite") {
  const fs::path log = tmp_file("verify_fault.log");
  const std::string cmd = std::string(REBOUNDLAB_BIN) +
                          " verify --inject-fault > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  CHECK(WEXITSTATUS(rc) == 3);
  const std::string text = slurp(log);
  CHECK(contains(text, "FAIL"));
  CHECK(contains(text, "PASS"));
}
