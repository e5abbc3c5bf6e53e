#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <gasgrid/adaptivity.hpp>
#include <gasgrid/adjoint.hpp>
#include <gasgrid/compressor.hpp>
#include <gasgrid/errors.hpp>
#include <gasgrid/io.hpp>
#include <gasgrid/optimizer.hpp>
#include <gasgrid/parallel.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gasgrid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct Config {
  std::string command;
  std::string network;
  std::string scenario;
  std::vector<std::string> fields;
  std::string out = "gasgrid-out";
  std::optional<double> tol;
  std::optional<std::string> fixed_model;
  std::optional<double> dt;
  std::optional<double> dx_max;
  double resample = 0.0;
  std::size_t horizon_split = 1;
  std::size_t levels = 32;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double threshold = 1e-5;
  int verbosity = 0;
};

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

class Clock {
 public:
  Clock() : wall_(std::chrono::steady_clock::now()), cpu_(std::clock()) {}
  double wall() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_).count();
  }
  double cpu() const { return static_cast<double>(std::clock() - cpu_) / CLOCKS_PER_SEC; }

 private:
  std::chrono::steady_clock::time_point wall_;
  std::clock_t cpu_;
};

const Clock kStart;

void stamp(RunSummary& s) {
  s.wall_seconds = kStart.wall();
  s.cpu_seconds = kStart.cpu();
}

ModelLevel parse_level(const std::string& s) {
  if (s == "m1") return ModelLevel::M1;
  if (s == "m2") return ModelLevel::M2;
  if (s == "m3") return ModelLevel::M3;
  throw Error(ErrorCode::invalid_argument, "--fixed-model must be m1, m2 or m3, got '" + s + "'");
}

void note(const Config& cfg, const std::string& msg) {
  if (cfg.verbosity > 0) std::cerr << msg << "\n";
}

struct Loaded {
  NetworkSpec spec;
  ScenarioSpec scenario;
  PreparedRun run;
  std::optional<ModelAssignment> fixed;
};

/// Reads network and scenario, applies the command-line overrides and records
/// every effective setting.
Loaded load(const Config& cfg, std::map<std::string, std::string>& settings) {
  if (cfg.network.empty()) throw Error(ErrorCode::invalid_argument, "--network is required");
  if (cfg.scenario.empty()) throw Error(ErrorCode::invalid_argument, "--scenario is required");
  std::vector<std::string> warnings;
  NetworkSpec spec = parse_network(cfg.network, NetworkFormat::automatic, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  ScenarioSpec sc = parse_scenario(cfg.scenario, spec);
  for (const auto& l : sc.log) note(cfg, "scenario: " + l);

  if (cfg.tol) {
    sc.tol = *cfg.tol;
    sc.tol_defaulted = false;
  }
  sc.adaptivity.tol = sc.tol;
  if (cfg.dt) sc.adaptivity.dt0 = *cfg.dt;
  if (cfg.dx_max) sc.adaptivity.dx_max = *cfg.dx_max;

  settings["network"] = cfg.network;
  settings["scenario"] = cfg.scenario;
  settings["horizon"] = num(sc.horizon);
  settings["tol"] = num(sc.tol) + (sc.tol_defaulted ? " (default)" : "");
  settings["dt"] = num(sc.adaptivity.dt0) + (cfg.dt ? "" : " (scenario)");
  settings["dx_max"] = num(sc.adaptivity.dx_max) + (cfg.dx_max ? "" : " (scenario)");
  settings["block_length"] = num(sc.adaptivity.block_length);
  settings["max_dt_halvings"] = std::to_string(sc.adaptivity.max_dt_halvings);
  settings["max_dx_halvings"] = std::to_string(sc.adaptivity.max_dx_halvings);
  settings["control_interval"] = num(sc.control_interval);

  Loaded l{std::move(spec), std::move(sc), {}, std::nullopt};
  l.run = prepare_run(l.spec, l.scenario, l.scenario.adaptivity.dx_max);
  if (cfg.fixed_model) {
    l.fixed = ModelAssignment::uniform(l.run.network, l.scenario.horizon,
                                       l.scenario.adaptivity.block_length,
                                       l.scenario.adaptivity.dt0, parse_level(*cfg.fixed_model),
                                       l.scenario.adaptivity.dx_max);
  }
  return l;
}

Trajectory run_simulation(const Loaded& l, RunSummary& summary) {
  if (l.fixed) {
    Trajectory tr = simulate(l.run.network, *l.fixed, l.run.controls, l.run.initial, {},
                             l.scenario.adaptivity.steady_initial);
    if (!l.scenario.functional.empty()) {
      summary.functional = evaluate(l.run.network, tr, l.scenario.functional).total;
    }
    return tr;
  }
  auto [tr, report] = adaptive_simulate(l.run.network, l.run.controls, l.scenario.functional,
                                        l.run.initial, l.scenario.adaptivity);
  summary.functional = report.functional;
  summary.adaptivity = std::move(report);
  return std::move(tr);
}

int cmd_steady(const Config& cfg, RunSummary& summary) {
  Loaded l = load(cfg, summary.settings);
  const ModelLevel level = cfg.fixed_model ? parse_level(*cfg.fixed_model) : ModelLevel::M1;
  const double block = l.scenario.adaptivity.block_length;
  const auto a = ModelAssignment::uniform(l.run.network, block, block, l.scenario.adaptivity.dt0,
                                          level, l.scenario.adaptivity.dx_max);
  const Trajectory tr = start_trajectory(l.run.network, a, l.run.controls, l.run.initial, true);
  summary.tol = l.scenario.tol;
  stamp(summary);
  write_results(l.run.network, tr, summary, cfg.out, {cfg.resample});
  return kExitOk;
}

int cmd_simulate(const Config& cfg, RunSummary& summary) {
  Loaded l = load(cfg, summary.settings);
  summary.tol = l.scenario.tol;
  const Trajectory tr = run_simulation(l, summary);
  stamp(summary);
  write_results(l.run.network, tr, summary, cfg.out, {cfg.resample});
  return kExitOk;
}

int cmd_optimize(const Config& cfg, RunSummary& summary) {
  Loaded l = load(cfg, summary.settings);
  summary.tol = l.scenario.tol;
  NominationOptions o;
  o.sqp = l.scenario.optimizer;
  o.adaptive = l.scenario.adaptivity;
  o.control_interval = l.scenario.control_interval;
  o.horizon_split = cfg.horizon_split;
  o.assignment = l.fixed;
  summary.settings["epsx"] = num(o.sqp.epsx);
  summary.settings["feas_tol"] = num(o.sqp.feas_tol);
  summary.settings["max_iter"] = std::to_string(o.sqp.max_iter);

  NominationResult r =
      validate_nomination(l.run.network, l.run.initial, l.run.controls, l.scenario.constraints,
                          l.scenario.functional, l.scenario.horizon, o);
  summary.functional = r.nlp.objective;
  summary.terminal_stationarity = r.terminal_stationarity;
  int code = kExitOk;
  if (r.feasible) {
    summary.status = "ok";
  } else if (r.nlp.status == SqpStatus::infeasible || r.nlp.max_violation > o.sqp.feas_tol) {
    summary.status = "infeasible";
    code = kExitInfeasible;
  } else {
    summary.status = "not_converged";
    code = kExitError;
  }
  summary.optimizer = std::move(r.nlp);
  summary.exit_code = code;
  stamp(summary);
  write_results(l.run.network, r.trajectory, summary, cfg.out, {cfg.resample});
  return code;
}

int cmd_gradcheck(const Config& cfg, RunSummary& summary) {
  Loaded l = load(cfg, summary.settings);
  summary.tol = l.scenario.tol;
  summary.settings["threshold"] = num(cfg.threshold);
  if (l.scenario.functional.empty()) {
    throw Error(ErrorCode::invalid_argument, "gradcheck needs a functional in the scenario");
  }
  const Trajectory tr = run_simulation(l, summary);
  const GradientCheck g = gradient_check(l.run.network, tr, l.scenario.functional);
  summary.max_relative_error = g.max_rel_error;

  std::string csv = "entry,adjoint,finite_difference,rel_error\n";
  for (std::size_t i = 0; i < g.labels.size(); ++i) {
    csv += g.labels[i] + "," + num(g.adjoint[i]) + "," + num(g.finite_difference[i]) + "," +
           num(g.rel_error[i]) + "\n";
  }
  fs::create_directories(cfg.out);
  std::ofstream(fs::path(cfg.out) / "gradcheck.csv") << csv;

  std::cout << "entries checked: " << g.labels.size() << "\n";
  std::cout << "max relative error: " << num(g.max_rel_error) << "\n";
  const int code = g.max_rel_error <= cfg.threshold ? kExitOk : kExitError;
  summary.status = code == kExitOk ? "ok" : "failed";
  summary.exit_code = code;
  stamp(summary);
  write_results(l.run.network, tr, summary, cfg.out, {cfg.resample});
  return code;
}

bool in_polygon(const FieldPolygon& poly, double q, double h) {
  const auto& v = poly.vertices;
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i][1] > h) != (v[j][1] > h)) {
      const double qx = v[i][0] + (h - v[i][1]) * (v[j][0] - v[i][0]) / (v[j][1] - v[i][1]);
      if (q < qx) inside = !inside;
    }
  }
  return inside;
}

json field_report(const CharacteristicField& f, const Config& cfg) {
  const SemiconvexField s = build_semiconvex(f, cfg.levels);
  double width_min = 1e300, width_max = 0.0, q_min = 1e300, q_max = -1e300;
  for (std::size_t i = 0; i < s.levels.size(); ++i) {
    width_min = std::min(width_min, s.q_hi[i] - s.q_lo[i]);
    width_max = std::max(width_max, s.q_hi[i] - s.q_lo[i]);
    q_min = std::min(q_min, s.q_lo[i]);
    q_max = std::max(q_max, s.q_hi[i]);
  }
  // Share of the semiconvex set not covered by any polygon.
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uq(q_min, q_max), uh(s.h_min(), s.h_max());
  std::size_t inside = 0, absorbed = 0;
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    const double q = uq(rng), h = uh(rng);
    if (contains(s, q, h) < 0.0) continue;
    ++inside;
    bool covered = false;
    for (const auto& p : f.polygons) covered = covered || in_polygon(p, q, h);
    if (!covered) ++absorbed;
  }
  json j;
  j["id"] = f.id;
  j["polygons"] = f.polygons.size();
  j["levels"] = s.levels.size();
  j["h_min"] = s.h_min();
  j["h_max"] = s.h_max();
  j["q_min"] = q_min;
  j["q_max"] = q_max;
  j["slice_width_min"] = width_min;
  j["slice_width_max"] = width_max;
  j["max_slope"] = s.max_slope;
  j["absorbed_hole_levels"] = s.absorbed_hole_levels;
  j["absorbed_share"] = inside == 0 ? 0.0 : static_cast<double>(absorbed) / inside;
  return j;
}

int cmd_check_field(const Config& cfg, RunSummary& summary, json& extra) {
  std::vector<CharacteristicField> fields;
  for (const auto& p : cfg.fields) fields.push_back(parse_field(p));
  if (!cfg.network.empty()) {
    std::vector<std::string> warnings;
    const NetworkSpec spec = parse_network(cfg.network, NetworkFormat::automatic, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& [id, f] : spec.fields) fields.push_back(f);
    summary.settings["network"] = cfg.network;
  }
  if (fields.empty()) {
    throw Error(ErrorCode::invalid_argument, "check-field needs --field or --network");
  }
  summary.settings["levels"] = std::to_string(cfg.levels);
  summary.settings["samples"] = std::to_string(cfg.samples);
  summary.settings["seed"] = std::to_string(cfg.seed);

  json reports = json::array();
  std::printf("%-16s %8s %6s %12s %12s %12s %12s %8s %10s\n", "field", "polygons", "levels",
              "h_min", "h_max", "width_min", "width_max", "holes", "absorbed");
  for (const auto& f : fields) {
    json r = field_report(f, cfg);
    std::printf("%-16s %8zu %6zu %12.6g %12.6g %12.6g %12.6g %8zu %10.4f\n", f.id.c_str(),
                r["polygons"].get<std::size_t>(), r["levels"].get<std::size_t>(),
                r["h_min"].get<double>(), r["h_max"].get<double>(),
                r["slice_width_min"].get<double>(), r["slice_width_max"].get<double>(),
                r["absorbed_hole_levels"].get<std::size_t>(), r["absorbed_share"].get<double>());
    reports.push_back(std::move(r));
  }
  extra["fields"] = reports;
  fs::create_directories(cfg.out);
  stamp(summary);
  json j = json::parse(summary_json(summary));
  j["fields"] = reports;
  std::ofstream(fs::path(cfg.out) / "summary.json") << j.dump(2) << "\n";
  return kExitOk;
}

void add_common(CLI::App* sub, Config& cfg, bool scenario_run) {
  sub->add_option("--network", cfg.network, "Network file (.json or GasLib .net/.xml)");
  sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
  sub->add_flag("-v,--verbose", cfg.verbosity, "Print defaults and progress to stderr");
  if (!scenario_run) return;
  sub->add_option("--scenario", cfg.scenario, "Scenario file");
  auto* fixed = sub->add_option("--fixed-model", cfg.fixed_model,
                                "Uniform model level instead of adaptivity")
                    ->check(CLI::IsMember({"m1", "m2", "m3"}));
  sub->add_option("--tol", cfg.tol, "Relative tolerance of the functional")->excludes(fixed);
  sub->add_option("--dt", cfg.dt, "Initial (or fixed) time step in s");
  sub->add_option("--dx-max", cfg.dx_max, "Largest cell length in m");
  sub->add_option("--resample", cfg.resample, "Output grid spacing in s (0 keeps the steps)")
      ->capture_default_str();
}

std::string error_line(const std::string& command, const std::string& code,
                       const std::string& message) {
  json j;
  j["schema"] = kSummarySchema;
  j["command"] = command;
  j["status"] = "error";
  j["exit_code"] = kExitError;
  j["error"] = {{"code", code}, {"message", message}};
  return j.dump();
}

}  // namespace

int main(int argc, char** argv) {
  Config cfg;
  CLI::App app{"Transient simulation and nomination validation of gas networks", "gasgrid"};
  app.require_subcommand(1);

  auto* steady = app.add_subcommand("steady", "Steady state of the scenario at t = 0");
  add_common(steady, cfg, true);
  auto* simulate_cmd = app.add_subcommand("simulate", "Adaptive or fixed-model simulation");
  add_common(simulate_cmd, cfg, true);
  auto* optimize = app.add_subcommand("optimize", "Validate the scenario's nomination");
  add_common(optimize, cfg, true);
  optimize->add_option("--horizon-split", cfg.horizon_split, "Sequential sub-horizon solves")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* gradcheck = app.add_subcommand("gradcheck", "Adjoint gradient against finite differences");
  add_common(gradcheck, cfg, true);
  gradcheck->add_option("--threshold", cfg.threshold, "Largest accepted relative error")
      ->capture_default_str();
  auto* check_field = app.add_subcommand("check-field", "Semiconvex field slice statistics");
  add_common(check_field, cfg, false);
  check_field->add_option("--field", cfg.fields, "Field file (repeatable)");
  check_field->add_option("--levels", cfg.levels, "Head levels")->capture_default_str();
  check_field->add_option("--samples", cfg.samples, "Random samples for the absorbed share")
      ->capture_default_str();
  check_field->add_option("--seed", cfg.seed, "Sampling seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    const std::string command = argc > 1 ? argv[1] : "";
    std::cerr << error_line(command, std::string(to_string(ErrorCode::invalid_argument)), e.what())
              << "\n";
    return kExitError;
  }
  for (auto* sub : app.get_subcommands()) cfg.command = sub->get_name();

  RunSummary summary;
  summary.command = cfg.command;
  summary.settings["command"] = cfg.command;
  summary.settings["out"] = cfg.out;
  summary.settings["fixed_model"] = cfg.fixed_model.value_or("adaptive");
  summary.settings["resample"] = num(cfg.resample);
  summary.settings["horizon_split"] = std::to_string(cfg.horizon_split);
  summary.settings["threads"] = std::to_string(thread_count());

  int code = kExitOk;
  json extra;
  try {
    if (cfg.command == "steady") code = cmd_steady(cfg, summary);
    else if (cfg.command == "simulate") code = cmd_simulate(cfg, summary);
    else if (cfg.command == "optimize") code = cmd_optimize(cfg, summary);
    else if (cfg.command == "gradcheck") code = cmd_gradcheck(cfg, summary);
    else code = cmd_check_field(cfg, summary, extra);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << error_line(cfg.command, std::string(to_string(e.code())), e.what()) << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << error_line(cfg.command, "internal", e.what()) << "\n";
    return kExitError;
  }
  summary.exit_code = code;
  stamp(summary);

  json line = json::parse(summary_json(summary));
  if (line.contains("optimizer")) line["optimizer"].erase("history");
  for (auto& [k, v] : extra.items()) line[k] = v;
  std::cout << line.dump() << "\n";
  return code;
}
