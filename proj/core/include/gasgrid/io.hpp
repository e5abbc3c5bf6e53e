#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gasgrid/adaptivity.hpp"
#include "gasgrid/controls.hpp"
#include "gasgrid/network.hpp"
#include "gasgrid/objective.hpp"
#include "gasgrid/optimizer.hpp"
#include "gasgrid/sqp.hpp"

namespace gasgrid {

enum class NetworkFormat { automatic, native_json, gaslib_xml };

/// Reads a network file. Quantities are converted to SI; structural problems
/// are left to build_network. Warnings (skipped XML elements, defaulted
/// parameters) are appended to `warnings`.
NetworkSpec parse_network(const std::filesystem::path& path,
                          NetworkFormat format = NetworkFormat::automatic,
                          std::vector<std::string>* warnings = nullptr);

NetworkSpec parse_network_string(const std::string& text, NetworkFormat format,
                                 std::vector<std::string>* warnings = nullptr,
                                 const std::filesystem::path& base_dir = {});

/// Native JSON with every quantity written explicitly in SI.
std::string emit_network_json(const NetworkSpec& spec);

/// Structural equality of two specs, ignoring source file and format.
bool same_structure(const NetworkSpec& a, const NetworkSpec& b);

/// Polygon-list field file.
CharacteristicField parse_field(const std::filesystem::path& path);
CharacteristicField parse_field_string(const std::string& text, const std::string& id = {});

struct BoundarySpec {
  NodeCondition::Kind kind = NodeCondition::Kind::prescribed_flow;
  std::optional<TimeSeries> profile;
  bool hold_initial = false;  // pressure (or flow) held at the initial state's value
};

struct CompressorSetting {
  std::optional<Schedule> on;
  std::optional<double> eta;
  std::optional<bool> bypass;
  std::optional<TimeSeries> head;  // initial H_ad guess, m^2/s^2
  double lower = 0.0;
  double upper = 1e300;
  std::optional<double> scale;
};

struct ControlValveSetting {
  TimeSeries drop;  // Pa
  double lower = 0.0;
  double upper = 1e300;
  std::optional<double> scale;
};

struct ScenarioSpec {
  double horizon = 0.0;
  double tol = 5e-3;
  bool tol_defaulted = true;
  std::map<std::string, BoundarySpec> boundaries;
  /// Boundary data of the steady initial state; nodes missing here use
  /// `boundaries` at t = 0.
  std::map<std::string, BoundarySpec> initial_nomination;
  std::map<std::string, Schedule> valves;
  std::map<std::string, CompressorSetting> compressors;
  std::map<std::string, ControlValveSetting> control_valves;
  double control_interval = 1800.0;
  FunctionalSpec functional;
  ConstraintSet constraints;
  SqpOptions optimizer;
  AdaptiveOptions adaptivity;
  std::vector<std::string> log;  // defaults applied while parsing
};

/// Reads a scenario and resolves its references against `network`. Every
/// source and sink needs a boundary either here or in the network file.
ScenarioSpec parse_scenario(const std::filesystem::path& path, const NetworkSpec& network);
ScenarioSpec parse_scenario_string(const std::string& text, const NetworkSpec& network);

enum class ScenarioPhase { initial, transient };

/// Network spec with the scenario's boundary data, valve schedules and
/// station settings applied. For the transient phase, hold_initial boundaries
/// take their value from `initial_state` (required then).
NetworkSpec apply_scenario(const NetworkSpec& network, const ScenarioSpec& scenario,
                           ScenarioPhase phase, const DiscreteState* initial_state = nullptr);

/// Controls for every station and control valve, sampled on the scenario's
/// control interval.
ControlVector scenario_controls(const Network& network, const ScenarioSpec& scenario);

/// Transient network, controls and steady initial state of a scenario. The
/// initial state solves the initial phase on an M1 layout with `dx_max` cells.
struct PreparedRun {
  Network network;
  ControlVector controls;
  DiscreteState initial;
};

PreparedRun prepare_run(const NetworkSpec& network, const ScenarioSpec& scenario,
                        double dx_max = 10000.0);

struct RunSummary {
  std::string command;
  std::string status = "ok";
  int exit_code = 0;
  std::optional<double> functional;
  double tol = 0.0;
  double wall_seconds = 0.0;
  double cpu_seconds = 0.0;
  std::map<std::string, std::string> settings;
  std::optional<AdaptiveReport> adaptivity;
  std::optional<NLPResult> optimizer;
  std::optional<double> terminal_stationarity;
  std::optional<double> max_relative_error;  // gradcheck
};

/// Version tag of the summary JSON.
inline constexpr const char* kSummarySchema = "gasgrid-summary/1";

std::string summary_json(const RunSummary& summary);

struct OutputOptions {
  double resample = 0.0;  // > 0: uniform output grid with this spacing (s)
};

/// Writes nodes/<id>.csv, arcs/<id>.csv, report.csv (when an adaptive report
/// exists) and summary.json into out_dir.
void write_results(const Network& network, const Trajectory& traj, const RunSummary& summary,
                   const std::filesystem::path& out_dir, const OutputOptions& opts = {});

}  // namespace gasgrid
