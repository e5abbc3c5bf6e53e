#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gasgrid/compressor.hpp"
#include "gasgrid/gas_models.hpp"
#include "gasgrid/time_series.hpp"

namespace gasgrid {

enum class NodeKind { interior, source, sink };

const char* to_string(NodeKind kind);

struct NodeCondition {
  enum class Kind { prescribed_pressure, prescribed_flow };
  Kind kind = Kind::prescribed_flow;
  /// Pa for pressure, m^3/s for flow. Flows follow the node sign convention:
  /// positive feeds gas in, negative withdraws it.
  TimeSeries profile;

  friend bool operator==(const NodeCondition&, const NodeCondition&) = default;
};

struct Node {
  std::string id;
  NodeKind kind = NodeKind::interior;
  std::optional<NodeCondition> boundary;
  std::optional<std::pair<double, double>> p_bounds;  // Pa

  friend bool operator==(const Node&, const Node&) = default;
};

struct PipeArc {
  PipeParameters par;
  std::optional<double> roughness;  // m, kept for round trips
  friend bool operator==(const PipeArc&, const PipeArc&) = default;
};

struct ShortPipeArc {
  friend bool operator==(const ShortPipeArc&, const ShortPipeArc&) = default;
};

struct CompressorArc {
  std::string field_id;
  Schedule on{true};
  bool bypass = false;  // an inactive station passes gas through instead of blocking
  double eta_ad = 0.8;
  friend bool operator==(const CompressorArc&, const CompressorArc&) = default;
};

struct ValveArc {
  Schedule open{true};
  friend bool operator==(const ValveArc&, const ValveArc&) = default;
};

struct ControlValveArc {
  friend bool operator==(const ControlValveArc&, const ControlValveArc&) = default;
};

using ArcVariant = std::variant<PipeArc, ShortPipeArc, CompressorArc, ValveArc, ControlValveArc>;

const char* arc_type_name(const ArcVariant& v);

struct Arc {
  std::string id;
  std::string tail;
  std::string head;
  ArcVariant variant;
  std::size_t tail_index = 0;  // resolved by build_network
  std::size_t head_index = 0;

  bool is_pipe() const { return std::holds_alternative<PipeArc>(variant); }
  bool is_compressor() const { return std::holds_alternative<CompressorArc>(variant); }
  bool is_control_valve() const { return std::holds_alternative<ControlValveArc>(variant); }
  const PipeParameters& pipe() const { return std::get<PipeArc>(variant).par; }
  const CompressorArc& compressor() const { return std::get<CompressorArc>(variant); }
};

/// Raw network description as read from a file, before validation.
struct NetworkSpec {
  GasProperties gas;
  std::vector<Node> nodes;
  std::vector<Arc> arcs;
  std::map<std::string, CharacteristicField> fields;
  std::string source_file;
  std::string format;
};

/// Validated, immutable network graph.
class Network {
 public:
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const GasProperties& gas() const { return gas_; }
  const std::map<std::string, CharacteristicField>& fields() const { return fields_; }

  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const Arc& arc(std::size_t i) const { return arcs_.at(i); }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t arc_count() const { return arcs_.size(); }

  /// Arcs leaving (delta^+) and entering (delta^-) a node.
  const std::vector<std::size_t>& out_arcs(std::size_t node) const { return out_.at(node); }
  const std::vector<std::size_t>& in_arcs(std::size_t node) const { return in_.at(node); }

  std::optional<std::size_t> find_node(const std::string& id) const;
  std::optional<std::size_t> find_arc(const std::string& id) const;
  std::size_t node_index(const std::string& id) const;
  std::size_t arc_index(const std::string& id) const;

  std::vector<std::size_t> pipe_indices() const;

  /// Copy with different boundary conditions (same topology and indices).
  Network with_boundaries(const std::map<std::string, NodeCondition>& conditions) const;
  /// Copy with a replaced arc variant, e.g. a different valve schedule.
  Network with_arc_variant(std::size_t arc, ArcVariant variant) const;

  NetworkSpec to_spec() const;

 private:
  friend Network build_network(const NetworkSpec& spec, std::vector<std::string>* diagnostics);
  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  GasProperties gas_;
  std::map<std::string, CharacteristicField> fields_;
  std::vector<std::vector<std::size_t>> out_, in_;
  std::map<std::string, std::size_t> node_lookup_, arc_lookup_;
};

/// Validates ids, endpoints, connectivity and boundary bookkeeping. Any
/// problems found are also appended to `diagnostics` before throwing.
Network build_network(const NetworkSpec& spec, std::vector<std::string>* diagnostics = nullptr);

/// Conservation of mass at a node: sum of tail-end flows of outgoing arcs
/// minus head-end flows of ingoing arcs minus q_v. `arc_end_flows` is keyed
/// by arc id and holds the flow at the end incident to `node`.
double node_mass_residual(const Network& network, std::size_t node,
                          const std::map<std::string, double>& arc_end_flows, double q_v);

/// Pressure equality at a node: one entry p(endpoint) - p_v per incident arc,
/// outgoing arcs first.
std::vector<double> node_pressure_residuals(const Network& network, std::size_t node,
                                            const std::map<std::string, double>& arc_end_pressures,
                                            double p_v);

/// Algebraic equations of valves, short pipes and control valves. `u` is the
/// pressure reduction of a control valve in Pa (ignored otherwise).
std::array<double, 2> valve_residuals(const Arc& arc, GasState in, GasState out, double t,
                                      double u = 0.0);

}  // namespace gasgrid
