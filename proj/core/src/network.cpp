#include "gasgrid/network.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "gasgrid/errors.hpp"

namespace gasgrid {

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::interior: return "interior";
    case NodeKind::source: return "source";
    case NodeKind::sink: return "sink";
  }
  return "?";
}

const char* arc_type_name(const ArcVariant& v) {
  struct Visitor {
    const char* operator()(const PipeArc&) const { return "pipe"; }
    const char* operator()(const ShortPipeArc&) const { return "short_pipe"; }
    const char* operator()(const CompressorArc&) const { return "compressor"; }
    const char* operator()(const ValveArc&) const { return "valve"; }
    const char* operator()(const ControlValveArc&) const { return "control_valve"; }
  };
  return std::visit(Visitor{}, v);
}

std::optional<std::size_t> Network::find_node(const std::string& id) const {
  auto it = node_lookup_.find(id);
  if (it == node_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Network::find_arc(const std::string& id) const {
  auto it = arc_lookup_.find(id);
  if (it == arc_lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t Network::node_index(const std::string& id) const {
  auto i = find_node(id);
  if (!i) throw Error(ErrorCode::invalid_argument, "unknown node '" + id + "'");
  return *i;
}

std::size_t Network::arc_index(const std::string& id) const {
  auto i = find_arc(id);
  if (!i) throw Error(ErrorCode::invalid_argument, "unknown arc '" + id + "'");
  return *i;
}

std::vector<std::size_t> Network::pipe_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < arcs_.size(); ++a) {
    if (arcs_[a].is_pipe()) out.push_back(a);
  }
  return out;
}

Network Network::with_boundaries(const std::map<std::string, NodeCondition>& conditions) const {
  NetworkSpec spec = to_spec();
  for (const auto& [id, cond] : conditions) {
    bool found = false;
    for (auto& n : spec.nodes) {
      if (n.id == id) {
        n.boundary = cond;
        found = true;
      }
    }
    if (!found) throw Error(ErrorCode::invalid_argument, "boundary for unknown node '" + id + "'");
  }
  return build_network(spec);
}

Network Network::with_arc_variant(std::size_t arc, ArcVariant variant) const {
  NetworkSpec spec = to_spec();
  spec.arcs.at(arc).variant = std::move(variant);
  return build_network(spec);
}

NetworkSpec Network::to_spec() const {
  NetworkSpec spec;
  spec.gas = gas_;
  spec.nodes = nodes_;
  spec.arcs = arcs_;
  spec.fields = fields_;
  return spec;
}

Network build_network(const NetworkSpec& spec, std::vector<std::string>* diagnostics) {
  std::vector<std::string> local;
  std::vector<std::string>& diag = diagnostics ? *diagnostics : local;
  const std::size_t first_diag = diag.size();
  ErrorCode first_code = ErrorCode::invalid_argument;
  bool failed = false;
  auto fail = [&](ErrorCode code, std::string msg) {
    if (!failed) first_code = code;
    failed = true;
    diag.push_back(std::string(to_string(code)) + ": " + msg);
  };

  Network net;
  net.gas_ = spec.gas;
  net.fields_ = spec.fields;
  net.nodes_ = spec.nodes;
  net.arcs_ = spec.arcs;

  for (std::size_t i = 0; i < net.nodes_.size(); ++i) {
    const Node& n = net.nodes_[i];
    if (!net.node_lookup_.emplace(n.id, i).second) {
      fail(ErrorCode::duplicate_id, "node '" + n.id + "' defined twice");
    }
    if (n.kind == NodeKind::interior && n.boundary) {
      fail(ErrorCode::invalid_argument, "interior node '" + n.id + "' carries a boundary condition");
    }
    if (n.kind != NodeKind::interior && !n.boundary) {
      fail(ErrorCode::invalid_argument,
           std::string(to_string(n.kind)) + " node '" + n.id + "' has no boundary condition");
    }
    if (n.boundary && n.boundary->profile.empty()) {
      fail(ErrorCode::invalid_argument, "node '" + n.id + "' has an empty boundary profile");
    }
  }
  for (std::size_t a = 0; a < net.arcs_.size(); ++a) {
    Arc& arc = net.arcs_[a];
    if (!net.arc_lookup_.emplace(arc.id, a).second) {
      fail(ErrorCode::duplicate_id, "arc '" + arc.id + "' defined twice");
    }
    auto tail = net.node_lookup_.find(arc.tail);
    auto head = net.node_lookup_.find(arc.head);
    if (tail == net.node_lookup_.end()) {
      fail(ErrorCode::dangling_endpoint, "arc '" + arc.id + "' tail '" + arc.tail + "' is not a node");
    } else {
      arc.tail_index = tail->second;
    }
    if (head == net.node_lookup_.end()) {
      fail(ErrorCode::dangling_endpoint, "arc '" + arc.id + "' head '" + arc.head + "' is not a node");
    } else {
      arc.head_index = head->second;
    }
    if (arc.tail == arc.head) fail(ErrorCode::self_loop, "arc '" + arc.id + "' is a self-loop");
    if (auto* pipe = std::get_if<PipeArc>(&arc.variant)) {
      PipeParameters& p = pipe->par;
      if (p.area <= 0.0 && p.diameter > 0.0) p.area = std::numbers::pi * p.diameter * p.diameter / 4.0;
      if (!(p.length > 0.0) || !(p.diameter > 0.0) || !(p.area > 0.0) || !(p.c > 0.0) ||
          !(p.rho0 > 0.0) || p.lambda < 0.0) {
        fail(ErrorCode::invalid_argument, "pipe '" + arc.id + "' has nonpositive parameters");
      }
    }
    if (auto* cs = std::get_if<CompressorArc>(&arc.variant)) {
      if (!cs->field_id.empty() && !net.fields_.count(cs->field_id)) {
        fail(ErrorCode::dangling_endpoint,
             "compressor '" + arc.id + "' references unknown field '" + cs->field_id + "'");
      }
      if (!(cs->eta_ad > 0.0) || cs->eta_ad > 1.0) {
        fail(ErrorCode::invalid_argument, "compressor '" + arc.id + "' efficiency outside (0, 1]");
      }
    }
  }
  if (net.nodes_.empty()) fail(ErrorCode::disconnected_graph, "network has no nodes");

  if (!failed) {
    const std::size_t n = net.nodes_.size();
    net.out_.assign(n, {});
    net.in_.assign(n, {});
    for (std::size_t a = 0; a < net.arcs_.size(); ++a) {
      net.out_[net.arcs_[a].tail_index].push_back(a);
      net.in_[net.arcs_[a].head_index].push_back(a);
    }
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      auto visit = [&](std::size_t w) {
        if (!seen[w]) {
          seen[w] = true;
          ++count;
          stack.push_back(w);
        }
      };
      for (std::size_t a : net.out_[v]) visit(net.arcs_[a].head_index);
      for (std::size_t a : net.in_[v]) visit(net.arcs_[a].tail_index);
    }
    if (count != n) {
      for (std::size_t v = 0; v < n; ++v) {
        if (!seen[v]) {
          fail(ErrorCode::disconnected_graph,
               "node '" + net.nodes_[v].id + "' is not connected to '" + net.nodes_[0].id + "'");
        }
      }
    }
  }

  if (failed) {
    std::string msg = diag[first_diag];
    if (diag.size() - first_diag > 1) {
      msg += " (+" + std::to_string(diag.size() - first_diag - 1) + " more)";
    }
    throw Error(first_code, msg.substr(msg.find(": ") + 2));
  }
  return net;
}

double node_mass_residual(const Network& network, std::size_t node,
                          const std::map<std::string, double>& arc_end_flows, double q_v) {
  double r = -q_v;
  auto flow = [&](std::size_t a) {
    const std::string& id = network.arc(a).id;
    auto it = arc_end_flows.find(id);
    if (it == arc_end_flows.end()) {
      throw Error(ErrorCode::missing_flow, "no flow for arc '" + id + "' at node '" +
                                               network.node(node).id + "'");
    }
    return it->second;
  };
  for (std::size_t a : network.out_arcs(node)) r += flow(a);
  for (std::size_t a : network.in_arcs(node)) r -= flow(a);
  return r;
}

std::vector<double> node_pressure_residuals(const Network& network, std::size_t node,
                                            const std::map<std::string, double>& arc_end_pressures,
                                            double p_v) {
  std::vector<double> out;
  auto push = [&](std::size_t a) {
    const std::string& id = network.arc(a).id;
    auto it = arc_end_pressures.find(id);
    if (it == arc_end_pressures.end()) {
      throw Error(ErrorCode::missing_pressure, "no pressure for arc '" + id + "' at node '" +
                                                   network.node(node).id + "'");
    }
    out.push_back(it->second - p_v);
  };
  for (std::size_t a : network.out_arcs(node)) push(a);
  for (std::size_t a : network.in_arcs(node)) push(a);
  return out;
}

std::array<double, 2> valve_residuals(const Arc& arc, GasState in, GasState out, double t,
                                      double u) {
  if (std::holds_alternative<ControlValveArc>(arc.variant)) {
    return {in.p - out.p - u, in.q - out.q};
  }
  bool open = true;
  if (const auto* v = std::get_if<ValveArc>(&arc.variant)) {
    open = v->open(t);
  } else if (!std::holds_alternative<ShortPipeArc>(arc.variant)) {
    throw Error(ErrorCode::invalid_argument,
                "arc '" + arc.id + "' is a " + arc_type_name(arc.variant) + ", not a valve");
  }
  if (open) return {in.q - out.q, in.p - out.p};
  return {in.q, out.q};
}

}  // namespace gasgrid
