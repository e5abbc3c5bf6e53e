#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <gasgrid/adaptivity.hpp>
#include <gasgrid/adjoint.hpp>
#include <gasgrid/discretization.hpp>
#include <gasgrid/network.hpp>
#include <gasgrid/objective.hpp>

namespace fixtures {

using namespace gasgrid;

inline PipeParameters pipe_par(double length, double diameter = 0.8, double lambda = 0.011) {
  PipeParameters p;
  p.length = length;
  p.diameter = diameter;
  p.area = std::numbers::pi * diameter * diameter / 4.0;
  p.lambda = lambda;
  return p;
}

inline Node pressure_node(const std::string& id, TimeSeries p, NodeKind kind = NodeKind::source) {
  return {id, kind, NodeCondition{NodeCondition::Kind::prescribed_pressure, std::move(p)}, {}};
}

inline Node flow_node(const std::string& id, TimeSeries q, NodeKind kind = NodeKind::sink) {
  return {id, kind, NodeCondition{NodeCondition::Kind::prescribed_flow, std::move(q)}, {}};
}

inline Node interior(const std::string& id) { return {id, NodeKind::interior, {}, {}}; }

inline Arc pipe(const std::string& id, const std::string& tail, const std::string& head,
                double length, double diameter = 0.8, double lambda = 0.011) {
  return {id, tail, head, PipeArc{pipe_par(length, diameter, lambda), {}}};
}

inline Arc compressor(const std::string& id, const std::string& tail, const std::string& head,
                      const std::string& field = {}) {
  CompressorArc c;
  c.field_id = field;
  return {id, tail, head, c};
}

/// S (pressure) -> pipe -> T (flow withdrawal q).
inline Network single_pipe(double length, double p_in, TimeSeries q_out, double diameter = 0.8,
                           double lambda = 0.011) {
  NetworkSpec s;
  s.nodes = {pressure_node("S", TimeSeries::constant(p_in)), flow_node("T", std::move(q_out))};
  s.arcs = {pipe("P", "S", "T", length, diameter, lambda)};
  return build_network(s);
}

/// Rectangle-ish polygon field around a nominal operating point.
inline CharacteristicField box_field(const std::string& id, double q0, double q1, double h0,
                                     double h1) {
  CharacteristicField f;
  f.id = id;
  f.polygons.push_back({{{q0, h0}, {q1, h0}, {q1, h1}, {q0, h1}}});
  return f;
}

/// Five nodes, one compressor: S -> P1 -> A -> C -> B -> P2 -> J, J -> P3 -> T,
/// J -> P4 -> T. S is pressure-controlled, T withdraws a time-varying flow.
inline Network five_node(TimeSeries demand, double p_s = 50e5) {
  NetworkSpec s;
  s.nodes = {pressure_node("S", TimeSeries::constant(p_s)), interior("A"), interior("B"),
             interior("J"), flow_node("T", std::move(demand))};
  s.arcs = {pipe("P1", "S", "A", 30e3), compressor("C", "A", "B", "F"), pipe("P2", "B", "J", 40e3),
            pipe("P3", "J", "T", 20e3, 0.6), pipe("P4", "J", "T", 25e3, 0.5)};
  s.fields["F"] = box_field("F", 0.0, 400.0, 0.0, 1.5e5);
  return build_network(s);
}

inline ControlVector head_controls(const Network& net, double horizon, double interval,
                                   double h) {
  ControlVector c;
  for (std::size_t a = 0; a < net.arc_count(); ++a) {
    if (!net.arc(a).is_compressor()) continue;
    std::vector<double> t, v;
    for (double s = 0.0; s < horizon + 1e-9; s += interval) {
      t.push_back(s);
      v.push_back(h);
    }
    ControlSeries cs;
    cs.kind = ControlKind::compressor_head;
    cs.arc = a;
    cs.series = TimeSeries(t, v);
    cs.lower = 0.0;
    cs.upper = 1.5e5;
    cs.scale = 1e4;
    c.add(cs);
  }
  return c;
}

inline std::vector<PipeDiscretization> uniform_pipes(const Network& net, ModelLevel level,
                                                     std::size_t cells) {
  std::vector<PipeDiscretization> p(net.arc_count());
  for (std::size_t a = 0; a < net.arc_count(); ++a) {
    if (net.arc(a).is_pipe()) p[a] = {level, cells};
  }
  return p;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace fixtures
