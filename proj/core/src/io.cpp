#include "gasgrid/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include "gasgrid/errors.hpp"

namespace gasgrid {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- units

enum class Dim { length, pressure, flow, time, head, velocity, density, inv_pressure, none };

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::length: return "length";
    case Dim::pressure: return "pressure";
    case Dim::flow: return "flow";
    case Dim::time: return "time";
    case Dim::head: return "specific energy";
    case Dim::velocity: return "velocity";
    case Dim::density: return "density";
    case Dim::inv_pressure: return "inverse pressure";
    case Dim::none: return "dimensionless";
  }
  return "?";
}

struct UnitEntry {
  const char* name;
  Dim dim;
  double factor;
};

// GasLib spellings are included next to the short forms.
constexpr UnitEntry kUnits[] = {
    {"m", Dim::length, 1.0},
    {"km", Dim::length, 1e3},
    {"cm", Dim::length, 1e-2},
    {"mm", Dim::length, 1e-3},
    {"Pa", Dim::pressure, 1.0},
    {"kPa", Dim::pressure, 1e3},
    {"MPa", Dim::pressure, 1e6},
    {"bar", Dim::pressure, 1e5},
    {"m3/s", Dim::flow, 1.0},
    {"m_cube_per_s", Dim::flow, 1.0},
    {"m3/h", Dim::flow, 1.0 / 3600.0},
    {"m_cube_per_hour", Dim::flow, 1.0 / 3600.0},
    {"1000m3/h", Dim::flow, 1000.0 / 3600.0},
    {"1000m_cube_per_hour", Dim::flow, 1000.0 / 3600.0},
    {"s", Dim::time, 1.0},
    {"min", Dim::time, 60.0},
    {"h", Dim::time, 3600.0},
    {"m2/s2", Dim::head, 1.0},
    {"J/kg", Dim::head, 1.0},
    {"kJ/kg", Dim::head, 1e3},
    {"m/s", Dim::velocity, 1.0},
    {"kg/m3", Dim::density, 1.0},
    {"kg_per_m_cube", Dim::density, 1.0},
    {"1/Pa", Dim::inv_pressure, 1.0},
    {"1/bar", Dim::inv_pressure, 1e-5},
    {"1", Dim::none, 1.0},
    {"", Dim::none, 1.0},
};

double unit_factor(const std::string& unit, Dim dim, const std::string& where) {
  for (const auto& u : kUnits) {
    if (unit == u.name && (u.dim == dim || (dim == Dim::none && u.dim == Dim::none))) return u.factor;
  }
  for (const auto& u : kUnits) {
    if (unit == u.name) {
      throw Error(ErrorCode::unit_error, where + ": unit '" + unit + "' is a " + dim_name(u.dim) +
                                             " unit, expected " + dim_name(dim));
    }
  }
  throw Error(ErrorCode::unit_error, where + ": unknown unit '" + unit + "'");
}

// ---------------------------------------------------------------- json helpers

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::parse_error, where + ": " + what);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where, "expected a number");
  return j.get<double>();
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) bad(where, "expected a string");
  return j.get<std::string>();
}

/// Plain numbers are SI; {"value": x, "unit": u} is converted.
double quantity(const json& j, Dim dim, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_object() && j.contains("value")) {
    const double v = number(j.at("value"), where + ".value");
    const std::string u = j.contains("unit") ? text(j.at("unit"), where + ".unit") : "";
    return v * unit_factor(u, dim, where);
  }
  bad(where, std::string("expected a ") + dim_name(dim) + " quantity");
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) bad(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

struct SeriesRead {
  TimeSeries series;
  bool hold_last = false;
};

/// Number, quantity, or {"t": [...], "v": [...], "t_unit", "unit", "hold_last"}.
SeriesRead series(const json& j, Dim dim, const std::string& where) {
  if (j.is_number() || (j.is_object() && j.contains("value"))) {
    return {TimeSeries::constant(quantity(j, dim, where)), true};
  }
  if (!j.is_object() || !j.contains("t") || !j.contains("v")) {
    bad(where, "expected a number, a quantity or a {t, v} series");
  }
  const double tf = j.contains("t_unit") ? unit_factor(text(j.at("t_unit"), where + ".t_unit"), Dim::time, where) : 1.0;
  const double vf = j.contains("unit") ? unit_factor(text(j.at("unit"), where + ".unit"), dim, where) : 1.0;
  auto t = numbers(j.at("t"), where + ".t");
  auto v = numbers(j.at("v"), where + ".v");
  if (t.size() != v.size() || t.empty()) bad(where, "t and v must be nonempty and of equal length");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) bad(where, "breakpoint times must increase");
  }
  for (double& x : t) x *= tf;
  for (double& x : v) x *= vf;
  SeriesRead out{TimeSeries(std::move(t), std::move(v)), false};
  if (j.contains("hold_last")) {
    if (!j.at("hold_last").is_boolean()) bad(where + ".hold_last", "expected a boolean");
    out.hold_last = j.at("hold_last").get<bool>();
  }
  return out;
}

/// Series that must describe every t in [0, horizon].
TimeSeries covering_series(const json& j, Dim dim, double horizon, const std::string& where) {
  SeriesRead s = series(j, dim, where);
  const auto& t = s.series.times();
  if (t.size() > 1 && t.front() > 1e-9) bad(where, "series starts after t = 0");
  if (t.size() > 1 && !s.hold_last && horizon > 0.0 && t.back() < horizon - 1e-6) {
    bad(where, "series ends before the horizon (set hold_last to keep the final value)");
  }
  if (t.size() > 1 && s.hold_last && horizon > 0.0 && t.back() < horizon) {
    auto times = t;
    auto values = s.series.values();
    times.push_back(horizon);
    values.push_back(values.back());
    return TimeSeries(std::move(times), std::move(values));
  }
  return std::move(s.series);
}

Schedule schedule(const json& j, const std::string& where) {
  if (j.is_boolean()) return Schedule(j.get<bool>());
  if (!j.is_object() || !j.contains("t") || !j.contains("state")) {
    bad(where, "expected a boolean or a {t, state} schedule");
  }
  const double tf = j.contains("t_unit") ? unit_factor(text(j.at("t_unit"), where + ".t_unit"), Dim::time, where) : 1.0;
  auto t = numbers(j.at("t"), where + ".t");
  for (double& x : t) x *= tf;
  const json& st = j.at("state");
  if (!st.is_array() || st.size() != t.size() || t.empty()) bad(where, "state must match t");
  std::vector<bool> states;
  for (const auto& s : st) {
    if (!s.is_boolean()) bad(where + ".state", "expected booleans");
    states.push_back(s.get<bool>());
  }
  return Schedule(std::move(t), std::move(states));
}

json series_json(const TimeSeries& s) {
  if (s.size() == 1) return s.values().front();
  return json{{"t", s.times()}, {"v", s.values()}};
}

json schedule_json(const Schedule& s) {
  if (s.times().size() == 1) return static_cast<bool>(s.states().front());
  std::vector<bool> st(s.states().begin(), s.states().end());
  return json{{"t", s.times()}, {"state", st}};
}

json read_json(const std::string& textual, const std::string& where) {
  try {
    return json::parse(textual);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse_error, where + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_schema(const json& j, const std::string& expected, const std::string& where) {
  if (!j.is_object()) bad(where, "top level must be an object");
  if (j.contains("schema") && text(j.at("schema"), where + ".schema") != expected) {
    bad(where, "schema '" + j.at("schema").get<std::string>() + "' is not '" + expected + "'");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where,
                    std::vector<std::string>* warnings) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }) == keys.end()) {
      if (warnings) warnings->push_back(where + ": ignored key '" + it.key() + "'");
    }
  }
}

// ---------------------------------------------------------------- fields

CharacteristicField field_from_json(const json& j, const std::string& id, const std::string& where) {
  check_schema(j, "gasgrid-field/1", where);
  CharacteristicField f;
  f.id = j.contains("id") ? text(j.at("id"), where + ".id") : id;
  if (f.id.empty()) f.id = id;
  const double qf = j.contains("q_unit") ? unit_factor(text(j.at("q_unit"), where), Dim::flow, where) : 1.0;
  const double hf = j.contains("h_unit") ? unit_factor(text(j.at("h_unit"), where), Dim::head, where) : 1.0;
  if (!j.contains("polygons") || !j.at("polygons").is_array()) bad(where, "missing polygons array");
  std::size_t k = 0;
  for (const auto& pj : j.at("polygons")) {
    const std::string pw = where + ".polygons[" + std::to_string(k++) + "]";
    if (!pj.is_array() || pj.size() < 3) bad(pw, "a polygon needs at least three vertices");
    FieldPolygon poly;
    for (const auto& v : pj) {
      if (!v.is_array() || v.size() != 2) bad(pw, "vertices are [Q, H] pairs");
      poly.vertices.push_back({number(v[0], pw) * qf, number(v[1], pw) * hf});
    }
    f.polygons.push_back(std::move(poly));
  }
  if (f.polygons.empty()) throw Error(ErrorCode::empty_field, where + ": field has no polygons");
  return f;
}

json field_to_json(const CharacteristicField& f) {
  json polys = json::array();
  for (const auto& p : f.polygons) {
    json verts = json::array();
    for (const auto& v : p.vertices) verts.push_back({v[0], v[1]});
    polys.push_back(verts);
  }
  return json{{"schema", "gasgrid-field/1"}, {"id", f.id}, {"polygons", polys}};
}

// ---------------------------------------------------------------- native network

GasProperties gas_from_json(const json& j, const std::string& where) {
  GasProperties g;
  if (j.contains("c")) g.c = quantity(j.at("c"), Dim::velocity, where + ".c");
  if (j.contains("rho0")) g.rho0 = quantity(j.at("rho0"), Dim::density, where + ".rho0");
  if (j.contains("kappa")) g.kappa = number(j.at("kappa"), where + ".kappa");
  if (j.contains("eos")) {
    const json& e = j.at("eos");
    const std::string kind = e.contains("kind") ? text(e.at("kind"), where + ".eos.kind") : "ideal";
    if (kind == "ideal") {
      g.eos.kind = EquationOfState::Kind::ideal;
    } else if (kind == "affine") {
      g.eos.kind = EquationOfState::Kind::affine;
    } else {
      bad(where + ".eos.kind", "unknown equation of state '" + kind + "'");
    }
    if (e.contains("z0")) g.eos.z0 = number(e.at("z0"), where + ".eos.z0");
    if (e.contains("alpha")) g.eos.alpha = quantity(e.at("alpha"), Dim::inv_pressure, where + ".eos.alpha");
  }
  return g;
}

NodeCondition condition_from_json(const json& j, const std::string& where) {
  NodeCondition c;
  const std::string kind = text(j.at("kind"), where + ".kind");
  if (kind == "pressure") {
    c.kind = NodeCondition::Kind::prescribed_pressure;
    c.profile = series(j.at("profile"), Dim::pressure, where + ".profile").series;
  } else if (kind == "flow") {
    c.kind = NodeCondition::Kind::prescribed_flow;
    c.profile = series(j.at("profile"), Dim::flow, where + ".profile").series;
  } else {
    bad(where + ".kind", "boundary kind must be 'pressure' or 'flow'");
  }
  return c;
}

NetworkSpec network_from_json(const json& j, std::vector<std::string>* warnings,
                              const std::filesystem::path& base_dir) {
  const std::string where = "network";
  check_schema(j, "gasgrid-network/1", where);
  reject_unknown(j, {"schema", "gas", "nodes", "arcs", "fields"}, where, warnings);
  NetworkSpec s;
  s.format = "native-json";
  if (j.contains("gas")) s.gas = gas_from_json(j.at("gas"), where + ".gas");
  if (j.contains("fields")) {
    if (!j.at("fields").is_object()) bad(where + ".fields", "expected an object keyed by field id");
    for (auto it = j.at("fields").begin(); it != j.at("fields").end(); ++it) {
      const std::string fw = where + ".fields." + it.key();
      if (it.value().is_object() && it.value().contains("file")) {
        const auto path = base_dir / text(it.value().at("file"), fw + ".file");
        CharacteristicField f = parse_field(path);
        f.id = it.key();
        s.fields[it.key()] = std::move(f);
      } else {
        s.fields[it.key()] = field_from_json(it.value(), it.key(), fw);
        s.fields[it.key()].id = it.key();
      }
    }
  }
  if (!j.contains("nodes") || !j.at("nodes").is_array()) bad(where, "missing nodes array");
  std::size_t k = 0;
  for (const auto& nj : j.at("nodes")) {
    const std::string nw = where + ".nodes[" + std::to_string(k++) + "]";
    Node n;
    n.id = text(nj.at("id"), nw + ".id");
    const std::string kind = nj.contains("kind") ? text(nj.at("kind"), nw + ".kind") : "interior";
    if (kind == "interior") n.kind = NodeKind::interior;
    else if (kind == "source") n.kind = NodeKind::source;
    else if (kind == "sink") n.kind = NodeKind::sink;
    else bad(nw + ".kind", "unknown node kind '" + kind + "'");
    if (nj.contains("boundary")) n.boundary = condition_from_json(nj.at("boundary"), nw + ".boundary");
    if (nj.contains("p_bounds")) {
      const json& b = nj.at("p_bounds");
      if (!b.is_array() || b.size() != 2) bad(nw + ".p_bounds", "expected [lower, upper]");
      n.p_bounds = std::make_pair(quantity(b[0], Dim::pressure, nw + ".p_bounds"),
                                  quantity(b[1], Dim::pressure, nw + ".p_bounds"));
    }
    s.nodes.push_back(std::move(n));
  }
  if (!j.contains("arcs") || !j.at("arcs").is_array()) bad(where, "missing arcs array");
  k = 0;
  for (const auto& aj : j.at("arcs")) {
    const std::string aw = where + ".arcs[" + std::to_string(k++) + "]";
    Arc a;
    a.id = text(aj.at("id"), aw + ".id");
    a.tail = text(aj.at("from"), aw + ".from");
    a.head = text(aj.at("to"), aw + ".to");
    const std::string type = text(aj.at("type"), aw + ".type");
    if (type == "pipe") {
      PipeArc p;
      p.par.length = quantity(aj.at("length"), Dim::length, aw + ".length");
      p.par.diameter = quantity(aj.at("diameter"), Dim::length, aw + ".diameter");
      p.par.area = aj.contains("area") ? number(aj.at("area"), aw + ".area")
                                       : std::numbers::pi * p.par.diameter * p.par.diameter / 4.0;
      p.par.c = aj.contains("c") ? quantity(aj.at("c"), Dim::velocity, aw + ".c") : s.gas.c;
      p.par.rho0 = aj.contains("rho0") ? quantity(aj.at("rho0"), Dim::density, aw + ".rho0") : s.gas.rho0;
      if (aj.contains("roughness")) p.roughness = quantity(aj.at("roughness"), Dim::length, aw + ".roughness");
      if (aj.contains("lambda")) {
        p.par.lambda = number(aj.at("lambda"), aw + ".lambda");
      } else if (p.roughness) {
        p.par.lambda = nikuradse_lambda(p.par.diameter, *p.roughness);
      } else {
        bad(aw, "pipe '" + a.id + "' needs lambda or roughness");
      }
      a.variant = p;
    } else if (type == "short_pipe") {
      a.variant = ShortPipeArc{};
    } else if (type == "compressor") {
      CompressorArc c;
      if (aj.contains("field")) c.field_id = text(aj.at("field"), aw + ".field");
      if (aj.contains("on")) c.on = schedule(aj.at("on"), aw + ".on");
      if (aj.contains("bypass")) c.bypass = aj.at("bypass").get<bool>();
      if (aj.contains("eta_ad")) c.eta_ad = number(aj.at("eta_ad"), aw + ".eta_ad");
      a.variant = c;
    } else if (type == "valve") {
      ValveArc v;
      if (aj.contains("open")) v.open = schedule(aj.at("open"), aw + ".open");
      a.variant = v;
    } else if (type == "control_valve") {
      a.variant = ControlValveArc{};
    } else {
      bad(aw + ".type", "unknown arc type '" + type + "'");
    }
    s.arcs.push_back(std::move(a));
  }
  return s;
}

// ---------------------------------------------------------------- GasLib XML subset

namespace pt = boost::property_tree;

std::string local_name(const std::string& tag) {
  const auto c = tag.find(':');
  return c == std::string::npos ? tag : tag.substr(c + 1);
}

std::string attr(const pt::ptree& e, const std::string& name, const std::string& where) {
  const auto v = e.get_optional<std::string>("<xmlattr>." + name);
  if (!v) bad(where, "missing attribute '" + name + "'");
  return *v;
}

/// Child element <name value="..." unit="..."/> in SI, if present.
std::optional<double> xml_quantity(const pt::ptree& e, const std::string& name, Dim dim,
                                   const std::string& where) {
  for (const auto& [tag, child] : e) {
    if (local_name(tag) != name) continue;
    const std::string w = where + "/" + name;
    const auto v = child.get_optional<std::string>("<xmlattr>.value");
    if (!v) bad(w, "missing value attribute");
    double x = 0.0;
    try {
      std::size_t used = 0;
      x = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      bad(w, "value '" + *v + "' is not a number");
    }
    const std::string unit = child.get<std::string>("<xmlattr>.unit", "");
    return x * unit_factor(unit, dim, w);
  }
  return std::nullopt;
}

NetworkSpec network_from_xml(const std::string& textual, std::vector<std::string>* warnings) {
  pt::ptree tree;
  std::istringstream in(textual);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw Error(ErrorCode::parse_error,
                "xml line " + std::to_string(e.line()) + ": " + e.message());
  }
  auto warn = [&](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };
  const pt::ptree* root = nullptr;
  for (const auto& [tag, child] : tree) {
    if (local_name(tag) == "network") root = &child;
  }
  if (!root) bad("xml", "no <network> root element");

  NetworkSpec s;
  s.format = "gaslib-xml";
  warn("gas properties not given in GasLib network files; defaults used");
  for (const auto& [tag, section] : *root) {
    const std::string sname = local_name(tag);
    if (sname == "<xmlattr>" || sname == "<xmlcomment>") continue;
    if (sname == "information") continue;
    if (sname == "nodes") {
      for (const auto& [ntag, ne] : section) {
        const std::string kind = local_name(ntag);
        if (kind == "<xmlattr>" || kind == "<xmlcomment>") continue;
        Node n;
        const std::string w = "xml/nodes/" + kind;
        if (kind == "source") n.kind = NodeKind::source;
        else if (kind == "sink") n.kind = NodeKind::sink;
        else if (kind == "innode") n.kind = NodeKind::interior;
        else {
          warn(w + ": unsupported node element skipped");
          continue;
        }
        n.id = attr(ne, "id", w);
        const auto lo = xml_quantity(ne, "pressureMin", Dim::pressure, w + "[" + n.id + "]");
        const auto hi = xml_quantity(ne, "pressureMax", Dim::pressure, w + "[" + n.id + "]");
        if (lo && hi) n.p_bounds = std::make_pair(*lo, *hi);
        s.nodes.push_back(std::move(n));
      }
    } else if (sname == "connections") {
      for (const auto& [ctag, ce] : section) {
        const std::string kind = local_name(ctag);
        if (kind == "<xmlattr>" || kind == "<xmlcomment>") continue;
        const std::string w = "xml/connections/" + kind;
        Arc a;
        const bool known = kind == "pipe" || kind == "shortPipe" || kind == "valve" ||
                           kind == "controlValve" || kind == "compressorStation";
        if (!known) {
          const std::string id = ce.get<std::string>("<xmlattr>.id", "?");
          warn(w + "[" + id + "]: unsupported connection element skipped");
          continue;
        }
        a.id = attr(ce, "id", w);
        a.tail = attr(ce, "from", w + "[" + a.id + "]");
        a.head = attr(ce, "to", w + "[" + a.id + "]");
        const std::string aw = w + "[" + a.id + "]";
        if (kind == "pipe") {
          PipeArc p;
          const auto len = xml_quantity(ce, "length", Dim::length, aw);
          const auto dia = xml_quantity(ce, "diameter", Dim::length, aw);
          if (!len || !dia) bad(aw, "pipe needs length and diameter");
          p.par.length = *len;
          p.par.diameter = *dia;
          p.par.area = std::numbers::pi * *dia * *dia / 4.0;
          p.par.c = s.gas.c;
          p.par.rho0 = s.gas.rho0;
          p.roughness = xml_quantity(ce, "roughness", Dim::length, aw);
          if (p.roughness) {
            p.par.lambda = nikuradse_lambda(p.par.diameter, *p.roughness);
          } else {
            warn(aw + ": no roughness, default friction coefficient used");
          }
          a.variant = p;
        } else if (kind == "shortPipe") {
          a.variant = ShortPipeArc{};
        } else if (kind == "valve") {
          a.variant = ValveArc{};
        } else if (kind == "controlValve") {
          a.variant = ControlValveArc{};
        } else {
          CompressorArc c;
          warn(aw + ": compressor field not read from XML; supply it in a field file");
          a.variant = c;
        }
        s.arcs.push_back(std::move(a));
      }
    } else {
      warn("xml/" + sname + ": unsupported section skipped");
    }
  }
  return s;
}

bool same_pipe(const PipeArc& a, const PipeArc& b) {
  const auto& p = a.par;
  const auto& q = b.par;
  return p.length == q.length && p.diameter == q.diameter && p.area == q.area &&
         p.lambda == q.lambda && p.c == q.c && p.rho0 == q.rho0 && a.roughness == b.roughness;
}

bool same_variant(const ArcVariant& a, const ArcVariant& b) {
  if (a.index() != b.index()) return false;
  if (const auto* p = std::get_if<PipeArc>(&a)) return same_pipe(*p, std::get<PipeArc>(b));
  if (const auto* c = std::get_if<CompressorArc>(&a)) return *c == std::get<CompressorArc>(b);
  if (const auto* v = std::get_if<ValveArc>(&a)) return *v == std::get<ValveArc>(b);
  return true;
}

bool same_gas(const GasProperties& a, const GasProperties& b) {
  return a.c == b.c && a.rho0 == b.rho0 && a.kappa == b.kappa && a.eos.kind == b.eos.kind &&
         a.eos.z0 == b.eos.z0 && a.eos.alpha == b.eos.alpha;
}

}  // namespace

NetworkSpec parse_network_string(const std::string& textual, NetworkFormat format,
                                 std::vector<std::string>* warnings,
                                 const std::filesystem::path& base_dir) {
  if (format == NetworkFormat::automatic) {
    const auto first = textual.find_first_not_of(" \t\r\n");
    format = first != std::string::npos && textual[first] == '<' ? NetworkFormat::gaslib_xml
                                                                   : NetworkFormat::native_json;
  }
  if (format == NetworkFormat::gaslib_xml) return network_from_xml(textual, warnings);
  return network_from_json(read_json(textual, "network"), warnings, base_dir);
}

NetworkSpec parse_network(const std::filesystem::path& path, NetworkFormat format,
                          std::vector<std::string>* warnings) {
  if (format == NetworkFormat::automatic) {
    const auto ext = path.extension().string();
    if (ext == ".xml" || ext == ".net") format = NetworkFormat::gaslib_xml;
  }
  NetworkSpec s = parse_network_string(read_file(path), format, warnings, path.parent_path());
  s.source_file = path.string();
  return s;
}

std::string emit_network_json(const NetworkSpec& spec) {
  json j;
  j["schema"] = "gasgrid-network/1";
  json eos{{"kind", spec.gas.eos.kind == EquationOfState::Kind::ideal ? "ideal" : "affine"},
           {"z0", spec.gas.eos.z0},
           {"alpha", spec.gas.eos.alpha}};
  j["gas"] = {{"c", spec.gas.c}, {"rho0", spec.gas.rho0}, {"kappa", spec.gas.kappa}, {"eos", eos}};
  json fields = json::object();
  for (const auto& [id, f] : spec.fields) fields[id] = field_to_json(f);
  j["fields"] = fields;
  json nodes = json::array();
  for (const auto& n : spec.nodes) {
    json nj{{"id", n.id}, {"kind", to_string(n.kind)}};
    if (n.boundary) {
      nj["boundary"] = {
          {"kind", n.boundary->kind == NodeCondition::Kind::prescribed_pressure ? "pressure" : "flow"},
          {"profile", series_json(n.boundary->profile)}};
    }
    if (n.p_bounds) nj["p_bounds"] = {n.p_bounds->first, n.p_bounds->second};
    nodes.push_back(nj);
  }
  j["nodes"] = nodes;
  json arcs = json::array();
  for (const auto& a : spec.arcs) {
    json aj{{"id", a.id}, {"from", a.tail}, {"to", a.head}, {"type", arc_type_name(a.variant)}};
    if (const auto* p = std::get_if<PipeArc>(&a.variant)) {
      aj["length"] = p->par.length;
      aj["diameter"] = p->par.diameter;
      aj["area"] = p->par.area;
      aj["lambda"] = p->par.lambda;
      aj["c"] = p->par.c;
      aj["rho0"] = p->par.rho0;
      if (p->roughness) aj["roughness"] = *p->roughness;
    } else if (const auto* c = std::get_if<CompressorArc>(&a.variant)) {
      if (!c->field_id.empty()) aj["field"] = c->field_id;
      aj["on"] = schedule_json(c->on);
      aj["bypass"] = c->bypass;
      aj["eta_ad"] = c->eta_ad;
    } else if (const auto* v = std::get_if<ValveArc>(&a.variant)) {
      aj["open"] = schedule_json(v->open);
    }
    arcs.push_back(aj);
  }
  j["arcs"] = arcs;
  return j.dump(2) + "\n";
}

bool same_structure(const NetworkSpec& a, const NetworkSpec& b) {
  if (!same_gas(a.gas, b.gas) || a.nodes != b.nodes || a.fields != b.fields) return false;
  if (a.arcs.size() != b.arcs.size()) return false;
  for (std::size_t i = 0; i < a.arcs.size(); ++i) {
    const Arc& x = a.arcs[i];
    const Arc& y = b.arcs[i];
    if (x.id != y.id || x.tail != y.tail || x.head != y.head || !same_variant(x.variant, y.variant)) {
      return false;
    }
  }
  return true;
}

CharacteristicField parse_field(const std::filesystem::path& path) {
  return parse_field_string(read_file(path), path.stem().string());
}

CharacteristicField parse_field_string(const std::string& textual, const std::string& id) {
  return field_from_json(read_json(textual, "field"), id, "field");
}

// ---------------------------------------------------------------- scenario

namespace {

ModelLevel level_from(const std::string& s, const std::string& where) {
  if (s == "M1" || s == "m1") return ModelLevel::M1;
  if (s == "M2" || s == "m2") return ModelLevel::M2;
  if (s == "M3" || s == "m3") return ModelLevel::M3;
  bad(where, "model level must be M1, M2 or M3");
}

const Node* find_node(const NetworkSpec& net, const std::string& id) {
  for (const auto& n : net.nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const Arc* find_arc(const NetworkSpec& net, const std::string& id) {
  for (const auto& a : net.arcs) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

BoundarySpec boundary_from_json(const json& j, double horizon, const std::string& where) {
  BoundarySpec b;
  const std::string kind = text(j.at("kind"), where + ".kind");
  if (kind == "pressure") b.kind = NodeCondition::Kind::prescribed_pressure;
  else if (kind == "flow") b.kind = NodeCondition::Kind::prescribed_flow;
  else bad(where + ".kind", "boundary kind must be 'pressure' or 'flow'");
  if (j.contains("hold_initial")) b.hold_initial = j.at("hold_initial").get<bool>();
  if (j.contains("profile")) {
    b.profile = covering_series(j.at("profile"), b.kind == NodeCondition::Kind::prescribed_pressure
                                                     ? Dim::pressure : Dim::flow,
                                horizon, where + ".profile");
  }
  if (b.profile && b.hold_initial) bad(where, "profile and hold_initial are exclusive");
  if (!b.profile && !b.hold_initial) bad(where, "boundary needs a profile or hold_initial");
  return b;
}

FunctionalTerm term_from_json(const json& j, double horizon, const std::string& where) {
  FunctionalTerm t;
  t.id = text(j.at("id"), where + ".id");
  const std::string kind = text(j.at("kind"), where + ".kind");
  if (kind == "constant") t.kind = Integrand::constant;
  else if (kind == "pressure_tracking") t.kind = Integrand::pressure_tracking;
  else if (kind == "flow_tracking") t.kind = Integrand::flow_tracking;
  else if (kind == "compressor_energy") t.kind = Integrand::compressor_energy;
  else bad(where + ".kind", "unknown integrand '" + kind + "'");
  if (j.contains("weight")) t.weight = number(j.at("weight"), where + ".weight");
  if (j.contains("target")) {
    t.target = covering_series(j.at("target"),
                               t.kind == Integrand::pressure_tracking ? Dim::pressure : Dim::flow,
                               horizon, where + ".target");
  }
  return t;
}

NodeBound node_bound_from_json(const json& j, Dim dim, double horizon, const std::string& where) {
  NodeBound b;
  b.node = text(j.at("node"), where + ".node");
  if (j.contains("lower")) b.lower = covering_series(j.at("lower"), dim, horizon, where + ".lower");
  if (j.contains("upper")) b.upper = covering_series(j.at("upper"), dim, horizon, where + ".upper");
  if (j.contains("t0")) b.t0 = quantity(j.at("t0"), Dim::time, where + ".t0");
  if (j.contains("t1")) b.t1 = quantity(j.at("t1"), Dim::time, where + ".t1");
  if (b.t0 < 0.0 || (b.t1 < 1e299 && b.t1 > horizon + 1e-6) || b.t1 < b.t0) {
    bad(where, "time window outside [0, horizon]");
  }
  return b;
}

}  // namespace

ScenarioSpec parse_scenario_string(const std::string& textual, const NetworkSpec& network) {
  const json j = read_json(textual, "scenario");
  const std::string where = "scenario";
  check_schema(j, "gasgrid-scenario/1", where);
  ScenarioSpec s;
  if (!j.contains("horizon")) bad(where, "missing horizon");
  s.horizon = quantity(j.at("horizon"), Dim::time, where + ".horizon");
  if (!(s.horizon > 0.0)) bad(where + ".horizon", "must be positive");
  if (j.contains("tol")) {
    s.tol = number(j.at("tol"), where + ".tol");
    s.tol_defaulted = false;
    if (!(s.tol > 0.0)) bad(where + ".tol", "must be positive");
  } else {
    s.log.push_back("tol not given; default 5e-3 applied");
  }
  auto nodes_map = [&](const char* key, std::map<std::string, BoundarySpec>& out) {
    if (!j.contains(key)) return;
    for (auto it = j.at(key).begin(); it != j.at(key).end(); ++it) {
      const std::string w = where + "." + key + "." + it.key();
      const Node* n = find_node(network, it.key());
      if (!n) bad(w, "unknown node '" + it.key() + "'");
      if (n->kind == NodeKind::interior) bad(w, "interior node '" + it.key() + "' cannot carry a boundary");
      out[it.key()] = boundary_from_json(it.value(), s.horizon, w);
    }
  };
  nodes_map("boundaries", s.boundaries);
  nodes_map("initial_nomination", s.initial_nomination);
  for (const auto& [id, b] : s.initial_nomination) {
    if (b.hold_initial) bad(where + ".initial_nomination." + id, "hold_initial needs a transient phase");
  }
  for (const auto& n : network.nodes) {
    if (n.kind == NodeKind::interior) continue;
    if (!n.boundary && !s.boundaries.count(n.id)) {
      bad(where + ".boundaries", std::string(to_string(n.kind)) + " node '" + n.id +
                                     "' has no boundary condition");
    }
    const auto it = s.boundaries.find(n.id);
    if (it != s.boundaries.end() && it->second.hold_initial && !n.boundary &&
        !s.initial_nomination.count(n.id)) {
      bad(where + ".initial_nomination", "node '" + n.id + "' holds its initial value but has no initial nomination");
    }
  }
  if (j.contains("valves")) {
    for (auto it = j.at("valves").begin(); it != j.at("valves").end(); ++it) {
      const std::string w = where + ".valves." + it.key();
      const Arc* a = find_arc(network, it.key());
      if (!a || !std::holds_alternative<ValveArc>(a->variant)) bad(w, "'" + it.key() + "' is not a valve");
      s.valves[it.key()] = schedule(it.value(), w);
    }
  }
  if (j.contains("compressors")) {
    for (auto it = j.at("compressors").begin(); it != j.at("compressors").end(); ++it) {
      const std::string w = where + ".compressors." + it.key();
      const Arc* a = find_arc(network, it.key());
      if (!a || !a->is_compressor()) bad(w, "'" + it.key() + "' is not a compressor station");
      const json& cj = it.value();
      CompressorSetting c;
      if (cj.contains("on")) c.on = schedule(cj.at("on"), w + ".on");
      if (cj.contains("eta")) c.eta = number(cj.at("eta"), w + ".eta");
      if (cj.contains("bypass")) c.bypass = cj.at("bypass").get<bool>();
      if (cj.contains("head")) c.head = covering_series(cj.at("head"), Dim::head, s.horizon, w + ".head");
      if (cj.contains("lower")) c.lower = quantity(cj.at("lower"), Dim::head, w + ".lower");
      if (cj.contains("upper")) c.upper = quantity(cj.at("upper"), Dim::head, w + ".upper");
      if (cj.contains("scale")) c.scale = quantity(cj.at("scale"), Dim::head, w + ".scale");
      s.compressors[it.key()] = c;
    }
  }
  if (j.contains("control_valves")) {
    for (auto it = j.at("control_valves").begin(); it != j.at("control_valves").end(); ++it) {
      const std::string w = where + ".control_valves." + it.key();
      const Arc* a = find_arc(network, it.key());
      if (!a || !a->is_control_valve()) bad(w, "'" + it.key() + "' is not a control valve");
      const json& cj = it.value();
      ControlValveSetting c;
      if (!cj.contains("drop")) bad(w, "missing drop");
      c.drop = covering_series(cj.at("drop"), Dim::pressure, s.horizon, w + ".drop");
      if (cj.contains("lower")) c.lower = quantity(cj.at("lower"), Dim::pressure, w + ".lower");
      if (cj.contains("upper")) c.upper = quantity(cj.at("upper"), Dim::pressure, w + ".upper");
      if (cj.contains("scale")) c.scale = quantity(cj.at("scale"), Dim::pressure, w + ".scale");
      s.control_valves[it.key()] = c;
    }
  }
  for (const auto& a : network.arcs) {
    if (a.is_control_valve() && !s.control_valves.count(a.id)) {
      bad(where + ".control_valves", "control valve '" + a.id + "' has no drop");
    }
    if (a.is_compressor() && (!s.compressors.count(a.id) || !s.compressors.at(a.id).head)) {
      bad(where + ".compressors", "compressor '" + a.id + "' has no head");
    }
  }
  if (j.contains("control_interval")) {
    s.control_interval = quantity(j.at("control_interval"), Dim::time, where + ".control_interval");
  } else {
    s.log.push_back("control_interval not given; default 1800 s applied");
  }

  if (j.contains("functional")) {
    const json& fj = j.at("functional");
    auto terms = [&](const char* key, std::vector<FunctionalTerm>& out) {
      if (!fj.contains(key)) return;
      std::size_t k = 0;
      for (const auto& tj : fj.at(key)) {
        out.push_back(term_from_json(tj, s.horizon, where + ".functional." + key + "[" +
                                                        std::to_string(k++) + "]"));
      }
    };
    terms("pipe_terms", s.functional.pipe_terms);
    terms("node_terms", s.functional.node_terms);
    terms("arc_terms", s.functional.arc_terms);
  }
  if (j.contains("constraints")) {
    const json& cj = j.at("constraints");
    const std::string w = where + ".constraints";
    std::size_t k = 0;
    if (cj.contains("pressure")) {
      for (const auto& b : cj.at("pressure")) {
        s.constraints.pressure.push_back(node_bound_from_json(
            b, Dim::pressure, s.horizon, w + ".pressure[" + std::to_string(k++) + "]"));
      }
    }
    k = 0;
    if (cj.contains("flow")) {
      for (const auto& b : cj.at("flow")) {
        s.constraints.flow.push_back(
            node_bound_from_json(b, Dim::flow, s.horizon, w + ".flow[" + std::to_string(k++) + "]"));
      }
    }
    if (cj.contains("compressors")) {
      for (const auto& id : cj.at("compressors")) s.constraints.compressors.push_back(text(id, w + ".compressors"));
    }
    if (cj.contains("terminal")) {
      TerminalStationarity t;
      const json& tj = cj.at("terminal");
      if (tj.contains("window")) t.window = quantity(tj.at("window"), Dim::time, w + ".terminal.window");
      if (tj.contains("tol")) t.tol = number(tj.at("tol"), w + ".terminal.tol");
      s.constraints.terminal = t;
    }
    if (cj.contains("field_levels")) {
      s.constraints.field_levels = cj.at("field_levels").get<std::size_t>();
    }
  }
  for (const auto& b : s.constraints.pressure) {
    if (!find_node(network, b.node)) bad(where + ".constraints", "unknown node '" + b.node + "'");
  }
  for (const auto& b : s.constraints.flow) {
    if (!find_node(network, b.node)) bad(where + ".constraints", "unknown node '" + b.node + "'");
  }
  for (const auto& id : s.constraints.compressors) {
    const Arc* a = find_arc(network, id);
    if (!a || !a->is_compressor()) bad(where + ".constraints", "'" + id + "' is not a compressor station");
  }
  std::set<std::string> ids;
  for (const auto& n : network.nodes) ids.insert(n.id);
  for (const auto& a : network.arcs) ids.insert(a.id);
  for (const auto* list : {&s.functional.pipe_terms, &s.functional.node_terms, &s.functional.arc_terms}) {
    for (const auto& t : *list) {
      if (!ids.count(t.id)) bad(where + ".functional", "unknown id '" + t.id + "'");
    }
  }

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    auto opt = [&](const char* key, double& v) {
      if (o.contains(key)) v = number(o.at(key), where + ".optimizer." + key);
    };
    opt("epsx", s.optimizer.epsx);
    opt("opt_tol", s.optimizer.opt_tol);
    opt("feas_tol", s.optimizer.feas_tol);
    opt("act_band", s.optimizer.act_band);
    opt("grad_band", s.optimizer.grad_band);
    if (o.contains("max_iter")) s.optimizer.max_iter = o.at("max_iter").get<int>();
  }
  s.adaptivity.horizon = s.horizon;
  s.adaptivity.tol = s.tol;
  if (j.contains("adaptivity")) {
    const json& a = j.at("adaptivity");
    const std::string w = where + ".adaptivity";
    if (a.contains("block_length")) s.adaptivity.block_length = quantity(a.at("block_length"), Dim::time, w);
    if (a.contains("dt0")) s.adaptivity.dt0 = quantity(a.at("dt0"), Dim::time, w);
    if (a.contains("dx_max")) s.adaptivity.dx_max = quantity(a.at("dx_max"), Dim::length, w);
    if (a.contains("max_dt_halvings")) s.adaptivity.max_dt_halvings = a.at("max_dt_halvings").get<std::size_t>();
    if (a.contains("max_dx_halvings")) s.adaptivity.max_dx_halvings = a.at("max_dx_halvings").get<std::size_t>();
    if (a.contains("initial_level")) {
      s.adaptivity.initial_level = level_from(text(a.at("initial_level"), w), w + ".initial_level");
    }
    if (a.contains("steady_initial")) s.adaptivity.steady_initial = a.at("steady_initial").get<bool>();
    if (a.contains("functional_scale")) s.adaptivity.functional_scale = number(a.at("functional_scale"), w);
    if (a.contains("theta_coarsen")) s.adaptivity.adapt.theta_coarsen = number(a.at("theta_coarsen"), w);
    if (a.contains("redo_max")) s.adaptivity.adapt.redo_max = a.at("redo_max").get<int>();
  }
  return s;
}

ScenarioSpec parse_scenario(const std::filesystem::path& path, const NetworkSpec& network) {
  return parse_scenario_string(read_file(path), network);
}

NetworkSpec apply_scenario(const NetworkSpec& network, const ScenarioSpec& scenario,
                           ScenarioPhase phase, const DiscreteState* initial_state) {
  NetworkSpec out = network;
  for (std::size_t v = 0; v < out.nodes.size(); ++v) {
    Node& n = out.nodes[v];
    if (n.kind == NodeKind::interior) continue;
    if (phase == ScenarioPhase::initial) {
      const BoundarySpec* b = nullptr;
      if (auto it = scenario.initial_nomination.find(n.id); it != scenario.initial_nomination.end()) {
        b = &it->second;
      } else if (auto jt = scenario.boundaries.find(n.id);
                 jt != scenario.boundaries.end() && !jt->second.hold_initial) {
        b = &jt->second;
      }
      if (b) {
        n.boundary = NodeCondition{b->kind, TimeSeries::constant((*b->profile)(0.0))};
      } else if (n.boundary) {
        n.boundary->profile = TimeSeries::constant(n.boundary->profile(0.0));
      } else {
        throw Error(ErrorCode::invalid_argument, "node '" + n.id + "' has no initial boundary");
      }
      continue;
    }
    const auto it = scenario.boundaries.find(n.id);
    if (it == scenario.boundaries.end()) continue;
    const BoundarySpec& b = it->second;
    if (b.hold_initial) {
      if (!initial_state) {
        throw Error(ErrorCode::invalid_argument,
                    "node '" + n.id + "' holds its initial value; an initial state is required");
      }
      const double value = b.kind == NodeCondition::Kind::prescribed_pressure
                               ? initial_state->node_pressure(v)
                               : initial_state->node_flow(v);
      n.boundary = NodeCondition{b.kind, TimeSeries::constant(value)};
    } else {
      n.boundary = NodeCondition{b.kind, *b.profile};
    }
  }
  for (auto& a : out.arcs) {
    if (auto* v = std::get_if<ValveArc>(&a.variant)) {
      if (auto it = scenario.valves.find(a.id); it != scenario.valves.end()) v->open = it->second;
    }
    if (auto* c = std::get_if<CompressorArc>(&a.variant)) {
      if (auto it = scenario.compressors.find(a.id); it != scenario.compressors.end()) {
        if (it->second.on) c->on = *it->second.on;
        if (it->second.eta) c->eta_ad = *it->second.eta;
        if (it->second.bypass) c->bypass = *it->second.bypass;
      }
    }
  }
  return out;
}

ControlVector scenario_controls(const Network& network, const ScenarioSpec& scenario) {
  ControlVector c;
  for (std::size_t a = 0; a < network.arc_count(); ++a) {
    const Arc& arc = network.arc(a);
    ControlSeries s;
    s.arc = a;
    if (arc.is_compressor()) {
      const auto it = scenario.compressors.find(arc.id);
      if (it == scenario.compressors.end() || !it->second.head) {
        throw Error(ErrorCode::invalid_argument, "compressor '" + arc.id + "' has no head");
      }
      s.kind = ControlKind::compressor_head;
      s.series = *it->second.head;
      s.lower = it->second.lower;
      s.upper = it->second.upper;
      s.scale = it->second.scale.value_or(kHeadScale);
    } else if (arc.is_control_valve()) {
      const auto it = scenario.control_valves.find(arc.id);
      if (it == scenario.control_valves.end()) {
        throw Error(ErrorCode::invalid_argument, "control valve '" + arc.id + "' has no drop");
      }
      s.kind = ControlKind::valve_drop;
      s.series = it->second.drop;
      s.lower = it->second.lower;
      s.upper = it->second.upper;
      s.scale = it->second.scale.value_or(kPressureScale);
    } else {
      continue;
    }
    c.add(std::move(s));
  }
  if (c.size() == 0) return c;
  return scenario.control_interval > 0.0 ? c.resampled(scenario.horizon, scenario.control_interval)
                                         : c;
}

PreparedRun prepare_run(const NetworkSpec& network, const ScenarioSpec& scenario, double dx_max) {
  const Network initial_net = build_network(apply_scenario(network, scenario, ScenarioPhase::initial));
  const ControlVector initial_controls = scenario_controls(initial_net, scenario);
  const auto asg = ModelAssignment::uniform(initial_net, scenario.horizon, scenario.horizon,
                                            scenario.horizon, ModelLevel::M1, dx_max);
  const auto layout = std::make_shared<const SystemLayout>(initial_net, asg.blocks[0].pipes);
  DiscreteState state = steady_state(initial_net, layout, initial_controls);
  Network net = build_network(apply_scenario(network, scenario, ScenarioPhase::transient, &state));
  ControlVector controls = scenario_controls(net, scenario);
  return {std::move(net), std::move(controls), std::move(state)};
}

// ---------------------------------------------------------------- results

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

json adaptive_json(const AdaptiveReport& r) {
  json blocks = json::array();
  for (const auto& b : r.blocks) {
    blocks.push_back({{"block", b.block},
                      {"t0", b.t0},
                      {"t1", b.t1},
                      {"attempts", b.attempts},
                      {"dt", b.dt},
                      {"dx_min", b.dx_min},
                      {"dx_max", b.dx_max},
                      {"model_share", b.model_share},
                      {"eta_model", b.eta_model},
                      {"eta_dx", b.eta_dx},
                      {"eta_dt", b.eta_dt},
                      {"budget", b.budget},
                      {"functional", b.functional},
                      {"budget_met", b.budget_met}});
  }
  return {{"tol", r.tol},
          {"functional", r.functional},
          {"dt_min", r.dt_min},
          {"dt_max", r.dt_max},
          {"dx_min", r.dx_min},
          {"dx_max", r.dx_max},
          {"model_usage", r.model_usage},
          {"wall_seconds", r.wall_seconds},
          {"cpu_seconds", r.cpu_seconds},
          {"budget_unreachable", r.budget_unreachable},
          {"blocks", blocks}};
}

json optimizer_json(const NLPResult& r) {
  json hist = json::array();
  for (const auto& h : r.history) {
    hist.push_back({{"k", h.k},
                    {"f", h.f},
                    {"merit_before", h.merit_before},
                    {"merit_after", h.merit_after},
                    {"penalty", h.penalty},
                    {"step_norm", h.step_norm},
                    {"kkt", h.kkt},
                    {"violation", h.violation},
                    {"alpha", h.alpha},
                    {"working_set", h.working_set}});
  }
  return {{"status", to_string(r.status)},
          {"iterations", r.iterations},
          {"objective", r.objective},
          {"max_violation", r.max_violation},
          {"kkt", r.kkt},
          {"message", r.message},
          {"history", hist}};
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorCode::io_error, "write failed for '" + path.string() + "'");
}

// Output rows: accepted steps, or a uniform grid with linear interpolation.
struct Sample {
  double t;
  std::size_t n0, n1;
  double w1;
};

std::vector<Sample> samples(const Trajectory& traj, double resample) {
  std::vector<Sample> out;
  if (resample <= 0.0 || traj.size() < 2) {
    for (std::size_t n = 0; n < traj.size(); ++n) out.push_back({traj.steps[n].t, n, n, 0.0});
    return out;
  }
  const double t0 = traj.steps.front().t, t1 = traj.steps.back().t;
  std::size_t n = 1;
  const auto count = static_cast<std::size_t>(std::floor((t1 - t0) / resample + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) {
    const double t = std::min(t1, t0 + static_cast<double>(k) * resample);
    while (n + 1 < traj.size() && traj.steps[n].t < t) ++n;
    const double ta = traj.steps[n - 1].t, tb = traj.steps[n].t;
    const double w = tb > ta ? std::clamp((t - ta) / (tb - ta), 0.0, 1.0) : 1.0;
    out.push_back({t, n - 1, n, w});
  }
  return out;
}

}  // namespace

std::string summary_json(const RunSummary& summary) {
  json j;
  j["schema"] = kSummarySchema;
  j["command"] = summary.command;
  j["status"] = summary.status;
  j["exit_code"] = summary.exit_code;
  if (summary.functional) j["functional"] = *summary.functional;
  j["tol"] = summary.tol;
  j["wall_seconds"] = summary.wall_seconds;
  j["cpu_seconds"] = summary.cpu_seconds;
  j["settings"] = summary.settings;
  if (summary.adaptivity) j["adaptivity"] = adaptive_json(*summary.adaptivity);
  if (summary.optimizer) j["optimizer"] = optimizer_json(*summary.optimizer);
  if (summary.terminal_stationarity) j["terminal_stationarity"] = *summary.terminal_stationarity;
  if (summary.max_relative_error) j["max_relative_error"] = *summary.max_relative_error;
  return j.dump(2) + "\n";
}

void write_results(const Network& network, const Trajectory& traj, const RunSummary& summary,
                   const std::filesystem::path& out_dir, const OutputOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "nodes", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "arcs", ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create '" + out_dir.string() + "': " + ec.message());

  const auto rows = samples(traj, opts.resample);
  auto lerp = [&](const Sample& s, auto&& get) {
    const double a = get(s.n0);
    return s.w1 == 0.0 ? a : (1.0 - s.w1) * a + s.w1 * get(s.n1);
  };
  for (std::size_t v = 0; v < network.node_count(); ++v) {
    std::string csv = "t[s],p[Pa],q[m3/s]\n";
    for (const auto& s : rows) {
      const double p = lerp(s, [&](std::size_t n) { return traj.state(n).node_pressure(v); });
      const double q = lerp(s, [&](std::size_t n) { return traj.state(n).node_flow(v); });
      csv += fmt(s.t) + "," + fmt(p) + "," + fmt(q) + "\n";
    }
    write_text(out_dir / "nodes" / (network.node(v).id + ".csv"), csv);
  }
  for (std::size_t a = 0; a < network.arc_count(); ++a) {
    const bool controlled = traj.controls.find(a) != nullptr;
    std::string csv = "t[s],p_in[Pa],q_in[m3/s],p_out[Pa],q_out[m3/s]";
    if (controlled) {
      csv += network.arc(a).is_compressor() ? ",h_ad[m2/s2]" : ",dp[Pa]";
    }
    csv += "\n";
    for (const auto& s : rows) {
      auto tail = [&](std::size_t n) { return traj.state(n).tail_state(a); };
      auto head = [&](std::size_t n) { return traj.state(n).head_state(a); };
      csv += fmt(s.t) + "," + fmt(lerp(s, [&](std::size_t n) { return tail(n).p; })) + "," +
             fmt(lerp(s, [&](std::size_t n) { return tail(n).q; })) + "," +
             fmt(lerp(s, [&](std::size_t n) { return head(n).p; })) + "," +
             fmt(lerp(s, [&](std::size_t n) { return head(n).q; }));
      if (controlled) csv += "," + fmt(*traj.controls.value(a, s.t));
      csv += "\n";
    }
    write_text(out_dir / "arcs" / (network.arc(a).id + ".csv"), csv);
  }
  if (summary.adaptivity) {
    std::string csv =
        "block,t0[s],t1[s],attempts,dt[s],dx_min[m],dx_max[m],m1[%],m2[%],m3[%],eta_model,eta_dx,"
        "eta_dt,budget,functional,budget_met\n";
    for (const auto& b : summary.adaptivity->blocks) {
      csv += std::to_string(b.block) + "," + fmt(b.t0) + "," + fmt(b.t1) + "," +
             std::to_string(b.attempts) + "," + fmt(b.dt) + "," + fmt(b.dx_min) + "," +
             fmt(b.dx_max) + "," + fmt(100.0 * b.model_share[0]) + "," +
             fmt(100.0 * b.model_share[1]) + "," + fmt(100.0 * b.model_share[2]) + "," +
             fmt(b.eta_model) + "," + fmt(b.eta_dx) + "," + fmt(b.eta_dt) + "," + fmt(b.budget) +
             "," + fmt(b.functional) + "," + (b.budget_met ? "1" : "0") + "\n";
    }
    write_text(out_dir / "report.csv", csv);
  }
  write_text(out_dir / "summary.json", summary_json(summary));
}

}  // namespace gasgrid
