#pragma once

// JSON and CSV serialization of check results. Floating-point values are
// printed with 17 significant digits so reruns can be compared byte for byte.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "polebridge/bridge_sde.hpp"
#include "polebridge/errors.hpp"
#include "polebridge/identities.hpp"
#include "polebridge/stats.hpp"
#include "polebridge/verify.hpp"

namespace polebridge {

using Json = nlohmann::ordered_json;

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void dump_json(const Json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += std::string(",") + nl;
        first = false;
        out += pad + Json(k).dump() + (indent > 0 ? ": " : ":");
        dump_json(v, out, indent, depth + 1);
      }
      out += nl + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[";
      out += nl;
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += std::string(",") + nl;
        first = false;
        out += pad;
        dump_json(v, out, indent, depth + 1);
      }
      out += nl + close_pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_g17(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Serializes with %.17g floats; non-finite values become null.
inline std::string to_json_text(const Json& j, int indent = 2) {
  std::string out;
  detail::dump_json(j, out, indent, 0);
  return out;
}

inline Json grid_json(const GridMeta& g) {
  return Json{{"steps", g.steps}, {"eps_end", g.eps_end}, {"refinement", g.refinement}};
}

inline Json to_json(const McReport& r) {
  Json extras = Json::object();
  for (const auto& [k, v] : r.extras) extras[k] = v;
  return Json{{"label", r.label},
              {"lhs", r.estimate_lhs},
              {"rhs", r.estimate_rhs},
              {"se_lhs", r.se_lhs},
              {"se_rhs", r.se_rhs},
              {"se_diff", r.se_diff},
              {"z", r.z_score},
              {"paired", r.paired},
              {"n_paths", r.n_paths},
              {"n_failed", r.n_failed},
              {"steps", r.grid.steps},
              {"eps_end", r.grid.eps_end},
              {"refinement", r.grid.refinement},
              {"seed", r.seed},
              {"wall_time", r.wall_time},
              {"extras", extras}};
}

inline Json to_json(const DecayTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) rows.push_back(Json{{"t", r.t}, {"t_node", r.t_node}, {"m", r.m}, {"se", r.se}});
  return Json{{"label", t.label},     {"pinned", t.pinned},     {"rows", rows},
              {"margins", t.margins}, {"n_paths", t.n_paths},   {"n_failed", t.n_failed},
              {"grid", grid_json(t.grid)}, {"seed", t.seed},    {"wall_time", t.wall_time}};
}

inline Json to_json(const EquivReport& e) {
  Json rows = Json::array();
  for (const auto& r : e.rows)
    rows.push_back(Json{{"steps", r.steps},
                        {"mean_gap", r.mean_gap},
                        {"se_gap", r.se_gap},
                        {"mean_direct", r.mean_direct},
                        {"mean_lemma", r.mean_lemma}});
  return Json{{"label", e.label},       {"rows", rows},           {"monotone", e.monotone()},
              {"n_paths", e.n_paths},   {"n_failed", e.n_failed}, {"grid", grid_json(e.grid)},
              {"seed", e.seed},         {"wall_time", e.wall_time}};
}

inline Json to_json(const IdentityReport& rep) {
  Json worst = Json::object();
  for (const auto& r : rep.records) {
    auto& w = worst[r.check];
    if (w.is_null() || r.rel_err > w["rel_err"].get<double>())
      w = Json{{"rel_err", r.rel_err}, {"tolerance", r.tolerance}, {"tau", r.tau}, {"r", r.r}};
  }
  Json audits = Json::array();
  for (const auto& a : rep.audits)
    audits.push_back(Json{{"name", a.name},
                          {"min", a.min_value},
                          {"max", a.max_value},
                          {"r_at_min", a.r_at_min},
                          {"r_at_max", a.r_at_max}});
  return Json{{"geometry", rep.geometry},
              {"records", rep.records.size()},
              {"failures", rep.failures()},
              {"worst", worst},
              {"audits", audits}};
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string reports_csv(const std::vector<McReport>& reports) {
  std::ostringstream os;
  os << "label,lhs,rhs,se_lhs,se_rhs,se_diff,z,n_paths,n_failed,steps,eps_end,seed\n";
  for (const auto& r : reports)
    os << csv_field(r.label) << ',' << format_g17(r.estimate_lhs) << ',' << format_g17(r.estimate_rhs) << ','
       << format_g17(r.se_lhs) << ',' << format_g17(r.se_rhs) << ',' << format_g17(r.se_diff) << ','
       << format_g17(r.z_score) << ',' << r.n_paths << ',' << r.n_failed << ',' << r.grid.steps << ','
       << format_g17(r.grid.eps_end) << ',' << r.seed << '\n';
  return os.str();
}

inline std::string decay_csv(const std::vector<DecayTable>& tables) {
  std::ostringstream os;
  os << "label,t,t_node,m,se\n";
  for (const auto& t : tables)
    for (const auto& r : t.rows)
      os << csv_field(t.label) << ',' << format_g17(r.t) << ',' << format_g17(r.t_node) << ',' << format_g17(r.m)
         << ',' << format_g17(r.se) << '\n';
  return os.str();
}

inline std::string equiv_csv(const std::vector<EquivReport>& reports) {
  std::ostringstream os;
  os << "label,steps,mean_gap,se_gap,mean_direct,mean_lemma\n";
  for (const auto& e : reports)
    for (const auto& r : e.rows)
      os << csv_field(e.label) << ',' << r.steps << ',' << format_g17(r.mean_gap) << ',' << format_g17(r.se_gap)
         << ',' << format_g17(r.mean_direct) << ',' << format_g17(r.mean_lemma) << '\n';
  return os.str();
}

inline std::string identity_csv(const std::vector<IdentityRecord>& records) {
  std::ostringstream os;
  os << "check,tau,r,value,reference,rel_err,tolerance,pass\n";
  for (const auto& r : records)
    os << csv_field(r.check) << ',' << format_g17(r.tau) << ',' << format_g17(r.r) << ',' << format_g17(r.value)
       << ',' << format_g17(r.reference) << ',' << format_g17(r.rel_err) << ',' << format_g17(r.tolerance) << ','
       << (r.pass ? 1 : 0) << '\n';
  return os.str();
}

/// One row per (path, node): path, t, x_1..x_n, r, and frame entries u_ij if requested.
template <int N>
void append_path_dump(std::ostringstream& os, std::size_t path_index, const FramePathSample<N>& path, bool frames) {
  const int n = static_cast<int>(path.dim());
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    const auto& st = path.states[k];
    os << path_index << ',' << format_g17(path.grid[k]);
    for (int i = 0; i < n; ++i) os << ',' << format_g17(st.point(i));
    os << ',' << format_g17(st.point.norm());
    if (frames)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) os << ',' << format_g17(st.frame(i, j));
    os << '\n';
  }
}

inline std::string path_dump_header(int dim, bool frames) {
  std::string h = "path,t";
  for (int i = 1; i <= dim; ++i) h += ",x_" + std::to_string(i);
  h += ",r";
  if (frames)
    for (int i = 1; i <= dim; ++i)
      for (int j = 1; j <= dim; ++j) h += ",u_" + std::to_string(i) + "_" + std::to_string(j);
  return h + "\n";
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open output file '" + path + "'");
  f << text;
  if (!f) throw InputError("failed writing output file '" + path + "'");
}

}  // namespace polebridge
