#pragma once

// JSON run configuration. parse_config validates everything up front and
// reports every problem it finds, not just the first.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "polebridge/errors.hpp"
#include "polebridge/geometry.hpp"
#include "polebridge/pathspace.hpp"
#include "polebridge/time_grid.hpp"

namespace polebridge {

inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"ibp",        "girsanov", "radial", "decay",
                                              "identities", "equiv",    "simulate"};
  return names;
}

struct GeometryConfig {
  std::string kind = "euclidean";
  int dim = 2;
  double c = 1.0;
  double a = 0.0;
  std::string profile = "cubic";

  GeometryModel build() const {
    if (kind == "euclidean") return GeometryModel::euclidean(dim, a);
    if (kind == "hyperbolic") return GeometryModel::hyperbolic(dim, c, a);
    return GeometryModel::warped(dim, profile, a);
  }
};

struct SimulationConfig {
  std::size_t steps = 2000;
  double eps_end = 1e-4;
  std::string refinement = "geometric";
  double ratio = 0.9;
  std::size_t paths = 10000;
  std::uint64_t seed = 1;
  double r0 = 1.0;
  std::vector<double> x0;  // overrides r0 when present

  TimeGrid grid() const {
    return make_time_grid(steps, eps_end, refinement == "uniform" ? Refinement::uniform() : Refinement::geometric(ratio));
  }
};

struct IbpCaseConfig {
  std::string F = "one";
  std::string G = "one";
  std::string h = "sine(1,1)";
  std::string label;
};

struct ExperimentConfig {
  std::string check;
  double z_threshold = 3.0;
  // ibp
  std::vector<IbpCaseConfig> cases{IbpCaseConfig{}};
  int max_marginal = 1;  // cases allowed with |z| in (2, z_threshold]
  // girsanov
  double t = 0.5;
  std::vector<std::string> functionals{"one", "dist2(0.5)"};
  // radial
  std::vector<double> slices{0.25, 0.5, 0.75};
  // decay / equiv
  std::string h = "sine(1,1)";
  std::vector<double> ts{0.9, 0.99, 0.999};
  std::vector<std::string> controls;
  int halvings = 3;
  // identities
  std::size_t points = 50;
  double r_min = 0.1;
  double r_max = 4.0;
  std::vector<double> taus{0.1, 0.5, 1.0};
  // simulate
  std::string path_kind = "bridge";
  bool frames = false;
};

struct OutputConfig {
  std::string json;
  std::string csv;
  std::string path_dump;
};

struct RunConfig {
  GeometryConfig geometry;
  SimulationConfig simulation;
  ExperimentConfig experiment;
  OutputConfig output;
};

namespace detail {

using nlohmann::json;

class ConfigReader {
 public:
  std::vector<std::string> errors;

  void allow_only(const json& obj, const std::string& where, const std::set<std::string>& keys) {
    for (const auto& [k, v] : obj.items())
      if (!keys.contains(k)) {
        std::string list;
        for (const auto& key : keys) list += (list.empty() ? "" : ", ") + key;
        errors.push_back("unknown key '" + where + "." + k + "' (allowed: " + list + ")");
      }
  }

  template <class T>
  void read(const json& obj, const std::string& where, const char* key, T& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<long long>() < 0) throw std::invalid_argument("expected a nonnegative integer");
        }
        out = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
        out = v.get<std::string>();
      } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!v.is_array()) throw std::invalid_argument("expected an array of numbers");
        out.clear();
        for (const auto& e : v) {
          if (!e.is_number()) throw std::invalid_argument("expected an array of numbers");
          out.push_back(e.get<double>());
        }
      } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
        if (!v.is_array()) throw std::invalid_argument("expected an array of strings");
        out.clear();
        for (const auto& e : v) {
          if (!e.is_string()) throw std::invalid_argument("expected an array of strings");
          out.push_back(e.get<std::string>());
        }
      }
    } catch (const std::exception& e) {
      errors.push_back(where + "." + key + ": " + e.what());
    }
  }

  const json* block(const json& root, const char* key) {
    if (!root.contains(key)) return nullptr;
    if (!root.at(key).is_object()) {
      errors.push_back(std::string("'") + key + "' must be an object");
      return nullptr;
    }
    return &root.at(key);
  }

  void require(bool ok, std::string message) {
    if (!ok) errors.push_back(std::move(message));
  }

  // Runs a registry parse and records its message on failure.
  template <class Fn>
  void registry(const std::string& where, Fn&& fn) {
    try {
      fn();
    } catch (const InputError& e) {
      errors.push_back(where + ": " + e.what());
    }
  }
};

}  // namespace detail

/// Parses and validates a configuration. Throws ConfigError with every problem found.
/// `default_check` fills experiment.check when the file leaves it out.
inline RunConfig parse_config(const std::string& text, const std::string& default_check = "") {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  if (!root.is_object()) throw ConfigError({"configuration must be a JSON object"});

  detail::ConfigReader rd;
  RunConfig cfg;
  rd.allow_only(root, "", {"geometry", "simulation", "experiment", "output"});

  if (const auto* g = rd.block(root, "geometry")) {
    rd.allow_only(*g, "geometry", {"kind", "dim", "c", "a", "profile"});
    rd.read(*g, "geometry", "kind", cfg.geometry.kind);
    rd.read(*g, "geometry", "dim", cfg.geometry.dim);
    rd.read(*g, "geometry", "c", cfg.geometry.c);
    rd.read(*g, "geometry", "a", cfg.geometry.a);
    rd.read(*g, "geometry", "profile", cfg.geometry.profile);
  }
  auto& geo = cfg.geometry;
  rd.require(geo.kind == "euclidean" || geo.kind == "hyperbolic" || geo.kind == "warped",
             "geometry.kind must be one of euclidean, hyperbolic, warped");
  rd.require(geo.dim >= 1, "dimension must be ≥ 1");
  rd.require(geo.dim <= 64, "geometry.dim must be <= 64");
  rd.require(geo.c > 0.0 && std::isfinite(geo.c), "geometry.c must be > 0");
  rd.require(geo.a >= 0.0 && std::isfinite(geo.a), "geometry.a must be >= 0");
  if (geo.kind == "warped") {
    bool known = false;
    for (auto name : warped_profile_names()) known = known || name == geo.profile;
    rd.require(known, "geometry.profile '" + geo.profile + "' is not a built-in profile (flat, cubic, tapered)");
  }
  const int dim = std::max(geo.dim, 1);

  if (const auto* s = rd.block(root, "simulation")) {
    rd.allow_only(*s, "simulation", {"steps", "eps_end", "refinement", "ratio", "paths", "seed", "r0", "x0"});
    rd.read(*s, "simulation", "steps", cfg.simulation.steps);
    rd.read(*s, "simulation", "eps_end", cfg.simulation.eps_end);
    rd.read(*s, "simulation", "refinement", cfg.simulation.refinement);
    rd.read(*s, "simulation", "ratio", cfg.simulation.ratio);
    rd.read(*s, "simulation", "paths", cfg.simulation.paths);
    rd.read(*s, "simulation", "seed", cfg.simulation.seed);
    rd.read(*s, "simulation", "r0", cfg.simulation.r0);
    rd.read(*s, "simulation", "x0", cfg.simulation.x0);
  }
  auto& sim = cfg.simulation;
  rd.require(sim.steps >= 2, "simulation.steps must be >= 2");
  rd.require(sim.eps_end > 0.0 && sim.eps_end <= 0.5, "simulation.eps_end must lie in (0, 0.5]");
  rd.require(sim.refinement == "uniform" || sim.refinement == "geometric",
             "simulation.refinement must be 'uniform' or 'geometric'");
  rd.require(sim.ratio > 0.0 && sim.ratio < 1.0, "simulation.ratio must lie in (0, 1)");
  rd.require(sim.paths >= 2, "simulation.paths must be >= 2");
  rd.require(sim.r0 > 0.0 && std::isfinite(sim.r0), "simulation.r0 must be > 0");
  if (!sim.x0.empty()) {
    rd.require(static_cast<int>(sim.x0.size()) == geo.dim, "simulation.x0 must have geometry.dim entries");
    double r2 = 0.0;
    for (double v : sim.x0) r2 += v * v;
    rd.require(r2 > 0.0 && std::isfinite(r2), "simulation.x0 must be finite and away from the pole");
  }
  const double t_last = 1.0 - sim.eps_end;

  auto& ex = cfg.experiment;
  ex.check = default_check;
  if (const auto* e = rd.block(root, "experiment")) {
    rd.allow_only(*e, "experiment",
                  {"check", "z_threshold", "cases", "F", "G", "h", "max_marginal", "t", "functionals", "slices",
                   "ts", "controls", "halvings", "points", "r_min", "r_max", "taus", "path_kind", "frames"});
    std::string file_check;
    rd.read(*e, "experiment", "check", file_check);
    if (!file_check.empty()) {
      if (!default_check.empty() && file_check != default_check)
        rd.errors.push_back("experiment.check is '" + file_check + "' but the command is '" + default_check + "'");
      ex.check = file_check;
    }
    rd.read(*e, "experiment", "z_threshold", ex.z_threshold);
    rd.read(*e, "experiment", "max_marginal", ex.max_marginal);
    if (e->contains("cases")) {
      if (!e->at("cases").is_array()) {
        rd.errors.push_back("experiment.cases must be an array");
      } else {
        ex.cases.clear();
        std::size_t i = 0;
        for (const auto& c : e->at("cases")) {
          const std::string where = "experiment.cases[" + std::to_string(i++) + "]";
          if (!c.is_object()) {
            rd.errors.push_back(where + " must be an object");
            continue;
          }
          rd.allow_only(c, where, {"F", "G", "h", "label"});
          IbpCaseConfig cc;
          rd.read(c, where, "F", cc.F);
          rd.read(c, where, "G", cc.G);
          rd.read(c, where, "h", cc.h);
          rd.read(c, where, "label", cc.label);
          ex.cases.push_back(cc);
        }
      }
    } else if (e->contains("F") || e->contains("G")) {
      ex.cases = {IbpCaseConfig{}};
      rd.read(*e, "experiment", "F", ex.cases[0].F);
      rd.read(*e, "experiment", "G", ex.cases[0].G);
      rd.read(*e, "experiment", "h", ex.cases[0].h);
    }
    rd.read(*e, "experiment", "h", ex.h);
    rd.read(*e, "experiment", "t", ex.t);
    rd.read(*e, "experiment", "functionals", ex.functionals);
    rd.read(*e, "experiment", "slices", ex.slices);
    rd.read(*e, "experiment", "ts", ex.ts);
    rd.read(*e, "experiment", "controls", ex.controls);
    rd.read(*e, "experiment", "halvings", ex.halvings);
    rd.read(*e, "experiment", "points", ex.points);
    rd.read(*e, "experiment", "r_min", ex.r_min);
    rd.read(*e, "experiment", "r_max", ex.r_max);
    rd.read(*e, "experiment", "taus", ex.taus);
    rd.read(*e, "experiment", "path_kind", ex.path_kind);
    rd.read(*e, "experiment", "frames", ex.frames);
  }
  if (ex.check.empty()) {
    rd.errors.push_back("experiment.check is missing (one of ibp, girsanov, radial, decay, identities, equiv, simulate)");
  } else if (std::find(check_names().begin(), check_names().end(), ex.check) == check_names().end()) {
    rd.errors.push_back("unknown check '" + ex.check +
                        "' (available: ibp, girsanov, radial, decay, identities, equiv, simulate)");
  }
  rd.require(ex.z_threshold > 0.0, "experiment.z_threshold must be > 0");
  rd.require(ex.max_marginal >= 0, "experiment.max_marginal must be >= 0");

  // registry keys and per-check ranges
  auto functional = [&](const std::string& where, const std::string& key) {
    rd.registry(where, [&] {
      const auto F = parse_functional(key, dim);
      if (!F.times().empty() && F.times().back() > t_last + 1e-12)
        throw InputError("time " + std::to_string(F.times().back()) + " exceeds 1 - eps_end");
    });
  };
  auto direction = [&](const std::string& where, const std::string& key, bool need_pinned) {
    rd.registry(where, [&] {
      const auto h = parse_direction(key, dim);
      if (need_pinned && !h.pinned()) throw InputError("direction '" + key + "' is not pinned (h(1) != 0)");
    });
  };
  if (ex.check == "ibp") {
    rd.require(!ex.cases.empty(), "experiment.cases must not be empty");
    for (std::size_t i = 0; i < ex.cases.size(); ++i) {
      const std::string where = "experiment.cases[" + std::to_string(i) + "]";
      functional(where + ".F", ex.cases[i].F);
      functional(where + ".G", ex.cases[i].G);
      direction(where + ".h", ex.cases[i].h, true);
    }
  } else if (ex.check == "girsanov") {
    rd.require(ex.t > 0.0 && ex.t <= t_last, "experiment.t must lie in (0, 1 - eps_end]");
    rd.require(!ex.functionals.empty(), "experiment.functionals must not be empty");
    for (const auto& f : ex.functionals) {
      functional("experiment.functionals", f);
      rd.registry("experiment.functionals", [&] {
        const auto F = parse_functional(f, dim);
        if (!F.times().empty() && F.times().back() > ex.t + 1e-12)
          throw InputError("'" + f + "' uses a time after experiment.t");
      });
    }
  } else if (ex.check == "radial") {
    rd.require(!ex.slices.empty(), "experiment.slices must not be empty");
    for (double t : ex.slices) rd.require(t > 0.0 && t <= t_last, "experiment.slices must lie in (0, 1 - eps_end]");
  } else if (ex.check == "decay") {
    direction("experiment.h", ex.h, false);
    for (const auto& c : ex.controls) direction("experiment.controls", c, false);
    rd.require(ex.ts.size() >= 2, "experiment.ts needs at least two times");
    for (double t : ex.ts) rd.require(t > 0.0 && t <= t_last, "experiment.ts must lie in (0, 1 - eps_end]");
    for (std::size_t i = 1; i < ex.ts.size(); ++i)
      rd.require(ex.ts[i] > ex.ts[i - 1], "experiment.ts must be increasing");
  } else if (ex.check == "equiv") {
    direction("experiment.h", ex.h, true);
    rd.require(ex.halvings >= 1 && ex.halvings <= 6, "experiment.halvings must lie in 1..6");
  } else if (ex.check == "identities") {
    rd.require(ex.points >= 1, "experiment.points must be >= 1");
    rd.require(ex.r_min >= 1e-3 && ex.r_max >= ex.r_min, "experiment.r_min/r_max must satisfy 1e-3 <= r_min <= r_max");
    rd.require(!ex.taus.empty(), "experiment.taus must not be empty");
    for (double tau : ex.taus) rd.require(tau > 2e-4 && std::isfinite(tau), "experiment.taus must be > 2e-4");
  } else if (ex.check == "simulate") {
    rd.require(ex.path_kind == "bridge" || ex.path_kind == "free", "experiment.path_kind must be 'bridge' or 'free'");
  }

  if (const auto* o = rd.block(root, "output")) {
    rd.allow_only(*o, "output", {"json", "csv", "path_dump"});
    rd.read(*o, "output", "json", cfg.output.json);
    rd.read(*o, "output", "csv", cfg.output.csv);
    rd.read(*o, "output", "path_dump", cfg.output.path_dump);
  }

  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  return cfg;
}

}  // namespace polebridge
