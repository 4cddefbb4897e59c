#include "fcop/config.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <set>

#include <fmt/format.h>

namespace fcop::app {
namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(fmt::format("{}: {}", path, what));
}

void allow_only(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) fail(path + "." + k, "unknown field");
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

std::int64_t integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], fmt::format("{}[{}]", path, k)));
  return out;
}

Vec vec(const json& j, const std::string& path) {
  const auto v = numbers(j, path);
  if (v.empty()) fail(path, "must not be empty");
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat mat(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Mat m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = numbers(j[r], fmt::format("{}[{}]", path, r));
    if (static_cast<Eigen::Index>(row.size()) != rows) fail(fmt::format("{}[{}]", path, r), "matrix must be square");
    for (Eigen::Index c = 0; c < rows; ++c) m(r, c) = row[c];
  }
  return m;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::vector<double>> to_rows(const Mat& m) {
  std::vector<std::vector<double>> out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r].push_back(m(r, c));
  }
  return out;
}

constexpr std::initializer_list<const char*> kModelKeys = {"family", "mean", "cov",   "alpha",
                                                           "beta",   "delta", "mu",   "Delta", "t"};

// Moves the flat shorthand ({family, mean, cov, M, ...} at top level) into
// the nested blocks.
json normalise(json doc) {
  if (!doc.is_object()) fail("$", "expected a JSON object");
  if (!doc.contains("family")) return doc;
  if (doc.contains("model")) fail("$.model", "both a model block and top-level model fields");
  json model = json::object();
  for (const char* k : kModelKeys) {
    if (doc.contains(k)) {
      model[k] = doc[k];
      doc.erase(k);
    }
  }
  doc["model"] = model;
  for (const char* k : {"M", "points"}) {
    if (doc.contains(k)) {
      if (doc.contains("grid") && doc["grid"].contains(k)) fail(fmt::format("$.{}", k), "given twice");
      doc["grid"][k] = doc[k];
      doc.erase(k);
    }
  }
  return doc;
}

ModelConfig parse_model(const json& j) {
  const std::string p = "$.model";
  if (!j.is_object()) fail(p, "expected an object");
  if (!j.contains("family") || !j["family"].is_string()) fail(p + ".family", "required string");
  ModelConfig m;
  m.family = j["family"].get<std::string>();
  if (m.family == "gaussian") {
    allow_only(j, p, {"family", "mean", "cov"});
    if (!j.contains("mean")) fail(p + ".mean", "required");
    if (!j.contains("cov")) fail(p + ".cov", "required");
    m.mean = vec(j["mean"], p + ".mean");
    m.cov = mat(j["cov"], p + ".cov");
    if (m.cov.rows() != m.mean.size()) fail(p + ".cov", "dimension does not match mean");
  } else if (m.family == "nig") {
    allow_only(j, p, {"family", "alpha", "beta", "delta", "mu", "Delta", "t"});
    for (const char* k : {"alpha", "beta", "delta", "mu", "Delta"}) {
      if (!j.contains(k)) fail(fmt::format("{}.{}", p, k), "required");
    }
    m.alpha = number(j["alpha"], p + ".alpha");
    m.beta = vec(j["beta"], p + ".beta");
    m.delta = number(j["delta"], p + ".delta");
    m.mu = vec(j["mu"], p + ".mu");
    m.shape = mat(j["Delta"], p + ".Delta");
    if (j.contains("t")) m.t = number(j["t"], p + ".t");
    if (m.mu.size() != m.beta.size()) fail(p + ".mu", "dimension does not match beta");
    if (m.shape.rows() != m.beta.size()) fail(p + ".Delta", "dimension does not match beta");
  } else {
    fail(p + ".family", fmt::format("unknown family '{}' (expected gaussian or nig)", m.family));
  }
  return m;
}

}  // namespace

std::string to_string(Command c) {
  switch (c) {
    case Command::copula: return "copula";
    case Command::density: return "density";
    case Command::cdf: return "cdf";
    case Command::quantile: return "quantile";
    case Command::validate: return "validate";
  }
  return "?";
}

Command parse_command(const std::string& s) {
  for (Command c : {Command::copula, Command::density, Command::cdf, Command::quantile, Command::validate}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError(fmt::format("$.command: unknown command '{}'", s));
}

ModelPtr build_model(const ModelConfig& m) {
  try {
    if (m.family == "gaussian") return std::make_shared<GaussianModel>(m.mean, m.cov);
    return std::make_shared<NigModel>(m.alpha, m.beta, m.delta, m.mu, m.shape, m.t);
  } catch (const DomainError& e) {
    throw ConfigError(fmt::format("$.model: {}", e.what()));
  }
}

RunConfig parse_config(const std::string& text, std::optional<Command> command) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("$: invalid JSON ({})", e.what()));
  }
  doc = normalise(std::move(doc));
  allow_only(doc, "$", {"command", "model", "grid", "numerics", "output", "query", "seed", "samples"});

  RunConfig c;
  if (doc.contains("command")) {
    if (!doc["command"].is_string()) fail("$.command", "expected a string");
    c.command = parse_command(doc["command"].get<std::string>());
  } else if (!command) {
    fail("$.command", "required (in the config or on the command line)");
  }
  if (command) c.command = *command;

  if (!doc.contains("model")) fail("$.model", "required");
  c.model = parse_model(doc["model"]);
  c.built = build_model(c.model);
  const int n = c.built->dimension();

  const bool surface = c.command == Command::copula || c.command == Command::density;
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    allow_only(g, "$.grid", {"M", "points"});
    if (g.contains("M") && g.contains("points")) fail("$.grid", "ambiguous: both M and points given");
    if (g.contains("M")) {
      const auto m = integer(g["M"], "$.grid.M");
      if (m < 2 || m > 2048) fail("$.grid.M", fmt::format("resolution {} outside [2, 2048]", m));
      c.grid_m = static_cast<int>(m);
    } else if (g.contains("points")) {
      const json& pts = g["points"];
      if (!pts.is_array()) fail("$.grid.points", "expected one array of u values per axis");
      for (std::size_t k = 0; k < pts.size(); ++k) {
        c.grid_points.push_back(numbers(pts[k], fmt::format("$.grid.points[{}]", k)));
      }
      if (static_cast<int>(c.grid_points.size()) != n) {
        fail("$.grid.points", fmt::format("{} axes for a {}-dimensional model", c.grid_points.size(), n));
      }
    } else {
      fail("$.grid", "needs M or points");
    }
  } else if (surface) {
    fail("$.grid", "required for the surface commands");
  }

  std::optional<double> tau_q;
  if (doc.contains("numerics")) {
    const json& q = doc["numerics"];
    const std::string p = "$.numerics";
    allow_only(q, p,
               {"R", "tau_q", "tau_t", "N", "max_depth", "u_min", "tol_u", "rule", "conjugate_halving"});
    if (q.contains("R")) {
      c.damping = vec(q["R"], p + ".R");
      if (c.damping.size() != n) fail(p + ".R", "dimension does not match the model");
    }
    if (q.contains("tau_q")) tau_q = number(q["tau_q"], p + ".tau_q");
    if (q.contains("tau_t")) c.tau_t = number(q["tau_t"], p + ".tau_t");
    if (q.contains("N")) c.nodes = static_cast<int>(integer(q["N"], p + ".N"));
    if (q.contains("max_depth")) c.max_depth = static_cast<int>(integer(q["max_depth"], p + ".max_depth"));
    if (q.contains("u_min")) c.u_min = number(q["u_min"], p + ".u_min");
    if (q.contains("tol_u")) c.tol_u = number(q["tol_u"], p + ".tol_u");
    if (q.contains("rule")) {
      const json& r = q["rule"];
      if (r == "gauss_legendre") {
        c.rule = Rule::gauss_legendre;
      } else if (r == "midpoint") {
        c.rule = Rule::midpoint;
      } else {
        fail(p + ".rule", "expected gauss_legendre or midpoint");
      }
    }
    if (q.contains("conjugate_halving")) {
      if (!q["conjugate_halving"].is_boolean()) fail(p + ".conjugate_halving", "expected a boolean");
      c.conjugate_halving = q["conjugate_halving"].get<bool>();
    }
  }
  c.tau_q = tau_q.value_or(c.command == Command::density ? 1e-6 : 1e-7);
  if (!(c.tau_q > 0.0)) fail("$.numerics.tau_q", "tau_q > 0 violated");
  if (!(c.tau_t > 0.0)) fail("$.numerics.tau_t", "tau_t > 0 violated");
  if (c.nodes < 8) fail("$.numerics.N", "N >= 8 violated");
  if (c.max_depth < 0 || c.max_depth > 12) fail("$.numerics.max_depth", "outside [0, 12]");
  if (!(c.u_min > 0.0 && c.u_min < 0.5)) fail("$.numerics.u_min", "outside (0, 0.5)");
  if (!(c.tol_u > 0.0)) fail("$.numerics.tol_u", "tol_u > 0 violated");

  if (c.damping.size() == 0) {
    c.damping = default_damping(*c.built).values();
  } else if (!feasible(*c.built, c.damping)) {
    try {
      DampingVector::make(*c.built, c.damping);
    } catch (const DomainError& e) {
      fail("$.numerics.R", e.what());
    }
    fail("$.numerics.R", "not feasible for the model");
  }

  if (doc.contains("output")) {
    const json& o = doc["output"];
    allow_only(o, "$.output", {"format", "path"});
    if (o.contains("format")) {
      if (!o["format"].is_string()) fail("$.output.format", "expected a string");
      c.format = o["format"].get<std::string>();
      if (c.format != "csv" && c.format != "json") fail("$.output.format", "expected csv or json");
    }
    if (o.contains("path")) {
      if (!o["path"].is_string()) fail("$.output.path", "expected a string");
      c.path = o["path"].get<std::string>();
    }
  }
  if (!surface) c.format = "json";

  if (doc.contains("query")) {
    const json& q = doc["query"];
    allow_only(q, "$.query", {"x", "axis", "u"});
    if (q.contains("x")) {
      const json& x = q["x"];
      if (x.is_array() && !x.empty() && x[0].is_number()) {
        c.query_x.push_back(numbers(x, "$.query.x"));
      } else if (x.is_array()) {
        for (std::size_t k = 0; k < x.size(); ++k) c.query_x.push_back(numbers(x[k], fmt::format("$.query.x[{}]", k)));
      } else {
        fail("$.query.x", "expected a point or an array of points");
      }
      for (std::size_t k = 0; k < c.query_x.size(); ++k) {
        if (static_cast<int>(c.query_x[k].size()) != n) {
          fail(fmt::format("$.query.x[{}]", k), "dimension does not match the model");
        }
      }
    }
    if (q.contains("axis")) {
      c.query_axis = static_cast<int>(integer(q["axis"], "$.query.axis"));
      if (c.query_axis < 1 || c.query_axis > n) fail("$.query.axis", fmt::format("outside [1, {}]", n));
    }
    if (q.contains("u")) {
      const json& u = q["u"];
      c.query_u = u.is_number() ? std::vector<double>{number(u, "$.query.u")} : numbers(u, "$.query.u");
    }
  }
  if (c.command == Command::cdf && c.query_x.empty()) fail("$.query.x", "required for cdf");
  if (c.command == Command::quantile && c.query_u.empty()) fail("$.query.u", "required for quantile");

  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) fail("$.seed", "expected a non-negative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("samples")) {
    c.samples = integer(doc["samples"], "$.samples");
    if (c.samples < 2) fail("$.samples", "samples >= 2 violated");
  }
  return c;
}

nlohmann::ordered_json effective_config(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["command"] = to_string(c.command);
  auto& m = j["model"];
  m["family"] = c.model.family;
  if (c.model.family == "gaussian") {
    m["mean"] = to_std(c.model.mean);
    m["cov"] = to_rows(c.model.cov);
  } else {
    m["alpha"] = c.model.alpha;
    m["beta"] = to_std(c.model.beta);
    m["delta"] = c.model.delta;
    m["mu"] = to_std(c.model.mu);
    m["Delta"] = to_rows(c.model.shape);
    m["t"] = c.model.t;
  }
  if (c.grid_m) {
    j["grid"]["M"] = *c.grid_m;
  } else if (!c.grid_points.empty()) {
    j["grid"]["points"] = c.grid_points;
  }
  auto& q = j["numerics"];
  q["R"] = to_std(c.damping);
  q["tau_q"] = c.tau_q;
  q["tau_t"] = c.tau_t;
  q["N"] = c.nodes;
  q["max_depth"] = c.max_depth;
  q["u_min"] = c.u_min;
  q["tol_u"] = c.tol_u;
  q["rule"] = c.rule == Rule::gauss_legendre ? "gauss_legendre" : "midpoint";
  q["conjugate_halving"] = c.conjugate_halving;
  j["output"]["format"] = c.format;
  if (!c.path.empty()) j["output"]["path"] = c.path;
  if (c.command == Command::cdf) j["query"]["x"] = c.query_x;
  if (c.command == Command::quantile) {
    j["query"]["axis"] = c.query_axis;
    j["query"]["u"] = c.query_u;
  }
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  return j;
}

}  // namespace fcop::app
