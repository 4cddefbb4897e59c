#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fcop/config.hpp"
#include "fcop/run.hpp"

namespace fcop::app {
namespace {

namespace fs = std::filesystem;

const char* kNig = R"("model": {"family": "nig", "alpha": 10.2, "beta": [-3.8, -2.5], "delta": 0.15,
                                "mu": [0, 0], "Delta": [[1, -1], [-1, 2]]})";

std::string expect_config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError for " << text;
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fcop_config_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

TEST(Config, FlatShorthandFillsDefaults) {
  const RunConfig c =
      parse_config(R"({"family": "gaussian", "mean": [0,0], "cov": [[1,0],[0,1]], "command": "copula", "M": 10})");
  EXPECT_EQ(c.command, Command::copula);
  ASSERT_TRUE(c.grid_m.has_value());
  EXPECT_EQ(*c.grid_m, 10);
  EXPECT_EQ(c.damping[0], -1.0);
  EXPECT_EQ(c.damping[1], -1.0);
  EXPECT_EQ(c.tau_q, 1e-7);
  EXPECT_EQ(c.tau_t, 1e-9);
  EXPECT_EQ(c.nodes, 64);
  EXPECT_EQ(c.u_min, 1e-4);
  EXPECT_EQ(c.format, "csv");
}

TEST(Config, DensityDefaultsToLooserTolerance) {
  const RunConfig c = parse_config(std::string("{") + kNig + R"(, "command": "density", "grid": {"M": 8}})");
  EXPECT_EQ(c.tau_q, 1e-6);
}

TEST(Config, ModelInvariantsReportTheInequality) {
  const std::string msg = expect_config_error(
      R"({"command": "copula", "grid": {"M": 4},
          "model": {"family": "nig", "alpha": 1, "beta": [5, 0], "delta": 1, "mu": [0, 0], "Delta": [[1,0],[0,1]]}})");
  EXPECT_NE(msg.find("alpha^2 > <beta, Delta beta>"), std::string::npos) << msg;
  EXPECT_NE(msg.find("$.model"), std::string::npos) << msg;
}

TEST(Config, SchemaViolationsCarryPaths) {
  EXPECT_NE(expect_config_error(R"({"family": "gaussian", "mean": [0,0], "cov": [[1,0],[0,1]],
                                     "command": "copula", "M": 10, "points": [[0.5],[0.5]]})")
                .find("ambiguous"),
            std::string::npos);
  EXPECT_NE(expect_config_error(std::string("{") + kNig + R"(, "command": "copula", "grid": {"M": 4},
                                                              "numerics": {"tau": 1}})")
                .find("$.numerics.tau"),
            std::string::npos);
  EXPECT_NE(expect_config_error(std::string("{") + kNig + R"(, "command": "copula", "grid": {"M": 1}})")
                .find("$.grid.M"),
            std::string::npos);
  EXPECT_NE(expect_config_error(std::string("{") + kNig + R"(, "command": "copula", "grid": {"M": 2049}})")
                .find("$.grid.M"),
            std::string::npos);
  EXPECT_NE(expect_config_error(std::string("{") + kNig + R"(, "command": "copula", "grid": {"M": 4},
                                                              "numerics": {"R": [-20, -1]}})")
                .find("$.numerics.R"),
            std::string::npos);
  EXPECT_NE(expect_config_error(R"({"family": "gamma", "M": 4, "command": "copula"})").find("$.model.family"),
            std::string::npos);
  EXPECT_NE(expect_config_error(std::string("{") + kNig + R"(, "command": "quantile"})").find("$.query.u"),
            std::string::npos);
  EXPECT_NE(expect_config_error("[1, 2").find("invalid JSON"), std::string::npos);
}

TEST(Config, EffectiveConfigRoundTrips) {
  const RunConfig c = parse_config(std::string("{") + kNig +
                                   R"(, "command": "copula", "grid": {"points": [[0.2, 0.4], [0.5]]},
                                        "numerics": {"R": [-0.5, -0.5], "N": 32}})");
  const auto e = effective_config(c);
  const RunConfig again = parse_config(e.dump());
  EXPECT_EQ(effective_config(again), e);
  EXPECT_EQ(again.damping[0], -0.5);
  EXPECT_EQ(again.nodes, 32);
  EXPECT_EQ(again.grid_points, c.grid_points);
}

TEST(Run, CopulaSurfaceArtifacts) {
  const fs::path cfg = scratch("ind.json");
  std::ofstream(cfg) << R"({"family": "gaussian", "mean": [0,0], "cov": [[1,0],[0,1]], "command": "copula", "M": 10})";
  const fs::path out = scratch("ind.csv");
  std::ostringstream o, e;
  RunOptions opt;
  opt.out = out.string();
  ASSERT_EQ(run_file(cfg.string(), std::nullopt, opt, o, e), kOk) << e.str();
  const std::string csv = slurp(out);
  EXPECT_EQ(csv.rfind("u1,u2,value\n", 0), 0u);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  double prev1 = -1.0, prev2 = -1.0;
  while (std::getline(lines, line)) {
    double u1, u2, v;
    char c1, c2;
    std::istringstream(line) >> u1 >> c1 >> u2 >> c2 >> v;
    EXPECT_NEAR(v, u1 * u2, 1e-5);
    EXPECT_TRUE(u1 > prev1 || (u1 == prev1 && u2 > prev2));
    prev1 = u1;
    prev2 = u2;
    ++rows;
  }
  EXPECT_EQ(rows, 121);
  const auto meta = nlohmann::json::parse(slurp(out.string() + ".meta.json"));
  EXPECT_TRUE(meta.contains("effective_config"));
  EXPECT_TRUE(meta["diagnostics"].contains("max_imaginary_residual"));
  EXPECT_TRUE(meta["diagnostics"].contains("clamp_count"));
  EXPECT_TRUE(meta["diagnostics"].contains("max_refinement_depth"));
  EXPECT_TRUE(meta.contains("wall_time_ms"));
}

TEST(Run, ExitCodes) {
  std::ostringstream o, e;
  EXPECT_EQ(run_file(scratch("missing.json").string(), std::nullopt, {}, o, e), kConfigError);

  const fs::path band = scratch("band.json");
  std::ofstream(band) << "{" << kNig << R"(, "command": "quantile", "query": {"axis": 1, "u": [0.0]}})";
  RunOptions opt;
  opt.out = scratch("band.out.json").string();
  EXPECT_EQ(run_file(band.string(), std::nullopt, opt, o, e), kConfigError);

  const fs::path trunc = scratch("trunc.json");
  std::ofstream(trunc) << R"({"family": "gaussian", "mean": [0,0], "cov": [[1e-10,0],[0,1e-10]],
                              "command": "cdf", "query": {"x": [0, 0]}})";
  opt.out = scratch("trunc.out.json").string();
  EXPECT_EQ(run_file(trunc.string(), std::nullopt, opt, o, e), kNumericalFailure) << e.str();
}

TEST(Run, ValidateGaussian) {
  const fs::path cfg = scratch("val.json");
  std::ofstream(cfg) << R"({"model": {"family": "gaussian", "mean": [0, 0], "cov": [[1, 0.5], [0.5, 1]]},
                            "samples": 200000})";
  std::ostringstream o, e;
  RunOptions opt;
  opt.out = scratch("val.out.json").string();
  opt.seed = 42;
  EXPECT_EQ(run_file(cfg.string(), Command::validate, opt, o, e), kOk) << o.str() << e.str();
  EXPECT_NE(o.str().find("gaussian_copula_exact"), std::string::npos);
  EXPECT_EQ(o.str().find("FAIL"), std::string::npos) << o.str();
}

TEST(Run, QuantileAndCdfCommands) {
  const fs::path q = scratch("q.json");
  std::ofstream(q) << R"({"family": "gaussian", "mean": [1, 0], "cov": [[4, 0], [0, 1]], "command": "quantile",
                          "query": {"axis": 1, "u": [0.975]}})";
  std::ostringstream o, e;
  RunOptions opt;
  opt.out = scratch("q.out.json").string();
  ASSERT_EQ(run_file(q.string(), std::nullopt, opt, o, e), kOk) << e.str();
  const auto j = nlohmann::json::parse(slurp(*opt.out));
  EXPECT_NEAR(j["quantiles"][0]["x"].get<double>(), 1.0 + 2.0 * 1.9599639845400542355, 1e-4);

  const fs::path c = scratch("c.json");
  std::ofstream(c) << R"({"family": "gaussian", "mean": [0, 0], "cov": [[1, 0.5], [0.5, 1]], "command": "cdf",
                          "query": {"x": [[0, 0]]}})";
  opt.out = scratch("c.out.json").string();
  ASSERT_EQ(run_file(c.string(), std::nullopt, opt, o, e), kOk) << e.str();
  const auto k = nlohmann::json::parse(slurp(*opt.out));
  EXPECT_NEAR(k["points"][0]["value"].get<double>(), 1.0 / 3.0, 1e-7);
}

TEST(Run, WriteAtomicReplacesContent) {
  const fs::path p = scratch("atomic.txt");
  write_atomic(p.string(), "one");
  write_atomic(p.string(), "two");
  EXPECT_EQ(slurp(p), "two");
  EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
}

}  // namespace
}  // namespace fcop::app
