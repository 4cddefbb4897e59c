#include "fcop/run.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "fcop/marginals.hpp"
#include "fcop/oracle.hpp"

namespace fcop::app {
namespace {

using ojson = nlohmann::ordered_json;

QuadratureSpec make_spec(const RunConfig& c, double tau) {
  QuadratureSpec s;
  s.nodes = c.nodes;
  s.rule = c.rule;
  s.tolerance = tau;
  s.truncation_tolerance = c.tau_t;
  s.max_depth = c.max_depth;
  s.conjugate_halving = c.conjugate_halving;
  return s;
}

std::vector<double> interior(int m) {
  std::vector<double> a;
  for (int k = 1; k < m; ++k) a.push_back(static_cast<double>(k) / m);
  return a;
}

ojson diagnostics_json(const CopulaSurface& s) {
  const auto& d = s.diagnostics;
  ojson j;
  j["max_imaginary_residual"] = d.max_imaginary_residual;
  j["clamp_count"] = d.clamp_count;
  j["floor_count"] = d.floor_count;
  j["max_refinement_depth"] = d.max_refinement_depth;
  j["unconverged_count"] = d.unconverged_count;
  j["invariant_violations"] = d.invariant_violations.size();
  j["half_widths"] = s.metadata.half_widths;
  j["base_panels"] = s.metadata.base_panels;
  j["damping"] = s.metadata.damping;
  j["model"] = s.metadata.model;
  j["timestamp"] = s.metadata.timestamp;
  return j;
}

std::string default_path(const RunConfig& c) {
  return fmt::format("fourier-copula-{}.{}", to_string(c.command), c.format);
}

void run_surface(const RunConfig& c, const std::string& path, ojson& diag) {
  auto model = c.built;
  const CopulaOptions opts = copula_options(c);
  const SurfaceKernel kernel = c.command == Command::density ? SurfaceKernel::density : SurfaceKernel::copula;
  GridSpec g;
  if (c.grid_m) {
    g = GridSpec::equispaced(model->dimension(), *c.grid_m, kernel);
  } else {
    g.axes = c.grid_points;
    g.kernel = kernel;
  }
  CopulaEngine engine(model, DampingVector::make(*model, c.damping), opts);
  const CopulaSurface s = engine.grid(g);
  diag = diagnostics_json(s);
  if (c.format == "csv") {
    write_atomic(path, surface_csv(s));
  } else {
    ojson j;
    j["kernel"] = to_string(c.command);
    j["axes"] = s.axes;
    j["values"] = s.values;
    write_atomic(path, j.dump(2) + "\n");
  }
}

void run_cdf(const RunConfig& c, const std::string& path, ojson& diag) {
  FourierInverter inv(c.built, DampingVector::make(*c.built, c.damping), KernelKind::cdf, make_spec(c, c.tau_q));
  ojson points = ojson::array();
  double max_im = 0.0;
  int max_depth = 0;
  for (const auto& x : c.query_x) {
    const IntegralResult r = inv.evaluate(x);
    ojson p;
    p["x"] = x;
    p["value"] = std::clamp(r.value, 0.0, 1.0);
    p["raw"] = r.value;
    p["imaginary_residual"] = r.imaginary_residual;
    p["refinement_depth"] = r.refinement_depth;
    p["converged"] = r.converged;
    points.push_back(p);
    max_im = std::max(max_im, r.imaginary_residual);
    max_depth = std::max(max_depth, r.refinement_depth);
  }
  diag["max_imaginary_residual"] = max_im;
  diag["max_refinement_depth"] = max_depth;
  diag["half_widths"] = inv.half_widths();
  write_atomic(path, ojson{{"points", points}}.dump(2) + "\n");
}

void run_quantile(const RunConfig& c, const std::string& path, ojson& diag) {
  const int axis = c.query_axis - 1;
  MarginalEngine engine(c.built, axis, c.damping[axis], make_spec(c, c.tau_q), make_spec(c, 1e-6), c.u_min);
  ojson entries = ojson::array();
  for (double u : c.query_u) {
    const QuantileEntry q = engine.quantile(u, c.tol_u);
    entries.push_back({{"u", q.u}, {"x", q.x}, {"achieved_tolerance", q.achieved_tolerance}});
  }
  diag["marginal_damping"] = engine.damping();
  diag["marginal_mean"] = engine.mean();
  diag["marginal_sd"] = engine.sd();
  write_atomic(path, ojson{{"axis", c.query_axis}, {"quantiles", entries}}.dump(2) + "\n");
}

bool run_validate(const RunConfig& c, const std::string& path, std::ostream& out, ojson& diag) {
  const auto checks = validation_checks(c);
  bool ok = true;
  ojson rows = ojson::array();
  out << fmt::format("{:<28} {:>14} {:>14}  {}\n", "check", "value", "tolerance", "status");
  for (const auto& k : checks) {
    out << fmt::format("{:<28} {:>14.6e} {:>14.6e}  {}\n", k.name, k.value, k.tolerance, k.pass ? "PASS" : "FAIL");
    rows.push_back({{"check", k.name}, {"value", k.value}, {"tolerance", k.tolerance}, {"pass", k.pass}});
    ok = ok && k.pass;
  }
  diag["checks"] = checks.size();
  diag["failed"] = std::count_if(checks.begin(), checks.end(), [](const auto& k) { return !k.pass; });
  write_atomic(path, ojson{{"checks", rows}, {"pass", ok}}.dump(2) + "\n");
  return ok;
}

}  // namespace

CopulaOptions copula_options(const RunConfig& c) {
  CopulaOptions o;
  o.cdf_spec = make_spec(c, c.command == Command::density ? 1e-7 : c.tau_q);
  o.pdf_spec = make_spec(c, c.command == Command::density ? c.tau_q : 1e-6);
  o.tol_u = c.tol_u;
  o.u_min = c.u_min;
  return o;
}

std::string surface_csv(const CopulaSurface& s) {
  const std::size_t n = s.axes.size();
  std::string text;
  for (std::size_t i = 0; i < n; ++i) text += fmt::format("u{},", i + 1);
  text += "value\n";
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t flat = 0; flat < s.values.size(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t i = n; i-- > 0;) {
      idx[i] = rem % s.axes[i].size();
      rem /= s.axes[i].size();
    }
    for (std::size_t i = 0; i < n; ++i) text += fmt::format("{:.17g},", s.axes[i][idx[i]]);
    text += fmt::format("{:.17g}\n", s.values[flat]);
  }
  return text;
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(fmt::format("cannot write {}", tmp.string()));
    f << content;
    f.flush();
    if (!f) throw std::runtime_error(fmt::format("write to {} failed", tmp.string()));
  }
  fs::rename(tmp, target);
}

std::vector<ValidationCheck> validation_checks(const RunConfig& c) {
  std::vector<ValidationCheck> out;
  const ModelPtr& model = c.built;
  const int n = model->dimension();
  CopulaOptions opts = copula_options(c);
  opts.cdf_spec.tolerance = c.command == Command::density ? 1e-7 : c.tau_q;
  const double tau = opts.cdf_spec.tolerance;
  CopulaEngine engine(model, DampingVector::make(*model, c.damping), opts);
  const auto* gauss = dynamic_cast<const GaussianModel*>(model.get());

  // Quantile layer.
  {
    double worst = 0.0;
    double worst_normal = 0.0;
    for (int i = 0; i < n; ++i) {
      for (double u : {0.025, 0.5, 0.975}) {
        const QuantileEntry q = engine.quantile(i, u);
        worst = std::max(worst, std::abs(engine.marginal(i).cdf_raw(q.x).value - u));
        if (gauss) {
          const double sd = std::sqrt(gauss->cov()(i, i));
          const double exact = gauss->mean()[i] + sd * oracle::normal_quantile(u);
          worst_normal = std::max(worst_normal, std::abs(q.x - exact) / sd);
        }
      }
    }
    out.push_back({"quantile_roundtrip", worst, 2e-6, worst <= 2e-6});
    if (gauss) out.push_back({"normal_quantile", worst_normal, 1e-4, worst_normal <= 1e-4});
  }

  if (n == 2) {
    // Invariants on a surface including the boundary.
    GridSpec g = GridSpec::equispaced(2, 10);
    g.strict = false;
    const CopulaSurface s = engine.grid(g);
    const double v = static_cast<double>(s.diagnostics.invariant_violations.size());
    out.push_back({"copula_invariants", v, 0.0, v == 0.0});

    if (gauss) {
      const Mat& cov = gauss->cov();
      const double rho = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
      double worst = 0.0;
      for (double u1 : interior(12)) {
        for (double u2 : interior(12)) {
          const double u[2] = {u1, u2};
          worst = std::max(worst, std::abs(engine.value(u).value - oracle::gaussian_copula_exact(u, rho)));
        }
      }
      out.push_back({"gaussian_copula_exact", worst, 1e-4, worst <= 1e-4});
    }
  }

  // Monte Carlo.
  const oracle::SampleMatrix draws = oracle::sample(*model, c.samples, c.seed);
  {
    const Moments mo = moments(*model);
    const double m = static_cast<double>(draws.rows());
    const Vec mean = draws.draws.colwise().mean().transpose();
    Eigen::MatrixXd centred = draws.draws.rowwise() - mean.transpose();
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double se = std::sqrt(centred.col(i).squaredNorm() / (m - 1.0) / m);
      worst = std::max(worst, std::abs(mean[i] - mo.mean[i]) / se);
      for (int j = 0; j <= i; ++j) {
        const Eigen::ArrayXd prod = centred.col(i).array() * centred.col(j).array();
        const double cij = prod.mean();
        const double se_c = std::sqrt((prod - cij).square().sum() / (m - 1.0) / m);
        worst = std::max(worst, std::abs(cij - mo.covariance(i, j)) / se_c);
      }
    }
    out.push_back({"sample_moments_z", worst, 5.0, worst <= 5.0});
  }
  if (n == 2) {
    const std::vector<std::vector<double>> axes{interior(10), interior(10)};
    const std::vector<double> emp = oracle::EmpiricalCopula(draws).grid(axes);
    GridSpec g;
    g.axes = axes;
    const CopulaSurface s = engine.grid(g);
    double worst = 0.0;
    for (std::size_t k = 0; k < emp.size(); ++k) worst = std::max(worst, std::abs(emp[k] - s.values[k]));
    const double tol = 3.0 / std::sqrt(static_cast<double>(draws.rows())) + 4.0 * tau;
    out.push_back({"empirical_copula_sup", worst, tol, worst <= tol});
  }
  return out;
}

int run(RunConfig c, const RunOptions& options, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  if (options.threads) {
    if (*options.threads < 1) {
      err << "error: --threads must be >= 1\n";
      return kConfigError;
    }
    omp_set_num_threads(*options.threads);
  }
  if (options.seed) c.seed = *options.seed;
  if (options.out) c.path = *options.out;
  if (c.path.empty()) c.path = default_path(c);

  ojson diag = ojson::object();
  int code = kOk;
  try {
    switch (c.command) {
      case Command::copula:
      case Command::density: run_surface(c, c.path, diag); break;
      case Command::cdf: run_cdf(c, c.path, diag); break;
      case Command::quantile: run_quantile(c, c.path, diag); break;
      case Command::validate:
        if (!run_validate(c, c.path, out, diag)) code = kValidationFailure;
        break;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }

  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  ojson meta;
  meta["effective_config"] = effective_config(c);
  meta["diagnostics"] = diag;
  meta["wall_time_ms"] = ms;
  try {
    write_atomic(c.path + ".meta.json", meta.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  }
  if (c.command != Command::validate) out << c.path << "\n";
  return code;
}

int run_file(const std::string& config_path, std::optional<Command> command, const RunOptions& options,
             std::ostream& out, std::ostream& err) {
  std::ifstream f(config_path);
  if (!f) {
    err << "config error: cannot read " << config_path << "\n";
    return kConfigError;
  }
  std::stringstream text;
  text << f.rdbuf();
  RunConfig c;
  try {
    c = parse_config(text.str(), command);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  return run(std::move(c), options, out, err);
}

}  // namespace fcop::app
