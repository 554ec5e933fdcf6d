#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <string>

#include "qbd2d/model_io.hpp"
#include "qbd2d/verify.hpp"

using namespace qbd2d;
using nlohmann::json;

namespace {

// exit taxonomy: 0 ok, 1 validation, 2 parse, 3 unstable, 4 insufficient
// data, 5 verification mismatch
enum ExitCode {
  kOk = 0,
  kValidation = 1,
  kParse = 2,
  kUnstable = 3,
  kInsufficient = 4,
  kMismatch = 5,
};

int log_level() {
  const char* e = std::getenv("QBD2D_LOG");
  if (!e) return 0;
  std::string s = e;
  if (s == "debug") return 2;
  if (s == "info") return 1;
  return 0;
}

void logi(const char* fmt, double v) {
  if (log_level() >= 1) std::fprintf(stderr, fmt, v);
}

// Canonical serialization: object keys in sorted order (nlohmann's object is
// an ordered map), floats at 17 significant digits so repeated runs are
// byte-identical.
void emit(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        out += json(k).dump();
        out += ':';
        emit(v, out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        emit(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", j.get<double>());
      out += buf;
      break;
    }
    default:
      out += j.dump();
  }
}

void print_table(const json& j, const std::string& prefix) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items())
      print_table(v, prefix.empty() ? k : prefix + "." + k);
  } else if (j.is_array() && !j.empty() && (j[0].is_object() || j[0].is_array())) {
    for (std::size_t i = 0; i < j.size(); ++i)
      print_table(j[i], prefix + "[" + std::to_string(i) + "]");
  } else {
    std::string v;
    emit(j, v);
    std::printf("%-36s %s\n", prefix.c_str(), v.c_str());
  }
}

void print_report(const json& j, const std::string& format) {
  if (format == "table") {
    print_table(j, "");
    return;
  }
  std::string out;
  emit(j, out);
  out += '\n';
  std::fputs(out.c_str(), stdout);
}

json vector_json(const RowVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ParseError:
      return kParse;
    case ErrorCode::Unstable:
      return kUnstable;
    case ErrorCode::WindowTooSmall:
    case ErrorCode::ZeroProbability:
    case ErrorCode::NotConverged:
      return kInsufficient;
    default:
      return kValidation;
  }
}

BlockSet load_or_exit(const std::string& path) {
  try {
    return load_model(path);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::exit(e.code() == ErrorCode::ParseError ? kParse : kValidation);
  }
}

json validation_json(const ValidationReport& vr) {
  json violations = json::array();
  for (const Violation& v : vr.violations)
    violations.push_back(json{{"kind", v.kind}, {"detail", v.detail}});
  return json{{"violations", violations},
              {"irreducibility", verdict_name(vr.irreducibility)},
              {"ok", vr.ok()}};
}

// Gate shared by analyze and verify: validation, then stability.
DriftReport gate_stable(const BlockSet& bs) {
  ValidationReport vr = validate(bs);
  if (!vr.ok()) {
    std::string out;
    emit(validation_json(vr), out);
    std::fprintf(stderr, "error: model fails validation: %s\n", out.c_str());
    std::exit(kValidation);
  }
  DriftReport dr = mean_drifts(bs);
  if (dr.stability != Stability::PositiveRecurrent) {
    std::fprintf(stderr, "error: model is %s\n", stability_name(dr.stability));
    std::exit(kUnstable);
  }
  return dr;
}

json drift_json(const DriftReport& dr) {
  json d{{"interior_drift", json::array({dr.a12_1, dr.a12_2})},
         {"phase_distribution", vector_json(dr.varpi)},
         {"stability", stability_name(dr.stability)}};
  if (dr.a1) d["face1_drift"] = *dr.a1;
  if (dr.a2) d["face2_drift"] = *dr.a2;
  return d;
}

json geometry_json(const GammaGeometry& g) {
  return json{{"theta1_range", json::array({g.theta1_min, g.theta1_max})},
              {"theta2_range", json::array({g.theta2_min, g.theta2_max})},
              {"theta1_star", g.theta1_star},
              {"theta2_star", g.theta2_star},
              {"saturated", json::array({g.saturated1, g.saturated2})},
              {"q1", json::array({g.q1_theta1, g.q1_theta2})},
              {"q2", json::array({g.q2_theta1, g.q2_theta2})},
              {"slope_q1", g.slope_q1},
              {"slope_q2", g.slope_q2},
              {"model_type", model_type_name(g.model_type)}};
}

json tail_json(const TailAsymptotics& ta) {
  return json{{"direction", json::array({ta.c.c1, ta.c.c2})},
              {"xi_c", ta.xi_c},
              {"power_exponent", ta.power_exponent},
              {"regime", regime_name(ta.regime)}};
}

int cmd_validate(const std::string& path, const std::string& format) {
  json report;
  try {
    BlockSet bs = load_or_exit(path);
    ValidationReport vr = validate(bs);
    report = validation_json(vr);
    report["command"] = "validate";
    report["phases"] = bs.phases();
    print_report(report, format);
    return vr.ok() ? kOk : kValidation;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_for(e);
  }
}

int cmd_analyze(const std::string& path, Direction c, bool with_prefactor, int prefactor_N,
                const std::string& format) {
  try {
    BlockSet bs = load_or_exit(path);
    DriftReport dr = gate_stable(bs);
    GammaGeometry g = analyze_geometry(bs);
    TailAsymptotics ta = decay_function(bs, g, c);
    json report{{"command", "analyze"},
                {"drift", drift_json(dr)},
                {"geometry", geometry_json(g)},
                {"tail", tail_json(ta)}};
    if (with_prefactor) {
      if (c.c1 == 1 && c.c2 == 1 && ta.regime == Regime::TangencyInterior) {
        TangencyPoint tp = theta_c_max(bs, c);
        logi("solving truncated chain for prefactor data (N=%g)\n", double(prefactor_N));
        TruncatedStationary ts = solve_truncated(bs, prefactor_N);
        BoundaryGF gf = eval_boundary_gf(ts, std::exp(tp.eta1), std::exp(tp.eta2));
        report["tail"]["prefactor"] = vector_json(prefactor_vector(bs, gf));
      } else {
        report["tail"]["prefactor"] = nullptr;
        report["tail"]["prefactor_note"] =
            "requires direction (1,1) and the tangency-interior regime";
      }
    }
    print_report(report, format);
    return kOk;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_for(e);
  }
}

int cmd_verify(const std::string& path, Direction c, int N, std::int64_t seed, bool with_sim,
               VerifyThresholds tol, const std::string& format) {
  try {
    BlockSet bs = load_or_exit(path);
    gate_stable(bs);
    logi("solving truncated chain (N=%g)\n", double(N));
    TruncatedStationary ts = solve_truncated(bs, N);
    VerifyReport r = verify_model(bs, c, ts, tol);

    if (format == "csv") {
      // ray data backing the fit, for external plotting
      std::printf("k,j,nu,log_nu\n");
      auto [lo, hi] = default_fit_window(N, c);
      for (int k = lo; k <= hi; ++k)
        for (int j = 0; j < ts.phases(); ++j) {
          double v = ts.at(k * c.c1, k * c.c2, j);
          std::printf("%d,%d,%.17g,%.17g\n", k, j, v, std::log(v));
        }
      return r.ok() ? kOk : kMismatch;
    }

    json identity = json::array();
    for (const IdentityProbe& p : r.identity)
      identity.push_back(json{{"theta", json::array({p.theta1, p.theta2})},
                              {"residual", p.residual},
                              {"bound", p.bound},
                              {"ok", p.ok}});
    json report{{"command", "verify"},
                {"predicted", tail_json(r.predicted)},
                {"fit",
                 {{"window", json::array({r.fit.k_lo, r.fit.k_hi})},
                  {"xi_hat", r.fit.xi_hat},
                  {"beta_hat", r.fit.beta_hat},
                  {"r_squared", r.fit.r_squared}}},
                {"xi_rel_err", r.xi_rel_err},
                {"beta_class", power_class_name(r.beta_class)},
                {"beta_match", r.beta_match},
                {"identity", identity},
                {"homogeneity",
                 {{"spread_10", r.spread_10},
                  {"spread_01", r.spread_01},
                  {"spread_11", r.spread_11}}},
                {"checks",
                 {{"xi_ok", r.xi_ok},
                  {"identity_ok", r.identity_ok},
                  {"homogeneity_ok", r.homogeneity_ok}}},
                {"ok", r.ok()}};
    if (with_sim) {
      Simulation sim = simulate(bs, 1000000, std::uint64_t(seed));
      double solved = 0.0;
      for (int x1 = 0; x1 <= 10; ++x1)
        for (int x2 = 0; x2 <= 10; ++x2)
          for (int j = 0; j < ts.phases(); ++j) solved += ts.at(x1, x2, j);
      double emp = sim.box_mass(10);
      report["simulation"] = json{{"seed", seed},
                                  {"steps", sim.steps},
                                  {"box10_empirical", emp},
                                  {"box10_solved", solved},
                                  {"abs_dev", std::abs(emp - solved)}};
    }
    print_report(report, format);
    return r.ok() ? kOk : kMismatch;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_for(e);
  }
}

int cmd_geometry(const std::string& path, double grid) {
  try {
    BlockSet bs = load_or_exit(path);
    ValidationReport vr = validate(bs);
    if (!vr.ok()) {
      std::fprintf(stderr, "error: model fails validation\n");
      return kValidation;
    }
    Extremes e = theta_extremes(bs);
    std::printf("theta1,eta2_under,eta2_bar\n");
    const double pad = 1e-9;
    for (double t = e.theta1_min + pad; t < e.theta1_max; t += grid) {
      ThetaBounds b = eta2_branches(bs, t);
      std::printf("%.17g,%.17g,%.17g\n", t, b.under, b.bar);
    }
    ThetaBounds b = eta2_branches(bs, e.theta1_max - pad);
    std::printf("%.17g,%.17g,%.17g\n", e.theta1_max - pad, b.under, b.bar);
    return kOk;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_for(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tail asymptotics of two-dimensional reflecting random walks"};
  app.require_subcommand(1);
  std::string format = "json";

  std::string v_path;
  CLI::App* validate_cmd = app.add_subcommand("validate", "check model invariants");
  validate_cmd->add_option("file", v_path, "model JSON file")->required();
  validate_cmd->add_option("--format", format, "json or table");

  std::string a_path, a_dir = "1,1";
  bool with_prefactor = false;
  int prefactor_N = 120;
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "decay rate and regime");
  analyze_cmd->add_option("file", a_path, "model JSON file")->required();
  analyze_cmd->add_option("--c", a_dir, "direction C1,C2");
  analyze_cmd->add_flag("--with-prefactor", with_prefactor,
                        "include the tangency prefactor vector (solves the chain at --prefactor-N)");
  analyze_cmd->add_option("--prefactor-N", prefactor_N, "truncation level for prefactor data")
      ->check(CLI::Range(30, 100000));
  analyze_cmd->add_option("--format", format, "json or table");

  std::string f_path, f_dir = "1,1";
  int N = 0;
  std::int64_t seed = 0;
  VerifyThresholds tol;
  CLI::App* verify_cmd = app.add_subcommand("verify", "compare predictions with a solved chain");
  verify_cmd->add_option("file", f_path, "model JSON file")->required();
  verify_cmd->add_option("--c", f_dir, "direction C1,C2");
  verify_cmd->add_option("--N", N, "truncation level")->required()->check(CLI::Range(30, 100000));
  CLI::Option* seed_opt =
      verify_cmd->add_option("--seed", seed, "run an informational simulation cross-check");
  verify_cmd->add_option("--xi-tol", tol.xi_rel, "relative decay-rate tolerance");
  verify_cmd->add_option("--hom-tol", tol.homogeneity_spread, "homogeneity spread tolerance");
  verify_cmd->add_option("--id-factor", tol.identity_factor, "identity bound factor");
  verify_cmd->add_option("--format", format, "json, csv, or table");

  std::string g_path;
  double grid = 0.01;
  CLI::App* geometry_cmd = app.add_subcommand("geometry", "sample the spectral curve as CSV");
  geometry_cmd->add_option("file", g_path, "model JSON file")->required();
  geometry_cmd->add_option("--grid", grid, "theta1 step")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  auto parse_dir = [](const std::string& s) {
    Direction c;
    if (std::sscanf(s.c_str(), "%d,%d", &c.c1, &c.c2) != 2 || c.c1 < 1 || c.c2 < 1) {
      std::fprintf(stderr, "error: direction must be C1,C2 with positive integers\n");
      std::exit(kValidation);
    }
    return c;
  };

  if (validate_cmd->parsed()) return cmd_validate(v_path, format);
  if (analyze_cmd->parsed())
    return cmd_analyze(a_path, parse_dir(a_dir), with_prefactor, prefactor_N, format);
  if (verify_cmd->parsed())
    return cmd_verify(f_path, parse_dir(f_dir), N, seed, seed_opt->count() > 0, tol, format);
  if (geometry_cmd->parsed()) return cmd_geometry(g_path, grid);
  return kValidation;
}
