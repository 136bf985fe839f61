#pragma once

#include "oblab/boundary.hpp"
#include "oblab/common.hpp"
#include "oblab/estimate.hpp"
#include "oblab/geometry.hpp"
#include "oblab/monotone.hpp"
#include "oblab/nfun.hpp"
#include "oblab/report.hpp"
#include "oblab/solver.hpp"
#include "oblab/structure.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "json.hpp"

namespace oblab {

using nlohmann::json;

// exit codes of the scenario runner
enum ExitCode : int {
  exit_pass = 0,
  exit_condition_fail = 1,
  exit_input_error = 2,
  exit_numerical_failure = 3,
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  Domain domain = Domain::interval(0.0, 1.0);
  std::shared_ptr<EquationCoefficients> equation;
  std::shared_ptr<BoundaryCondition> boundary;
  std::vector<double> eps = {1e-3};
  NMode mode = NMode::cheap;
  MollifyConfig mollify;
  SamplePlan samples;
  NAuditPlan naudit;
  StructurePlan splan;
  LimitPlan lplan;
  Mesh1D mesh;
  std::vector<std::string> audits;
  std::string out_dir = "out";
};

namespace detail {

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (j.contains(key)) return j.at(key).get<T>();
  return fallback;
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw SchemaError(what);
}

inline Domain parse_domain(const json& j) {
  require(j.contains("kind"), "domain.kind missing");
  std::string kind = j.at("kind");
  if (kind == "interval")
    return Domain::interval(get_or(j, "a", 0.0), get_or(j, "b", 1.0));
  if (kind == "disk") return Domain::disk(get_or(j, "radius", 1.0));
  if (kind == "annulus")
    return Domain::annulus(get_or(j, "r_inner", 1.0),
                           get_or(j, "r_outer", 2.0));
  throw SchemaError("unknown domain.kind: " + kind);
}

inline HFunction parse_h(const json& j) {
  std::string kind = get_or<std::string>(j, "kind", "inverse");
  if (kind == "inverse") return HFunction::inverse();
  if (kind == "constant") return HFunction::constant(get_or(j, "value", 1.0));
  if (kind == "power") return HFunction::power(get_or(j, "exponent", 0.0));
  throw SchemaError("unknown boundary.h.kind: " + kind);
}

inline ScalarField parse_psi(const json& j) {
  std::string kind = get_or<std::string>(j, "kind", "constant");
  if (kind == "constant") return ScalarField::constant(get_or(j, "value", 0.0));
  if (kind == "affine_z")
    return ScalarField::affine_z(get_or(j, "value", 0.0),
                                 get_or(j, "z_coeff", 0.0));
  throw SchemaError("unknown boundary.psi.kind: " + kind);
}

inline std::shared_ptr<BoundaryCondition> parse_boundary(const json& j) {
  require(j.contains("family"), "boundary.family missing");
  std::string family = j.at("family");
  ScalarField psi = j.contains("psi") ? parse_psi(j.at("psi"))
                                      : ScalarField::constant(0.0);
  if (family == "capillary") {
    HFunction h = j.contains("h") ? parse_h(j.at("h")) : HFunction::inverse();
    double sup_psi = std::abs(get_or(j.value("psi", json::object()), "value",
                                     0.0)) +
                     4.0 * std::abs(get_or(j.value("psi", json::object()),
                                           "z_coeff", 0.0));
    check_h_capillary(h, sup_psi);
    return std::make_shared<CapillaryBC>(std::move(h), std::move(psi));
  }
  if (family == "power") {
    double q0 = get_or(j, "q0", 0.0), q1 = get_or(j, "q1", 0.0);
    if (q0 - std::abs(q1) < -1.0)
      throw HypothesisViolation("power family requires q(x) >= -1");
    return std::make_shared<PowerBC>(
        [q0, q1](const Vec& x) { return q0 + q1 * x[0]; },
        [q1](const Vec& x) {
          Vec g = Vec::Zero(x.size());
          g[0] = q1;
          return g;
        },
        std::move(psi));
  }
  if (family == "anisotropic") {
    HFunction h = j.contains("h") ? parse_h(j.at("h")) : HFunction::inverse();
    double amp = get_or(j, "amplitude", 0.2);
    return std::make_shared<AnisotropicBC>(
        std::move(h),
        [amp](const Vec& x, double) {
          Mat B = Mat::Identity(x.size(), x.size());
          B(0, 0) += amp * x[0];
          return B;
        },
        std::move(psi));
  }
  if (family == "nonvariational") {
    HFunction h =
        j.contains("h") ? parse_h(j.at("h")) : HFunction::power(-0.5);
    double beta_star = get_or(j, "beta_star", 0.9);
    double tilt = get_or(j, "tilt", 0.25);
    check_h_nonvariational(h, beta_star);
    return std::make_shared<NonvariationalBC>(
        std::move(h),
        [tilt](const Vec& x, double) {
          Vec b = -x / std::max(x.norm(), 1e-12);
          if (b.size() > 1) b[0] += tilt;
          b.normalize();
          return b;
        },
        beta_star, std::move(psi));
  }
  throw SchemaError("unknown boundary.family: " + family);
}

inline std::shared_ptr<const ScalarCoefficient> parse_source(const json& j) {
  if (!j.contains("source")) return std::make_shared<ZeroScalar>();
  const json& s = j.at("source");
  std::string kind = get_or<std::string>(s, "kind", "zero");
  if (kind == "zero") return std::make_shared<ZeroScalar>();
  if (kind == "power")
    return std::make_shared<PowerScalar>(get_or(s, "coeff", 1.0),
                                         get_or(s, "q", 0.0));
  throw SchemaError("unknown equation.source.kind: " + kind);
}

inline std::shared_ptr<EquationCoefficients> parse_equation(const json& j) {
  require(j.contains("family"), "equation.family missing");
  std::string family = j.at("family");
  auto src = parse_source(j);
  if (family == "fmce") return std::make_shared<FmceEq>(src);
  if (family == "uniformly_elliptic")
    return std::make_shared<UniformlyEllipticEq>(src);
  if (family == "capillary_parabolic") {
    double Q = get_or(j, "h1_exponent", 0.0);
    auto h1 = [Q](double v) { return std::pow(v, Q); };
    auto dh1 = [Q](double v) { return Q * std::pow(v, Q - 1.0); };
    check_h1_growth(h1, dh1);
    double H0 = get_or(j, "H", 0.0);
    return std::make_shared<CapillaryParabolicEq>(
        h1, dh1, ScalarField::constant(H0));
  }
  if (family == "generalized_fmce") {
    double alpha = get_or(j, "tau_exponent", 0.0);
    return std::make_shared<GeneralizedFmceEq>(
        [](double v) { return std::exp(-v * v); },
        [](double v) { return -2.0 * v * std::exp(-v * v); },
        [alpha](double v) { return std::pow(v, alpha); },
        [alpha](double v) { return alpha * std::pow(v, alpha - 1.0); }, src);
  }
  throw SchemaError("unknown equation.family: " + family);
}

}  // namespace detail

inline Scenario parse_scenario(const json& j) {
  Scenario sc;
  sc.name = detail::get_or<std::string>(j, "name", "scenario");
  sc.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
  if (j.contains("domain")) sc.domain = detail::parse_domain(j.at("domain"));
  if (j.contains("equation"))
    sc.equation = detail::parse_equation(j.at("equation"));
  if (j.contains("boundary"))
    sc.boundary = detail::parse_boundary(j.at("boundary"));
  if (j.contains("eps")) sc.eps = j.at("eps").get<std::vector<double>>();
  std::string mode = detail::get_or<std::string>(j, "mode", "cheap");
  if (mode == "cheap") {
    sc.mode = NMode::cheap;
  } else if (mode == "mollified") {
    sc.mode = NMode::mollified;
  } else {
    throw SchemaError("unknown mode: " + mode);
  }
  if (j.contains("mollify")) {
    const json& m = j.at("mollify");
    sc.mollify.log2_nodes = detail::get_or(m, "log2_nodes", 14);
    sc.mollify.seed = detail::get_or<std::uint64_t>(m, "seed", sc.seed);
    sc.mollify.eps_prime = detail::get_or(m, "eps_prime", 0.0);
  } else {
    sc.mollify.seed = sc.seed;
  }
  if (j.contains("samples")) {
    const json& s = j.at("samples");
    sc.samples.n_boundary = detail::get_or(s, "n_boundary", 16);
    sc.samples.n_z = detail::get_or(s, "n_z", 5);
    sc.samples.n_dir = detail::get_or(s, "n_dir", 8);
    sc.samples.z_range = detail::get_or(s, "z_range", 2.0);
    if (s.contains("radii"))
      sc.samples.radii = s.at("radii").get<std::vector<double>>();
    sc.naudit.n_states = detail::get_or(s, "n_states", 200);
    sc.naudit.n_second = detail::get_or(s, "n_second", 20);
  }
  sc.samples.seed = sc.seed;
  sc.naudit.seed = sc.seed;
  sc.splan.seed = sc.seed;
  sc.lplan.seed = sc.seed;
  if (j.contains("mesh")) {
    sc.mesh.n = detail::get_or(j.at("mesh"), "n", 64);
    sc.mesh.a = sc.domain.kind() == DomainKind::interval
                    ? sc.domain.interval_a()
                    : 0.0;
    sc.mesh.b = sc.domain.kind() == DomainKind::interval
                    ? sc.domain.interval_b()
                    : 1.0;
  }
  if (j.contains("audits"))
    sc.audits = j.at("audits").get<std::vector<std::string>>();
  sc.out_dir = detail::get_or<std::string>(j, "out", "out");
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SchemaError(std::string("scenario parse error: ") + e.what());
  }
  return parse_scenario(j);
}

// Runs the requested pipelines, writes reports, and returns the exit code.
inline int run_scenario(const Scenario& sc, std::ostream& log = std::cout) {
  namespace fs = std::filesystem;
  fs::create_directories(sc.out_dir);
  json summary;
  summary["name"] = sc.name;
  summary["seed"] = sc.seed;
  bool all_pass = true;

  auto want = [&](const std::string& a) {
    if (sc.audits.empty()) return false;
    if (std::find(sc.audits.begin(), sc.audits.end(), a) != sc.audits.end())
      return true;
    return std::find(sc.audits.begin(), sc.audits.end(), "full") !=
           sc.audits.end();
  };

  try {
    BoundaryConstants cst;
    if (sc.boundary) cst = boundary_constants(*sc.boundary, sc.domain,
                                              sc.samples);
    if (sc.boundary) {
      summary["constants"] = {{"Psi", cst.Psi},   {"beta0", cst.beta0},
                              {"c0", cst.c0},     {"beta1", cst.beta1},
                              {"tau0", cst.tau0}, {"eps_x_K", cst.eps_x_K}};
    }

    if (want("nfun")) {
      auto rep = n_property_audit(*sc.boundary, sc.domain, cst, sc.eps,
                                  sc.naudit, sc.mode, sc.mollify);
      rep.write_csv(sc.out_dir + "/" + sc.name + "_nfun.csv");
      summary["nfun"] = rep.to_json();
      all_pass = all_pass && rep.all_pass();
      log << "[nfun] " << (rep.all_pass() ? "pass" : "FAIL") << "\n";
    }

    if (want("structure")) {
      auto cls = classify_structure(*sc.equation, *sc.boundary, sc.domain, cst,
                                    sc.splan, sc.lplan, sc.eps);
      cls.report.write_csv(sc.out_dir + "/" + sc.name + "_structure.csv");
      summary["classification"] = cls.verdict;
      summary["classification_reasons"] = cls.reasons;
      summary["structure"] = cls.report.to_json();
      log << "[structure] classification: " << cls.verdict << "\n";
      for (const auto& r : cls.reasons) log << "  reason: " << r << "\n";
      all_pass = all_pass && cls.verdict != "none";
    }

    GridSolution sol;
    bool solved = false;
    if (want("solve") || want("max_principle")) {
      SolverOptions opts;
      opts.continuation_levels = 1;
      sol = solve_elliptic(*sc.equation, *sc.boundary, sc.domain, sc.mesh, {},
                           opts);
      solved = true;
      summary["solve"] = {{"residual", sol.residual_inf},
                          {"newton_iters", sol.newton_iters},
                          {"sup_Du", sol.sup_Du()}};
      log << "[solve] residual " << fmt_g(sol.residual_inf) << ", sup|Du| "
          << fmt_g(sol.sup_Du()) << "\n";
      all_pass = all_pass && sol.converged;
    }

    if (want("max_principle") && solved) {
      double m = sol.u.minCoeff(), M = sol.u.maxCoeff();
      if (M - m < 1e-8) M = m + 1e-8;
      auto ric = riccati_eta(1.0, 1.0, m, M);
      auto sub = build_psi(ric.chi, m, M, ric.eta_max);
      auto fields = w_fields(sol, *sc.equation, *sc.boundary, sc.domain, cst,
                             sub, sc.eps.front());
      auto rep = maximum_principle_audit(sol, *sc.equation, *sc.boundary,
                                         sc.domain, cst, sub, fields);
      std::ofstream out(sc.out_dir + "/" + sc.name + "_audit.json");
      out << rep.to_json().dump(2) << "\n";
      summary["max_principle"] = rep.to_json();
      // plot-data CSV: node, w1, w2, L w2
      std::ofstream plot(sc.out_dir + "/" + sc.name + "_fields.csv");
      plot << "x,w1,w2\n";
      for (int i = 0; i < sol.mesh.nodes(); ++i)
        plot << fmt_g(sol.mesh.x(i)) << ',' << fmt_g(fields.w1[i]) << ','
             << fmt_g(fields.w2[i]) << "\n";
      all_pass = all_pass && rep.all_pass();
      log << "[max_principle] " << (rep.all_pass() ? "pass" : "FAIL") << "\n";
    }

    if (want("regularize")) {
      ScalarFunction1D f;
      f.eval = [](double x) { return 1.0 / (1.0 + x); };
      f.tag = Monotonicity::decreasing;
      auto F = iterated_average(f);
      auto rep = star_check(F);
      summary["regularize"] = {{"worst_margin", rep.worst_margin},
                               {"worst_x", rep.worst_x}};
      all_pass = all_pass && rep.pass(1e-7);
    }

    if (want("riccati")) {
      auto res = riccati_eta(1.0, 0.0, 0.0, 1.0);
      summary["riccati"] = {{"eta_max", res.eta_max},
                            {"capped", res.capped}};
    }

    std::ofstream sum(sc.out_dir + "/" + sc.name + "_summary.json");
    sum << summary.dump(2) << "\n";
  } catch (const SchemaError& e) {
    log << "input error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const HypothesisViolation& e) {
    log << "hypothesis violation: " << e.what() << "\n";
    return exit_condition_fail;
  } catch (const Error& e) {
    log << "numerical failure: " << e.what() << "\n";
    return exit_numerical_failure;
  }
  return all_pass ? exit_pass : exit_condition_fail;
}

inline int run_scenario_file(const std::string& path,
                             std::ostream& log = std::cout) {
  try {
    Scenario sc = load_scenario(path);
    return run_scenario(sc, log);
  } catch (const SchemaError& e) {
    log << "input error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const HypothesisViolation& e) {
    log << "hypothesis violation: " << e.what() << "\n";
    return exit_condition_fail;
  }
}

}  // namespace oblab
