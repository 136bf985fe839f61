// Command-line front end: scenario runner plus direct access to the
// regularization, N-function, structure, Riccati, solver and audit pipelines.

#include "oblab/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace oblab;

namespace {

int cmd_regularize(const std::string& fn, const std::string& out) {
  ScalarFunction1D f;
  if (fn == "rational") {
    f.eval = [](double x) { return 1.0 / (1.0 + x); };
  } else if (fn == "exp") {
    f.eval = [](double x) { return std::exp(-x) + 0.25; };
  } else if (fn == "step") {
    f.eval = [](double x) { return x < 1.0 ? 2.0 : 1.0; };
  } else {
    std::cerr << "unknown function id: " << fn << "\n";
    return exit_input_error;
  }
  f.tag = Monotonicity::decreasing;
  auto F = iterated_average(f);
  auto rep = star_check(F);
  std::cout << "worst *-decrease margin " << fmt_g(rep.worst_margin)
            << " at x=" << fmt_g(rep.worst_x) << "\n";
  if (!out.empty()) {
    std::ofstream os(out);
    os << "x,F,dF,d2F,margin\n";
    for (const auto& e : rep.entries) {
      double v = F.value(e.x);
      os << fmt_g(e.x) << ',' << fmt_g(v) << ',' << fmt_g(F.derivative(e.x))
         << ',' << fmt_g(F.second_derivative(e.x)) << ','
         << fmt_g(std::min(std::min(e.margin_lower_d1, e.margin_upper_d1),
                           std::min(e.margin_lower_d2, e.margin_upper_d2)))
         << "\n";
    }
  }
  return rep.pass(1e-7) ? exit_pass : exit_condition_fail;
}

json default_boundary(double psi0, double psi_z) {
  return json{{"family", "capillary"},
              {"h", {{"kind", "inverse"}}},
              {"psi", {{"kind", "affine_z"}, {"value", psi0},
                       {"z_coeff", psi_z}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for oblique-derivative gradient bounds"};
  app.require_subcommand(1);

  std::string out_dir = "out";
  std::uint64_t seed = 1;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "base RNG seed");

  // run <scenario.json>
  std::string scenario_path;
  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("scenario", scenario_path, "scenario JSON path")
      ->required();

  // regularize
  std::string fn = "rational", reg_out;
  auto* reg = app.add_subcommand("regularize", "monotone regularization demo");
  reg->add_option("--fn", fn, "function id: rational|exp|step");
  reg->add_option("--csv", reg_out, "write sample table CSV");

  // riccati
  double A = 1.0, B = 0.0, m = 0.0, M = 1.0;
  auto* ric = app.add_subcommand("riccati", "largest admissible eta");
  ric->add_option("--A", A);
  ric->add_option("--B", B);
  ric->add_option("--m", m);
  ric->add_option("--M", M);

  // nfun / structure / solve / audit share a default capillary setup
  double eps = 1e-3, psi0 = 0.3, psi_z = 0.0, q = 3.5;
  int n_states = 100, mesh_n = 64, nodes_log2 = 14;
  std::string mode = "cheap";
  auto* nf = app.add_subcommand("nfun", "N-function property audit");
  nf->add_option("--eps", eps);
  nf->add_option("--samples", n_states);
  nf->add_option("--psi", psi0);
  nf->add_option("--mode", mode, "cheap|mollified");
  nf->add_option("--nodes-log2", nodes_log2);

  auto* st = app.add_subcommand("structure", "structure classification");
  st->add_option("--q", q, "source exponent of fmce + |p|^q");
  st->add_option("--psi", psi0);

  auto* so = app.add_subcommand("solve", "solve the capillary interval case");
  so->add_option("--mesh", mesh_n);
  so->add_option("--psi", psi0);

  auto* au = app.add_subcommand("audit", "solve + maximum-principle audit");
  au->add_option("--mesh", mesh_n);
  au->add_option("--eps", eps);
  au->add_option("--psi", psi0);

  auto* cat = app.add_subcommand("catalog", "list catalog families");
  bool list = false;
  cat->add_flag("list", list, "list");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_scenario_file(scenario_path);
    if (*reg) return cmd_regularize(fn, reg_out);
    if (*ric) {
      auto res = riccati_eta(A, B, m, M);
      std::cout << "eta_max " << fmt_g(res.eta_max)
                << (res.capped ? " (capped)" : "") << "\n";
      return exit_pass;
    }
    if (*cat) {
      std::cout << "boundary families: capillary, anisotropic, power, "
                   "nonvariational, custom\n"
                << "equation families: fmce, generalized_fmce, "
                   "uniformly_elliptic, capillary_parabolic, custom\n"
                << "domains: interval, disk, annulus, level_set\n";
      return exit_pass;
    }

    json j;
    j["name"] = "cli";
    j["seed"] = seed;
    j["out"] = out_dir;
    j["boundary"] = default_boundary(psi0, psi_z);
    j["eps"] = {eps};
    if (*nf) {
      j["domain"] = {{"kind", "disk"}, {"radius", 1.0}};
      j["equation"] = {{"family", "fmce"}};
      j["mode"] = mode;
      j["mollify"] = {{"log2_nodes", nodes_log2}};
      j["samples"] = {{"n_states", n_states}};
      j["audits"] = {"nfun"};
    } else if (*st) {
      j["domain"] = {{"kind", "disk"}, {"radius", 1.0}};
      j["equation"] = {{"family", "fmce"},
                       {"source", {{"kind", "power"}, {"coeff", 1.0},
                                   {"q", q}}}};
      j["boundary"] = default_boundary(psi0, -0.02);
      j["audits"] = {"structure"};
    } else if (*so) {
      j["domain"] = {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
      j["equation"] = {{"family", "fmce"},
                       {"source", {{"kind", "power"}, {"coeff", -0.9272},
                                   {"q", 0.0}}}};
      j["boundary"] = default_boundary(psi0, -0.05);
      j["mesh"] = {{"n", mesh_n}};
      j["audits"] = {"solve"};
    } else if (*au) {
      j["domain"] = {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
      j["equation"] = {{"family", "fmce"},
                       {"source", {{"kind", "power"}, {"coeff", -0.9272},
                                   {"q", 0.0}}}};
      j["boundary"] = default_boundary(psi0, -0.05);
      j["mesh"] = {{"n", mesh_n}};
      j["audits"] = {"solve", "max_principle"};
    }
    Scenario sc = parse_scenario(j);
    return run_scenario(sc);
  } catch (const SchemaError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return exit_input_error;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return exit_numerical_failure;
  }
}
