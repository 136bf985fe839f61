#include <catch2/catch_amalgamated.hpp>

#include "oblab/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace oblab;
using nlohmann::json;

namespace {

json base_scenario() {
  json j;
  j["name"] = "test_case";
  j["seed"] = 11;
  j["out"] = "test_out";
  j["domain"] = {{"kind", "interval"}, {"a", 0.0}, {"b", 1.0}};
  j["equation"] = {{"family", "fmce"},
                   {"source", {{"kind", "power"}, {"coeff", -0.9}, {"q", 0.0}}}};
  j["boundary"] = {{"family", "capillary"},
                   {"h", {{"kind", "inverse"}}},
                   {"psi", {{"kind", "affine_z"}, {"value", 0.4},
                            {"z_coeff", -0.05}}}};
  j["eps"] = {1e-3};
  j["mesh"] = {{"n", 32}};
  j["audits"] = {"solve"};
  return j;
}

}  // namespace

TEST_CASE("scenario parses and solves") {
  Scenario sc = parse_scenario(base_scenario());
  std::ostringstream log;
  int code = run_scenario(sc, log);
  INFO(log.str());
  CHECK(code == exit_pass);
}

TEST_CASE("unknown family raises a schema error naming the field") {
  json j = base_scenario();
  j["boundary"]["family"] = "weird";
  try {
    parse_scenario(j);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("boundary.family") != std::string::npos);
  }
}

TEST_CASE("unknown domain kind raises a schema error") {
  json j = base_scenario();
  j["domain"]["kind"] = "torus";
  CHECK_THROWS_AS(parse_scenario(j), SchemaError);
}

TEST_CASE("q = 4 scenario exits with a condition failure") {
  json j = base_scenario();
  j["domain"] = {{"kind", "disk"}, {"radius", 1.0}};
  j["equation"] = {{"family", "fmce"},
                   {"source", {{"kind", "power"}, {"coeff", 1.0}, {"q", 4.0}}}};
  j["boundary"]["psi"] = {{"kind", "affine_z"}, {"value", 0.3},
                          {"z_coeff", -0.02}};
  j["audits"] = {"structure"};
  j.erase("mesh");
  Scenario sc = parse_scenario(j);
  sc.splan.n_dir = 3;
  sc.splan.n_eta = 3;
  sc.splan.n_x = 3;
  sc.splan.n_z = 2;
  sc.lplan.n_dir = 4;
  sc.lplan.n_x = 3;
  sc.lplan.n_z = 2;
  std::ostringstream log;
  int code = run_scenario(sc, log);
  INFO(log.str());
  CHECK(code == exit_condition_fail);
  CHECK(log.str().find("none") != std::string::npos);
  CHECK(log.str().find("B'") != std::string::npos);
}

TEST_CASE("reports are byte-identical for identical scenario and seed") {
  json j = base_scenario();
  j["audits"] = {"solve", "max_principle"};
  auto run_once = [&](const std::string& tag) {
    json jj = j;
    jj["name"] = tag;
    Scenario sc = parse_scenario(jj);
    std::ostringstream log;
    run_scenario(sc, log);
    std::ifstream in("test_out/" + tag + "_fields.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  std::string a = run_once("det_a");
  std::string b = run_once("det_b");
  REQUIRE(!a.empty());
  CHECK(a == b);
}

TEST_CASE("capillary datum at the limit is rejected at parse time") {
  json j = base_scenario();
  j["boundary"]["psi"] = {{"kind", "constant"}, {"value", 1.0}};
  CHECK_THROWS_AS(parse_scenario(j), HypothesisViolation);
}
