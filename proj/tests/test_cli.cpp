#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "localscore/cli.hpp"
#include "localscore/expr.hpp"

using nlohmann::json;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
  json j;
};

RunResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = localscore::cli::run(args, out, err);
  RunResult r{code, out.str(), err.str(), {}};
  if (!r.out.empty() && (r.out[0] == '{' || r.out[0] == '[')) r.j = json::parse(r.out);
  return r;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path);
  f << body;
}

}  // namespace

TEST_CASE("generate subcommand emits the rule and its checks") {
  auto r = run({"generate", "--phi", "-(1/2)*q1^2/q0"});
  REQUIRE(r.code == 0);
  CHECK(r.j["s"] == "q2/q0 - (1/2)*q1^2/q0^2");
  CHECK(r.j["order"] == 2);
  CHECK(r.j["checks"]["key_equation"]["passed"] == true);
  CHECK(r.j["checks"]["homogeneity"]["passed"] == true);
  CHECK(r.j["standard_gauge"] == "q2 - (1/2)*q1^2/q0");
}

TEST_CASE("parse subcommand") {
  auto r = run({"parse", "--expr", "q0*(q1/q0) + 0*q2"});
  REQUIRE(r.code == 0);
  CHECK(r.j["canonical"] == "q1");
  CHECK(r.j["order"] == 1);
  CHECK(r.j["homogeneity_degree"] == "1");
}

TEST_CASE("verify subcommand on a score function") {
  auto r = run({"verify", "--s", "q2/q0 - (1/2)*q1^2/q0^2"});
  REQUIRE(r.code == 0);
  CHECK(r.j["checks"]["key_equation"]["passed"] == true);
  CHECK(r.j["order_is_even"] == true);

  auto bad = run({"verify", "--s", "-ln(q0)"});
  CHECK(bad.j["checks"]["key_equation"]["passed"] == false);

  CHECK(run({"verify"}).code == 1);  // needs --s or --phi
}

TEST_CASE("divergence subcommand with density spec files") {
  write_file("cli_p.json", R"({"logdensity": "-x^2/2", "domain": ["-inf", "inf"]})");
  write_file("cli_q.json", R"({"logdensity": "-(x-1)^2/2", "domain": ["-inf", "inf"]})");
  auto r = run({"divergence", "--phi", "-(1/2)*q1^2/q0", "--p", "cli_p.json", "--q",
                "cli_q.json"});
  REQUIRE(r.code == 0);
  CHECK(std::abs(r.j["d0"].get<double>() - 0.5) < 1e-6);
  CHECK(r.j["boundary"]["lower"]["verdict"] == "vanishes");
  CHECK(r.j["boundary"]["upper"]["verdict"] == "vanishes");
  CHECK(r.j["total"].get<double>() == doctest::Approx(0.5).epsilon(1e-6));
  std::remove("cli_p.json");
  std::remove("cli_q.json");
}

TEST_CASE("estimate subcommand: catalogue rule on CSV data") {
  write_file("cli_model.json",
             R"({"logdensity": "-x^2/2 + t1*x", "domain": ["-inf", "inf"], "params": ["t1"]})");
  write_file("cli_data.csv", "0.5\n1.5\n-0.4\n2.4\n");
  auto r = run({"estimate", "--rule", "hyvarinen", "--model", "cli_model.json", "--data",
                "cli_data.csv"});
  REQUIRE(r.code == 0);
  CHECK(r.j["method"] == "newton");
  CHECK(r.j["theta"][0].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.j["n"] == 4);

  // degenerate case surfaces as a diagnostic, not an estimate
  write_file("cli_expmodel.json",
             R"({"logdensity": "-t1*x", "domain": [0, "inf"], "params": ["t1"]})");
  write_file("cli_expdata.csv", "0.5\n1.5\n0.4\n");
  auto d = run({"estimate", "--rule", "hyvarinen", "--model", "cli_expmodel.json", "--data",
                "cli_expdata.csv"});
  REQUIRE(d.code == 0);
  CHECK(d.j["method"] == "degenerate");
  CHECK(d.j["degenerate"] == true);
  CHECK(d.j.contains("diagnostic"));

  auto m = run({"estimate", "--rule", "modified", "--model", "cli_expmodel.json", "--data",
                "cli_expdata.csv"});
  REQUIRE(m.code == 0);
  double sx = 0.5 + 1.5 + 0.4, sxx = 0.25 + 2.25 + 0.16;
  CHECK(m.j["theta"][0].get<double>() == doctest::Approx(2 * sx / sxx).epsilon(1e-10));

  std::remove("cli_model.json");
  std::remove("cli_data.csv");
  std::remove("cli_expmodel.json");
  std::remove("cli_expdata.csv");
}

TEST_CASE("transform subcommand matches the worked example") {
  auto r = run({"transform", "--gamma", "ln(x)", "--delta", "exp(x)", "--phi",
                "-(1/2)*q1^2/q0"});
  REQUIRE(r.code == 0);
  CHECK(r.j["alpha"] == "x");
  CHECK(r.j["boundary_condition"] ==
        localscore::QFunction::parse("x^2*p1 - x^2*p0*q1/q0").str());
  CHECK(r.j["checks"]["key_equation"]["passed"] == true);
  CHECK(r.j["transport_checks"]["boundary_contraction"] == true);
  // the transported generator produces the modified rule of the base chart
  CHECK(r.j["s"] == localscore::QFunction::parse(
                        "x^2*(q2/q0 - (1/2)*q1^2/q0^2) + 2*x*q1/q0 + 1/2")
                        .str());
  auto v = run({"verify", "--s", r.j["s"].get<std::string>()});
  CHECK(v.j["checks"]["key_equation"]["passed"] == true);
}

TEST_CASE("deterministic output: same inputs and seed give identical bytes") {
  write_file("cli_det_model.json",
             R"({"logdensity": "-t1*x", "domain": [0, "inf"], "params": ["t1"]})");
  write_file("cli_det.csv", "0.5\n1.5\n0.4\n2.2\n");
  auto a = run({"estimate", "--rule", "modified", "--model", "cli_det_model.json", "--data",
                "cli_det.csv", "--seed", "3"});
  auto b = run({"estimate", "--rule", "modified", "--model", "cli_det_model.json", "--data",
                "cli_det.csv", "--seed", "3"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  auto t1 = run({"transform", "--gamma", "2*x", "--delta", "x/2", "--phi", "-q1^2/q0"});
  auto t2 = run({"transform", "--gamma", "2*x", "--delta", "x/2", "--phi", "-q1^2/q0"});
  CHECK(t1.out == t2.out);
  std::remove("cli_det_model.json");
  std::remove("cli_det.csv");
}

TEST_CASE("selftest subcommand wraps the acceptance suite") {
  auto r = run({"selftest", "--seed", "3"});
  CHECK(r.code == 0);
  CHECK(r.j["all_passed"] == true);
  CHECK(r.j["criteria"].size() == 10);
  CHECK(r.j["seed"] == 3);
}

TEST_CASE("exit codes: usage vs domain errors") {
  CHECK(run({"nonsense"}).code == 2);
  CHECK(run({"generate"}).code == 2);                          // missing --phi
  CHECK(run({"generate", "--phi", "q1/q0"}).code == 1);        // not 1-homogeneous
  CHECK(run({"generate", "--phi", "q1 +* q0"}).code == 1);     // expression error
  CHECK(run({"estimate", "--rule", "hyvarinen", "--model", "missing.json", "--data",
             "missing.csv"})
            .code == 1);
  CHECK(run({}).code == 2);
}

TEST_CASE("--help documents every subcommand and flag from one source of truth") {
  auto r = run({"--help"});
  CHECK(r.code == 0);
  for (const char* name :
       {"parse", "generate", "verify", "divergence", "estimate", "transform", "selftest",
        "--pretty", "--output"}) {
    CHECK(r.out.find(name) != std::string::npos);
  }
  auto est_help = run({"estimate", "--help"});
  for (const char* flag : {"--rule", "--phi", "--model", "--data", "--column", "--seed"}) {
    CHECK(est_help.out.find(flag) != std::string::npos);
  }
}

TEST_CASE("pretty and file output") {
  auto pretty = run({"--pretty", "parse", "--expr", "q0"});
  CHECK(pretty.out.find('\n') != std::string::npos);
  CHECK(pretty.out.find("  ") != std::string::npos);

  auto to_file = run({"--output", "cli_out.json", "parse", "--expr", "q0"});
  CHECK(to_file.code == 0);
  CHECK(to_file.out.empty());
  std::ifstream f("cli_out.json");
  json j;
  f >> j;
  CHECK(j["canonical"] == "q0");
  std::remove("cli_out.json");
}
