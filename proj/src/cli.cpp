#include "localscore/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "localscore/charts.hpp"
#include "localscore/estimation.hpp"
#include "localscore/operators.hpp"
#include "localscore/propriety.hpp"
#include "localscore/rules.hpp"
#include "localscore/selftest.hpp"

namespace localscore::cli {

namespace {

using nlohmann::json;

json json_order(int order) {
  if (order == kOrderQFree) return nullptr;  // q-free ("order -infinity")
  return order;
}

json json_check(const rules::CheckStatus& s) {
  return json{{"passed", s.passed}, {"exact", s.exact}};
}

json json_zero(const ZeroCheck& z) { return json{{"passed", z.zero}, {"exact", z.exact}}; }

double parse_bound(const json& v, const char* which) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw Error(std::string("domain ") + which + " must be a number, \"inf\" or \"-inf\"");
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

DensitySpec density_from_file(const std::string& path) {
  json j = load_json_file(path);
  if (!j.contains("logdensity") || !j.contains("domain") || !j["domain"].is_array() ||
      j["domain"].size() != 2)
    throw Error(path + ": a density spec is {\"logdensity\": \"<expr>\", \"domain\": [a, b]}");
  double lo = parse_bound(j["domain"][0], "lower bound");
  double hi = parse_bound(j["domain"][1], "upper bound");
  return DensitySpec(QFunction::parse(j["logdensity"].get<std::string>()), lo, hi);
}

estimation::ParametricModel model_from_file(const std::string& path) {
  json j = load_json_file(path);
  if (!j.contains("logdensity") || !j.contains("domain") || !j.contains("params"))
    throw Error(path +
                ": a model is {\"logdensity\": \"<expr>\", \"domain\": [a, b], \"params\": "
                "[\"t1\", ...]}");
  estimation::ParametricModel m;
  m.logdensity = QFunction::parse(j["logdensity"].get<std::string>());
  m.lo = parse_bound(j["domain"][0], "lower bound");
  m.hi = parse_bound(j["domain"][1], "upper bound");
  for (const auto& p : j["params"]) m.params.push_back(p.get<std::string>());
  if (j.contains("bounds")) {
    std::vector<std::pair<double, double>> bs;
    for (const auto& b : j["bounds"]) bs.emplace_back(b[0].get<double>(), b[1].get<double>());
    m.param_bounds = std::move(bs);
  }
  return m;
}

const char* verdict_name(propriety::LimitVerdict v) {
  switch (v) {
    case propriety::LimitVerdict::Vanishes: return "vanishes";
    case propriety::LimitVerdict::Nonzero: return "nonzero";
    case propriety::LimitVerdict::Divergent: return "divergent";
    case propriety::LimitVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

json json_endpoint(const propriety::EndpointDiagnostic& d) {
  json seq = json::array();
  for (const auto& [x, v] : d.sequence) seq.push_back(json::array({x, v}));
  return json{{"verdict", verdict_name(d.verdict)}, {"limit", d.limit}, {"sequence", seq}};
}

const char* method_name(estimation::Method m) {
  switch (m) {
    case estimation::Method::ClosedForm: return "closed_form";
    case estimation::Method::Newton: return "newton";
    case estimation::Method::NelderMead: return "nelder_mead";
    case estimation::Method::Degenerate: return "degenerate";
  }
  return "?";
}

struct Output {
  bool pretty = false;
  std::string path;

  void emit(const json& j, std::ostream& out) const {
    std::string text = pretty ? j.dump(2) : j.dump();
    if (path.empty()) {
      out << text << "\n";
    } else {
      std::ofstream f(path);
      if (!f) throw Error("cannot write output file: " + path);
      f << text << "\n";
    }
  }
};

std::uint64_t env_seed() {
  if (const char* s = std::getenv("LOCALSCORE_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw Error("LOCALSCORE_SEED is not an integer");
    }
  }
  return 0;
}

rules::ScoringRule rule_from_flags(const std::string& name, const std::string& phi_text) {
  if (!name.empty() && !phi_text.empty())
    throw Error("give either --rule or --phi, not both");
  if (!name.empty()) return rules::by_name(name);
  if (!phi_text.empty()) return rules::generate(QFunction::parse(phi_text));
  throw Error("one of --rule or --phi is required");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"proper local scoring rules: generation, verification, divergence, estimation"};
  app.require_subcommand(1);

  Output output;
  app.add_flag("--pretty", output.pretty, "indent the JSON output");
  app.add_option("--output", output.path, "write the JSON to a file instead of stdout");

  // parse
  auto* cmd_parse = app.add_subcommand("parse", "parse an expression and print its normal form");
  std::string parse_expr;
  cmd_parse->add_option("--expr", parse_expr, "expression")->required();

  // generate
  auto* cmd_gen = app.add_subcommand("generate", "generate the key rule of a 1-homogeneous phi");
  std::string gen_phi;
  cmd_gen->add_option("--phi", gen_phi, "generator expression")->required();

  // verify
  auto* cmd_verify = app.add_subcommand("verify", "check key equation / homogeneity / parity");
  std::string verify_s, verify_phi;
  cmd_verify->add_option("--s", verify_s, "score function to verify");
  cmd_verify->add_option("--phi", verify_phi, "generator to verify");

  // divergence
  auto* cmd_div = app.add_subcommand("divergence", "divergence decomposition d = d0 + d+ + d-");
  std::string div_phi, div_p, div_q;
  cmd_div->add_option("--phi", div_phi, "1-homogeneous generator")->required();
  cmd_div->add_option("--p", div_p, "density spec JSON file for P")->required();
  cmd_div->add_option("--q", div_q, "density spec JSON file for Q")->required();

  // estimate
  auto* cmd_est = app.add_subcommand("estimate", "score-matching estimation on data");
  std::string est_rule, est_phi, est_model, est_data;
  int est_column = 0;
  std::uint64_t est_seed = env_seed();
  cmd_est->add_option("--rule", est_rule, "catalogue rule name (hyvarinen, modified, powerK)");
  cmd_est->add_option("--phi", est_phi, "generator expression instead of a catalogue name");
  cmd_est->add_option("--model", est_model, "model JSON file")->required();
  cmd_est->add_option("--data", est_data, "data file (one value per line, or CSV)")->required();
  cmd_est->add_option("--column", est_column, "0-based CSV column");
  cmd_est->add_option("--seed", est_seed, "random seed (default: LOCALSCORE_SEED or 0)");

  // transform
  auto* cmd_tr = app.add_subcommand("transform", "pull a generator back through a chart");
  std::string tr_gamma, tr_delta, tr_phi;
  int tr_order = 4;
  cmd_tr->add_option("--gamma", tr_gamma, "chart map, an increasing expression in x")->required();
  cmd_tr->add_option("--delta", tr_delta, "inverse of gamma, as an expression in x")->required();
  cmd_tr->add_option("--phi", tr_phi, "generator in the transformed representation")->required();
  cmd_tr->add_option("--order", tr_order, "coefficient table depth (default 4)");

  // selftest
  auto* cmd_self = app.add_subcommand("selftest", "run the full acceptance suite");
  std::uint64_t self_seed = env_seed();
  cmd_self->add_option("--seed", self_seed, "random seed (default: LOCALSCORE_SEED or 0)");

  for (auto* sub : {cmd_parse, cmd_gen, cmd_verify, cmd_div, cmd_est, cmd_tr, cmd_self})
    sub->fallthrough();

  std::vector<const char*> argv;
  argv.push_back("localscore");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    json j;
    if (*cmd_parse) {
      QFunction f = QFunction::parse(parse_expr);
      j["input"] = parse_expr;
      j["canonical"] = f.str();
      j["order"] = json_order(f.order());
      auto h = ops::homogeneity_degree(f);
      j["homogeneity_degree"] = h ? json(to_string(*h)) : json(nullptr);
    } else if (*cmd_gen) {
      auto rule = rules::generate(QFunction::parse(gen_phi));
      j["phi"] = rule.generator->str();
      j["s"] = rule.s.str();
      j["order"] = json_order(rule.s.order());
      j["checks"] = {{"key_equation", json_check(rule.key_equation)},
                     {"homogeneity", json_check(rule.zero_homogeneous)}};
      j["standard_gauge"] = rules::standard_gauge(rule).str();
    } else if (*cmd_verify) {
      if (verify_s.empty() == verify_phi.empty())
        throw Error("verify needs exactly one of --s or --phi");
      if (!verify_phi.empty()) {
        QFunction phi = QFunction::parse(verify_phi);
        auto h = ops::homogeneity_degree(phi);
        j["phi"] = phi.str();
        j["homogeneity_degree"] = h ? json(to_string(*h)) : json(nullptr);
        bool one_homog = h && *h == 1;
        j["is_generator"] = one_homog;
        if (one_homog) {
          auto rule = rules::generate(phi);
          j["s"] = rule.s.str();
          j["order"] = json_order(rule.s.order());
          j["checks"] = {{"key_equation", json_check(rule.key_equation)},
                         {"homogeneity", json_check(rule.zero_homogeneous)}};
          int m = rule.s.order();
          j["order_is_even"] = (m == kOrderQFree) || (m % 2 == 0);
        }
      } else {
        QFunction s = QFunction::parse(verify_s);
        j["s"] = s.str();
        j["order"] = json_order(s.order());
        j["checks"] = {{"key_equation", json_zero(ops::L(s).is_zero())},
                       {"homogeneity", json_zero(ops::E(s).is_zero())}};
        int m = s.order();
        j["order_is_even"] = (m == kOrderQFree) || (m % 2 == 0);
      }
    } else if (*cmd_div) {
      QFunction phi = QFunction::parse(div_phi);
      DensitySpec P = density_from_file(div_p);
      DensitySpec Q = density_from_file(div_q);
      auto rep = propriety::divergence_report(phi, P, Q);
      j["d0"] = rep.d0;
      j["quadrature_abs_err"] = rep.quadrature_abs_err;
      j["d_plus"] = rep.d_plus;
      j["d_minus"] = rep.d_minus;
      j["total"] = rep.total;
      j["boundary"] = {{"lower", json_endpoint(rep.boundary.lower)},
                       {"upper", json_endpoint(rep.boundary.upper)}};
      j["boundary_expr"] = propriety::boundary_divergence_expr(phi).str();
    } else if (*cmd_est) {
      auto rule = rule_from_flags(est_rule, est_phi);
      auto model = model_from_file(est_model);
      auto data = estimation::read_data_file(est_data, est_column);
      auto res = estimation::estimate(rule, model, data, est_seed);
      j["method"] = method_name(res.method);
      j["degenerate"] = res.degenerate;
      if (res.degenerate) {
        j["diagnostic"] = res.diagnostic;
      } else {
        j["theta"] = res.theta;
        j["total_score"] = res.total_score;
        j["score_gradient_norm"] = res.score_gradient_norm;
        j["iterations"] = res.iterations;
      }
      j["n"] = data.size();
      j["score"] = estimation::score_of_model(rule, model).str();
    } else if (*cmd_tr) {
      auto chart = charts::ChartMap::make(QFunction::parse(tr_gamma), QFunction::parse(tr_delta),
                                          tr_order);
      QFunction phibar = QFunction::parse(tr_phi);
      QFunction phi = charts::transport_generator(chart, phibar);
      auto rule = rules::generate(phi);
      j["gamma"] = chart.gamma().str();
      j["delta"] = chart.delta().str();
      j["alpha"] = chart.alpha().str();
      j["generator"] = phi.str();
      j["s"] = rule.s.str();
      j["checks"] = {{"key_equation", json_check(rule.key_equation)},
                     {"homogeneity", json_check(rule.zero_homogeneous)}};
      j["boundary_condition"] = charts::transport_boundary_condition(chart, phibar).str();
      auto rep = charts::verify_operator_transport(chart, phibar, 0);
      j["transport_checks"] = {{"d_transport", json_zero(rep.d_transport)},
                               {"l_transport", json_zero(rep.l_transport)},
                               {"ratio_d_transport", json_zero(rep.ratio_d_transport)},
                               {"boundary_contraction", rep.boundary_transport},
                               {"boundary_max_gap", rep.boundary_max_gap}};
    } else if (*cmd_self) {
      auto summary = selftest::run(self_seed);
      j["seed"] = summary.seed;
      j["all_passed"] = summary.all_passed;
      json arr = json::array();
      for (const auto& cr : summary.criteria) {
        arr.push_back({{"id", cr.id},
                       {"title", cr.title},
                       {"passed", cr.passed},
                       {"detail", cr.detail}});
      }
      j["criteria"] = arr;
      output.emit(j, out);
      return summary.all_passed ? 0 : 1;
    }
    output.emit(j, out);
    return 0;
  } catch (const ParseError& e) {
    err << "expression error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace localscore::cli
