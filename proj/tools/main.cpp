#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "polyclf/error.hpp"
#include "polyclf/io.hpp"
#include "polyclf/pipeline.hpp"
#include "polyclf/sim.hpp"
#include "polyclf/synth.hpp"

using namespace polyclf;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kSolver = 3, kVerify = 4 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::ModeMismatch:
    case ErrorCode::Io:
    case ErrorCode::StartOutOfDomain:
    case ErrorCode::AssumptionViolated:
    case ErrorCode::TreeTooLarge:
      return kUsage;
    case ErrorCode::Infeasible:
    case ErrorCode::Unbounded:
    case ErrorCode::SolverFailure:
    case ErrorCode::NotStabilizable:
      return kSolver;
    default:
      return kFailure;
  }
}

struct Common {
  std::string problem;
  std::string out;
  std::uint64_t seed = 1;
};

Vec parse_point(const std::string& s) {
  std::vector<double> vals;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad coordinate '" + tok + "' in '" + s + "'");
    }
  }
  return Eigen::Map<Vec>(vals.data(), static_cast<int>(vals.size()));
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_file(out, text);
}

SynthesisSpec spec_of(const Problem& p, const ResultArtifact& r) {
  if (!r.result.optimal()) throw Error(ErrorCode::Infeasible, "result is not optimal");
  return make_spec(p, r.tmpl, r.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polyhedral control Lyapunov function synthesis"};
  app.require_subcommand(1);
  int rc = kOk;

  // template
  Common tc;
  std::string strategy;
  TemplateConfig tcfg;
  int f2 = -1, N = -1;
  auto* t = app.add_subcommand("template", "build a configuration triplet");
  t->add_option("--problem", tc.problem, "problem JSON")->required();
  t->add_option("--template", strategy, "strategy: s1, s2, s3 or anchored (default s3 / anchored)");
  t->add_option("--f1", tcfg.f1, "domain rows");
  t->add_option("--f2", f2, "interior rows (default 37 / 83)");
  t->add_option("--N", N, "horizon (default 5 / 7)");
  t->add_option("--lambda", tcfg.lambda, "contraction factor of the S3 domain");
  t->add_option("--seed", tc.seed, "random seed");
  t->add_option("--out", tc.out, "output file (stdout if omitted)");
  t->callback([&] {
    const Problem p = load_problem(tc.problem);
    tcfg.strategy = strategy.empty() ? (p.robust() ? Strategy::Anchored : Strategy::S3)
                                     : strategy_from_string(strategy);
    tcfg.f2 = f2 >= 0 ? f2 : (p.robust() ? 83 : 37);
    tcfg.N = N >= 0 ? N : (p.robust() ? 7 : 5);
    tcfg.seed = tc.seed;
    const auto a = build_template(p, tcfg);
    std::fprintf(stderr, "f = %d, v = %d, e = %d\n", a.triplet.num_facets(), a.triplet.num_vertices(),
                 a.triplet.num_edge_rows());
    emit(tc.out, template_json(a));
  });

  // synth
  Common sc;
  std::string tmpl_path, objective = "infdist";
  SynthConfig scfg;
  auto* s = app.add_subcommand("synth", "solve the CLF synthesis program");
  s->add_option("--problem", sc.problem, "problem JSON")->required();
  s->add_option("--template", tmpl_path, "template artifact")->required();
  s->add_option("--lambda", scfg.lambda, "contraction factor");
  s->add_option("--objective", objective, "linear or infdist")->check(CLI::IsMember({"linear", "infdist"}));
  s->add_flag("--freeze-z1", scfg.freeze_z1, "fix the domain rows at z_bar");
  s->add_option("--out", sc.out, "output file (stdout if omitted)");
  s->callback([&] {
    const Problem p = load_problem(sc.problem);
    ResultArtifact r;
    r.problem = p.name;
    r.tmpl = parse_template(read_file(tmpl_path));
    scfg.objective = objective == "linear" ? ObjectiveKind::Linear : ObjectiveKind::InfDistance;
    r.config = scfg;
    r.result = synthesize(make_spec(p, r.tmpl, scfg));
    const auto& res = r.result;
    std::fprintf(stderr, "%s: objective %.9g, %d iterations, %.2f s, %d counted constraints\n",
                 to_string(res.status).c_str(), res.objective, res.iterations, res.seconds,
                 res.size.counted_constraints);
    emit(sc.out, result_json(r));
    if (!res.optimal()) rc = kSolver;
  });

  // bounds
  Common bc;
  std::string btmpl;
  int bN = -1;
  auto* b = app.add_subcommand("bounds", "compute zeta^N for a template");
  b->add_option("--problem", bc.problem, "problem JSON")->required();
  b->add_option("--template", btmpl, "template artifact")->required();
  b->add_option("--N", bN, "horizon (default: the template's)");
  b->add_option("--out", bc.out, "output file (stdout if omitted)");
  b->callback([&] {
    const Problem p = load_problem(bc.problem);
    const auto a = parse_template(read_file(btmpl));
    const int n = bN >= 0 ? bN : a.config.N;
    const Mat G1 = a.triplet.F.topLeftCorner(a.triplet.f1, a.triplet.state_dim());
    const StageCost cost = problem_cost(p, G1, a.target_zs);
    ZetaOptions zo;
    zo.max_horizon = std::max(n, zo.max_horizon);
    const QuadForm P = problem_lqr(p);
    const Vec zeta = p.robust() ? zeta_minmax(a.triplet.F, p.sys, *p.uncertainty, cost, nullptr, n, zo)
                                : zeta_nominal(a.triplet.F, p.sys, cost, &P, n, zo);
    emit(bc.out, vector_json(zeta));
  });

  // verify
  Common vc;
  std::string vres;
  int samples = 2000, u_res = 201;
  auto* v = app.add_subcommand("verify", "sample the CLF inequality");
  v->add_option("--problem", vc.problem, "problem JSON")->required();
  v->add_option("--result", vres, "result artifact")->required();
  v->add_option("--samples", samples, "number of samples");
  v->add_option("--u-res", u_res, "input grid resolution");
  v->add_option("--seed", vc.seed, "random seed");
  v->add_option("--out", vc.out, "output file (stdout if omitted)");
  v->callback([&] {
    const Problem p = load_problem(vc.problem);
    const auto r = parse_result(read_file(vres));
    const auto rep = verify_clf(r.result, spec_of(p, r), samples, u_res, vc.seed);
    std::fprintf(stderr, "%d samples, %d violations, min residual %.3g\n", rep.samples, rep.violations,
                 rep.min_residual);
    emit(vc.out, report_json(rep));
    if (!rep.ok()) rc = kVerify;
  });

  // simulate
  Common mc;
  std::string mres, policy = "none";
  std::vector<std::string> x0s;
  int steps = 50;
  bool from_vertices = false;
  auto* m = app.add_subcommand("simulate", "closed-loop runs under the interpolated feedback");
  m->add_option("--problem", mc.problem, "problem JSON")->required();
  m->add_option("--result", mres, "result artifact")->required();
  m->add_option("--x0", x0s, "initial state 'x1,x2' (repeatable)");
  m->add_flag("--from-vertices", from_vertices, "also start from every vertex of dom(M)");
  m->add_option("--policy", policy, "none, plus, minus, cycle or greedy")
      ->check(CLI::IsMember({"none", "plus", "minus", "cycle", "greedy"}));
  m->add_option("--steps", steps, "steps per run");
  m->add_option("--out", mc.out, "output directory")->required();
  m->callback([&] {
    const Problem p = load_problem(mc.problem);
    const auto r = parse_result(read_file(mres));
    const auto spec = spec_of(p, r);
    const auto c = make_controller(spec, r.result);
    std::vector<Vec> starts;
    for (const auto& x : x0s) starts.push_back(parse_point(x));
    if (from_vertices)
      for (const auto& vx : enumerate_vertices(c.function().domain())) starts.push_back(vx.point);
    const UncertaintyModel* unc = p.uncertainty ? &*p.uncertainty : nullptr;
    DisturbancePolicy pol = NoDisturbance{};
    if (policy == "plus" || policy == "minus") {
      if (!unc) throw Error(ErrorCode::InvalidArgument, "constant disturbances need an uncertain problem");
      const auto W = distinct_w_vertices(*unc);
      Vec w = W.front();
      for (const auto& wv : W)
        if (policy == "plus" ? wv.sum() > w.sum() : wv.sum() < w.sum()) w = wv;
      pol = ExtremeConstant{w};
    } else if (policy == "cycle") {
      pol = VertexCycle{};
    } else if (policy == "greedy") {
      pol = WorstCaseGreedy{};
    }
    const auto runs = simulate_batch(p.sys, c, spec.cost, starts, steps, pol, unc);
    int breaches = 0, violations = 0;
    for (size_t k = 0; k < runs.size(); ++k) {
      write_file(mc.out + "/trajectory_" + std::to_string(k) + ".csv", trajectory_csv(runs[k]));
      breaches += runs[k].breach ? 1 : 0;
      violations += static_cast<int>(runs[k].descent_violations.size());
    }
    std::fprintf(stderr, "%zu runs, %d breaches, %d descent violations\n", runs.size(), breaches, violations);
    if (breaches > 0 || violations > 0) rc = kVerify;
  });

  // export
  Common ec;
  std::string eres;
  std::vector<double> levels{0.1, 0.5, 1.0, 2.0};
  auto* e = app.add_subcommand("export", "partition and contour CSVs");
  e->add_option("--problem", ec.problem, "problem JSON")->required();
  e->add_option("--result", eres, "result artifact")->required();
  e->add_option("--levels", levels, "contour levels");
  e->add_option("--out", ec.out, "output directory")->required();
  e->callback([&] {
    for (double l : levels)
      if (l < 0) throw Error(ErrorCode::InvalidArgument, "contour levels must be >= 0");
    const Problem p = load_problem(ec.problem);
    const auto r = parse_result(read_file(eres));
    const auto M = make_function(spec_of(p, r), r.result);
    write_file(ec.out + "/partition.csv", export_partition_csv(M));
    write_file(ec.out + "/contours.csv", export_contours_csv(M, levels));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  } catch (const Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return exit_code(err.code());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kFailure;
  }
  return rc;
}
