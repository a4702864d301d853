#include "polyclf/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "polyclf/error.hpp"

namespace polyclf {

Problem nominal_example() {
  Mat A(2, 2), B(2, 1), Q(2, 2);
  A << 1, 1, 0, 1;
  B << 0.5, 1;
  Q << 1, 0, 0, 0.1;
  Problem p;
  p.name = "nominal";
  p.sys = make_system(A, B, HPolyhedron::box(Vec::Constant(2, -1), Vec::Constant(2, 2)),
                      HPolyhedron::box(Vec::Constant(1, -0.5), Vec::Constant(1, 0.5)));
  p.Q = Q;
  p.R = Mat::Constant(1, 1, 0.1);
  return p;
}

Problem robust_example() {
  Problem p = nominal_example();
  p.name = "robust";
  p.uncertainty = segment_uncertainty(p.sys.A, p.sys.B, Vec::Ones(2), 1.0 / 40.0);
  Mat K(1, 2);
  K << -0.895, -1.367;
  p.K = K;
  return p;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::S1: return "s1";
    case Strategy::S2: return "s2";
    case Strategy::S3: return "s3";
    case Strategy::Anchored: return "anchored";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& s) {
  for (auto k : {Strategy::S1, Strategy::S2, Strategy::S3, Strategy::Anchored})
    if (to_string(k) == s) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + s + "'");
}

StageCost problem_cost(const Problem& p, const Mat& G1, const std::optional<Vec>& target_zs) {
  if (!p.robust()) return StageCost::quadratic(p.Q, p.R);
  if (!p.K || !target_zs)
    throw Error(ErrorCode::ModeMismatch, "a robust cost needs K and the target set");
  return StageCost::set_distance(p.Q, p.R, *p.K, HPolyhedron(G1, *target_zs));
}

QuadForm problem_lqr(const Problem& p) {
  return lqr_underestimator(p.sys, StageCost::quadratic(p.Q, p.R));
}

namespace {

Mat with_flat_row(const Mat& F) {
  Mat out(F.rows() + 1, F.cols());
  out.topRows(F.rows()) = F;
  out.row(F.rows()).setZero();
  out(F.rows(), F.cols() - 1) = -1.0;
  return out;
}

}  // namespace

TemplateArtifact build_template(const Problem& p, const TemplateConfig& cfg) {
  if (cfg.f1 < 3) throw Error(ErrorCode::InvalidArgument, "f1 must be at least 3");
  if (cfg.f2 < 1) throw Error(ErrorCode::InvalidArgument, "f2 must be at least 1");
  if (cfg.N < 0) throw Error(ErrorCode::InvalidArgument, "N must be >= 0");
  if (p.sys.nx() != 2) throw Error(ErrorCode::InvalidArgument, "templates are built for planar problems");
  const bool robust = p.robust();
  if (robust && cfg.strategy == Strategy::S3)
    throw Error(ErrorCode::ModeMismatch, "S3 samples nominal costs; use anchored or S2 for robust problems");
  if (!robust && cfg.strategy == Strategy::Anchored)
    throw Error(ErrorCode::ModeMismatch, "anchored templates need a robust problem");

  TemplateArtifact a;
  a.config = cfg;
  const Mat G1 = polygon_directions(cfg.f1);
  if (robust) {
    if (!p.K) throw Error(ErrorCode::ModeMismatch, "robust problems need K");
    const auto dom = build_triplet(G1, Vec::Ones(cfg.f1), TripletKind::Domain);
    a.target_zs = compute_rci_target(dom, *p.K, p.sys, *p.uncertainty).zs;
  }
  const StageCost cost = problem_cost(p, G1, a.target_zs);
  const QuadForm P = problem_lqr(p);
  ZetaOptions zo;
  zo.max_horizon = std::max(cfg.N, zo.max_horizon);
  auto zeta_of = [&](const Mat& F) {
    return robust ? zeta_minmax(F, p.sys, *p.uncertainty, cost, nullptr, cfg.N, zo)
                  : zeta_nominal(F, p.sys, cost, &P, cfg.N, zo);
  };

  TemplateData td;
  switch (cfg.strategy) {
    case Strategy::S1:
    case Strategy::S2: {
      td = make_template_s1_on_domain(G1, robust ? cfg.f2 - 1 : cfg.f2, cfg.seed);
      if (robust) {
        td.F = with_flat_row(td.F);
        td.f2 += 1;
        td.z_bar = Vec::Ones(td.F.rows());
        td.z_bar(td.F.rows() - 1) = 0.0;
      }
      a.zeta = zeta_of(td.F);
      if (cfg.strategy == Strategy::S2) td.z_bar = a.zeta;
      break;
    }
    case Strategy::S3: {
      const auto dom = build_triplet(G1, Vec::Ones(cfg.f1), TripletKind::Domain);
      const Vec z1 = compute_contractive_domain(dom, p.sys, cfg.lambda);
      const auto pts = s3_samples(HPolyhedron(G1, z1), cfg.s3_midpoints, cfg.s3_interior, cfg.seed);
      td = make_template_s3(G1, z1, pts, p.sys, cost, &P, cfg.N);
      a.zeta = zeta_of(td.F);
      break;
    }
    case Strategy::Anchored: {
      td = make_template_anchored(G1, *a.target_zs, cfg.f2, cfg.seed, p.sys, *p.uncertainty, cost,
                                  cfg.N, cfg.tilt, zo);
      a.zeta = td.z_bar;
      break;
    }
  }
  a.z_bar = perturb_to_simple(td.F, td.z_bar, cfg.epsilon, cfg.seed);
  a.triplet = build_triplet(td.F, a.z_bar, robust ? TripletKind::Robust : TripletKind::Nominal, cfg.edges);
  return a;
}

SynthesisSpec make_spec(const Problem& p, const TemplateArtifact& a, const SynthConfig& cfg) {
  const auto& t = a.triplet;
  if (p.robust() != (t.kind == TripletKind::Robust))
    throw Error(ErrorCode::ModeMismatch, "problem and template disagree on robustness");
  const int f = t.num_facets(), f1 = t.f1;
  const Mat G1 = t.F.topLeftCorner(f1, t.state_dim());
  SynthesisSpec s;
  s.triplet = t;
  s.system = p.sys;
  s.cost = problem_cost(p, G1, a.target_zs);
  s.lambda = cfg.lambda;
  s.solver = cfg.solver;
  if (p.robust()) {
    s.uncertainty = p.uncertainty;
    s.target_zs = a.target_zs;
  }
  if (cfg.objective == ObjectiveKind::Linear) {
    Vec c = Vec::Zero(f);
    c.head(f1).setConstant(-1.0);
    s.objective = LinearObjective{c};
  } else {
    if (a.zeta.size() != f) throw Error(ErrorCode::InvalidArgument, "template has no zeta target");
    Vec w = Vec::Ones(f);
    w.head(f1).setConstant(cfg.domain_weight);
    s.objective = InfDistanceObjective{w, a.zeta};
  }
  if (cfg.freeze_z1) s.freeze_z1 = a.z_bar.head(f1);
  return s;
}

}  // namespace polyclf
