#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "polyclf/bounds.hpp"
#include "polyclf/model.hpp"
#include "polyclf/synth.hpp"
#include "polyclf/templates.hpp"

namespace polyclf {

/// A control problem: dynamics and constraints, stage cost weights and, for
/// robust problems, the uncertainty model and the feedback K used for X_s.
struct Problem {
  std::string name;
  LinearSystem sys;
  Mat Q;
  Mat R;
  std::optional<UncertaintyModel> uncertainty;
  std::optional<Mat> K;

  bool robust() const { return uncertainty.has_value(); }
};

/// Double integrator, X = [-1, 2]^2, U = [-0.5, 0.5], Q = diag(1, 0.1), R = 0.1.
Problem nominal_example();
/// Same system with w in {(1, 1) omega : |omega| <= 1/40} and
/// K = -[0.895, 1.367].
Problem robust_example();

enum class Strategy { S1, S2, S3, Anchored };
std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct TemplateConfig {
  Strategy strategy = Strategy::S3;
  int f1 = 8;                // domain rows: regular f1-gon directions
  int f2 = 37;               // interior rows (S1, S2, Anchored)
  int N = 5;                 // horizon of zeta^N and of the S3 sample costs
  std::uint64_t seed = 1;
  double lambda = 0.995;     // S3 domain: lambda-contractive polytope
  int s3_interior = 15;      // S3 interior samples
  int s3_midpoints = 1;      // S3 edge midpoints
  double tilt = -0.9;        // Anchored
  double epsilon = 1e-3;     // perturbation to a simple template
  EdgeMode edges = EdgeMode::Reduced;
};

struct TemplateArtifact {
  TemplateConfig config;
  ConfigurationTriplet triplet;  // built at the perturbed z_bar
  Vec z_bar;                     // perturbed
  Vec zeta;                      // objective target (zeta^N, anchors at their z_bar)
  std::optional<Vec> target_zs;  // robust: X_s in the domain directions
};

/// Builds F and z_bar by strategy, then perturbs and builds the triplet.
/// S1: random interior rows, z_bar = 1.  S2: the same directions with z_bar
/// = zeta^N.  S3 (nominal only): interpolation of N-step costs on the
/// lambda-contractive octagon.  Anchored (robust only): see
/// make_template_anchored.  Robust templates end with the flat row -e_n.
TemplateArtifact build_template(const Problem& p, const TemplateConfig& cfg);

/// L for the problem: quadratic for nominal problems, the distance to
/// X_s = {G1 x <= zs} plus the K-offset input penalty for robust ones.
StageCost problem_cost(const Problem& p, const Mat& G1, const std::optional<Vec>& target_zs);

/// LQR cost of the unconstrained nominal system.
QuadForm problem_lqr(const Problem& p);

enum class ObjectiveKind { Linear, InfDistance };

struct SynthConfig {
  double lambda = 0.995;
  ObjectiveKind objective = ObjectiveKind::InfDistance;
  double domain_weight = 100.0;  // InfDistance weight of the domain rows
  bool freeze_z1 = false;        // fix the domain rows at z_bar
  SolverOptions solver;
};

/// Linear: c = -1 on the domain rows.  InfDistance: weights (w 1_f1, 1_f2)
/// towards artifact.zeta.
SynthesisSpec make_spec(const Problem& p, const TemplateArtifact& a, const SynthConfig& cfg);

}  // namespace polyclf
