#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "polyclf/conic.hpp"
#include "polyclf/model.hpp"
#include "polyclf/pwa.hpp"
#include "polyclf/triplet.hpp"

namespace polyclf {

/// minimize c' z (c < 0 pushes the facets outward).
struct LinearObjective {
  Vec c;
};

/// minimize || diag(weights) (z - zeta) ||_inf.
struct InfDistanceObjective {
  Vec weights;
  Vec zeta;
};

using Objective = std::variant<LinearObjective, InfDistanceObjective>;

struct SynthesisSpec {
  ConfigurationTriplet triplet;
  LinearSystem system;
  StageCost cost;
  double lambda = 0.995;
  std::optional<UncertaintyModel> uncertainty;
  std::optional<Vec> target_zs;  // robust: facet parameter of X_s in the G1 directions
  Objective objective;
  std::optional<Vec> freeze_z1;
  SolverOptions solver;

  bool robust() const { return triplet.kind == TripletKind::Robust; }
};

struct ProblemSize {
  int variables = 0;        // free scalars seen by the solver
  int affine_rows = 0;      // rows including equalities
  int quadratic = 0;        // quadratic constraints
  /// v (1 + f l + n_X + n_U) + e + (n_x for V_1 z = 0 | f for the
  /// z_f = 0 convention), comparable with hand counts of the program.
  int counted_constraints = 0;
  int counted_variables = 0;  // f + v (1 + n_u)
};

struct SynthesisResult {
  SolveStatus status = SolveStatus::NumericalTrouble;
  Vec z;
  std::vector<Vec> v;
  Vec y;
  double objective = 0.0;
  double lambda = 0.0;
  bool robust = false;
  ProblemSize size;
  double seconds = 0.0;
  int iterations = 0;
  std::map<std::string, double> residuals;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Builds the convex program without solving it (exposed for size reports
/// and the program dump).  `blocks` receives the ids of z, v_1.., y.
struct SynthesisProgram {
  ConvexProgram program;
  int z_block = -1;
  std::vector<int> v_blocks;
  int y_block = -1;
};
SynthesisProgram build_synthesis_program(const SynthesisSpec& spec);

/// Vertex-wise CLF program for the nominal system.  Throws ModeMismatch
/// for robust specs; infeasible programs come back with status Infeasible.
SynthesisResult synth_nominal(const SynthesisSpec& spec);

/// Robust counterpart program.  Throws ModeMismatch unless the triplet is
/// robust and both the uncertainty and target_zs are given.
SynthesisResult synth_robust(const SynthesisSpec& spec);

/// Dispatches on spec.robust().
SynthesisResult synthesize(const SynthesisSpec& spec);

PwaFunction make_function(const SynthesisSpec& spec, const SynthesisResult& r);
ExplicitController make_controller(const SynthesisSpec& spec, const SynthesisResult& r);

struct VerificationReport {
  int samples = 0;
  int violations = 0;  // residual < -tol
  double min_residual = kInf;
  double mean_residual = 0.0;
  double tol = 1e-6;
  Vec worst_x;

  bool ok() const { return violations == 0; }
};

/// Samples n states of dom(M) by rejection from the bounding box of the
/// vertex projections and checks M(x) >= min_u L(x, u) + max M(x+).  The
/// search tries a u-grid, golden-section refinement and the interpolated
/// feedback.  Samples are drawn serially; the checks run in parallel.
VerificationReport verify_clf(const SynthesisResult& r, const SynthesisSpec& spec, int n_samples,
                              int u_res, std::uint64_t seed, double tol = 1e-6);

/// Uniform rejection samples of dom(M).
std::vector<Vec> sample_domain(const PwaFunction& M, int n, std::uint64_t seed);

}  // namespace polyclf
