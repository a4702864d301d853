#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "polyclf/model.hpp"
#include "polyclf/pwa.hpp"

namespace polyclf {

struct NoDisturbance {};
/// w_k = w for every step.
struct ExtremeConstant {
  Vec w;
};
/// Cycles through the vertices of W.
struct VertexCycle {};
/// w_k (and the (A, B) vertex) maximizing M at the successor.
struct WorstCaseGreedy {};

using DisturbancePolicy = std::variant<NoDisturbance, ExtremeConstant, VertexCycle, WorstCaseGreedy>;

/// x+ left dom(M) at `step`; the run stops there.
struct Breach {
  int step = 0;
  Vec x;
};

struct Trajectory {
  std::vector<Vec> states;        // steps + 1 unless breached
  std::vector<Vec> inputs;
  std::vector<Vec> disturbances;  // empty for NoDisturbance
  std::vector<double> M_values;   // one per state
  std::vector<double> stage_costs;
  std::vector<double> descent_residuals;  // M(x+) - M(x) + L(x, u)
  std::vector<std::pair<int, double>> descent_violations;
  std::optional<Breach> breach;

  int steps() const { return static_cast<int>(inputs.size()); }
};

struct SimOptions {
  double descent_tol = 1e-6;
  double domain_tol = 1e-9;
};

/// Closed loop x+ = A x + B u + w with u = c.feedback(x).  VertexCycle and
/// WorstCaseGreedy need `unc`; WorstCaseGreedy also ranges over its (A, B)
/// vertices, the other policies use sys.A, sys.B.  Descent violations are
/// logged for steps with M(x) > 0.  Throws StartOutOfDomain.
Trajectory simulate(const LinearSystem& sys, const ExplicitController& c, const StageCost& cost,
                    const Vec& x0, int steps, const DisturbancePolicy& policy = NoDisturbance{},
                    const UncertaintyModel* unc = nullptr, const SimOptions& opt = {});

/// Independent runs from each x0, in parallel.
std::vector<Trajectory> simulate_batch(const LinearSystem& sys, const ExplicitController& c,
                                       const StageCost& cost, const std::vector<Vec>& x0s,
                                       int steps, const DisturbancePolicy& policy = NoDisturbance{},
                                       const UncertaintyModel* unc = nullptr,
                                       const SimOptions& opt = {});

/// "step,x1..,u1..,w1..,M,L,descent_residual"; the final state row leaves
/// the input, disturbance and cost columns empty.
std::string trajectory_csv(const Trajectory& t);

}  // namespace polyclf
