#include "polyclf/sim.hpp"

#include <sstream>

#include "polyclf/error.hpp"

namespace polyclf {

Trajectory simulate(const LinearSystem& sys, const ExplicitController& c, const StageCost& cost,
                    const Vec& x0, int steps, const DisturbancePolicy& policy,
                    const UncertaintyModel* unc, const SimOptions& opt) {
  const PwaFunction& M = c.function();
  if (steps < 0) throw Error(ErrorCode::InvalidArgument, "steps must be >= 0");
  if (x0.size() != sys.nx()) throw Error(ErrorCode::InvalidArgument, "x0 has the wrong length");
  if (!M.in_domain(x0, opt.domain_tol)) throw Error(ErrorCode::StartOutOfDomain, "x0 is outside dom(M)");
  const bool needs_unc = std::holds_alternative<VertexCycle>(policy) ||
                         std::holds_alternative<WorstCaseGreedy>(policy);
  if (needs_unc && !unc) throw Error(ErrorCode::InvalidArgument, "this disturbance policy needs W");
  if (const auto* ec = std::get_if<ExtremeConstant>(&policy); ec && ec->w.size() != sys.nx())
    throw Error(ErrorCode::InvalidArgument, "w has the wrong length");
  const std::vector<Vec> W = unc ? distinct_w_vertices(*unc) : std::vector<Vec>{};
  if (needs_unc && W.empty()) throw Error(ErrorCode::InvalidArgument, "W has no vertices");

  Trajectory t;
  Vec x = x0;
  t.states.push_back(x);
  t.M_values.push_back(M.eval(x));
  for (int k = 0; k < steps; ++k) {
    const Vec u = c.feedback(x);
    Vec next;
    Vec w = Vec::Zero(sys.nx());
    if (std::holds_alternative<WorstCaseGreedy>(policy)) {
      double worst = -kInf;
      for (const auto& [A, B] : unc->AB)
        for (const auto& wv : W) {
          const Vec cand = A * x + B * u + wv;
          const double m = M.eval(cand);
          if (m > worst || next.size() == 0) worst = m, next = cand, w = wv;
        }
    } else {
      if (const auto* ec = std::get_if<ExtremeConstant>(&policy)) w = ec->w;
      if (std::holds_alternative<VertexCycle>(policy)) w = W[k % W.size()];
      next = sys.A * x + sys.B * u + w;
    }
    const double L = cost.eval(x, u);
    t.inputs.push_back(u);
    if (!std::holds_alternative<NoDisturbance>(policy)) t.disturbances.push_back(w);
    t.stage_costs.push_back(L);
    if (!M.in_domain(next, opt.domain_tol)) {
      t.descent_residuals.push_back(kInf);
      t.breach = Breach{k, next};
      return t;
    }
    const double mn = M.eval(next);
    const double r = mn - t.M_values.back() + L;
    t.descent_residuals.push_back(r);
    if (t.M_values.back() > 0 && r > opt.descent_tol) t.descent_violations.emplace_back(k, r);
    x = next;
    t.states.push_back(x);
    t.M_values.push_back(mn);
  }
  return t;
}

std::vector<Trajectory> simulate_batch(const LinearSystem& sys, const ExplicitController& c,
                                       const StageCost& cost, const std::vector<Vec>& x0s,
                                       int steps, const DisturbancePolicy& policy,
                                       const UncertaintyModel* unc, const SimOptions& opt) {
  const int n = static_cast<int>(x0s.size());
  std::vector<Trajectory> out(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < n; ++k) {
    try {
      out[k] = simulate(sys, c, cost, x0s[k], steps, policy, unc, opt);
    } catch (const Error& e) {
      errors[k] = e.what();
    }
  }
  // Rethrow the first failure serially; StartOutOfDomain is the only one
  // expected here.
  for (int k = 0; k < n; ++k)
    if (!errors[k].empty()) {
      simulate(sys, c, cost, x0s[k], steps, policy, unc, opt);
    }
  return out;
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  os.precision(12);
  const int nx = t.states.empty() ? 0 : static_cast<int>(t.states[0].size());
  const int nu = t.inputs.empty() ? 0 : static_cast<int>(t.inputs[0].size());
  const int nw = t.disturbances.empty() ? 0 : static_cast<int>(t.disturbances[0].size());
  os << "step";
  for (int i = 0; i < nx; ++i) os << ",x" << i + 1;
  for (int i = 0; i < nu; ++i) os << ",u" << i + 1;
  for (int i = 0; i < nw; ++i) os << ",w" << i + 1;
  os << ",M,L,descent_residual\n";
  for (size_t k = 0; k < t.states.size(); ++k) {
    os << k;
    for (int i = 0; i < nx; ++i) os << ',' << t.states[k](i);
    const bool has_step = k < t.inputs.size();
    for (int i = 0; i < nu; ++i) {
      os << ',';
      if (has_step) os << t.inputs[k](i);
    }
    for (int i = 0; i < nw; ++i) {
      os << ',';
      if (has_step) os << t.disturbances[k](i);
    }
    os << ',' << t.M_values[k] << ',';
    if (has_step) os << t.stage_costs[k];
    os << ',';
    if (has_step) os << t.descent_residuals[k];
    os << '\n';
  }
  return os.str();
}

}  // namespace polyclf
