#include "polyclf/conic.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "ipm.hpp"
#include "polyclf/error.hpp"

namespace polyclf {

// ---------------------------------------------------------------------------
// LinExpr

LinExpr LinExpr::var(int index, double coef) {
  LinExpr e;
  e.terms_.push_back({index, coef});
  return e;
}

LinExpr& LinExpr::add(int index, double coef) {
  if (coef != 0.0) terms_.push_back({index, coef});
  return *this;
}

LinExpr& LinExpr::add_constant(double c) {
  constant_ += c;
  return *this;
}

LinExpr& LinExpr::operator+=(const LinExpr& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  constant_ += o.constant_;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& o) {
  for (const auto& t : o.terms_) terms_.push_back({t.var, -t.coef});
  constant_ -= o.constant_;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  for (auto& t : terms_) t.coef *= s;
  constant_ *= s;
  return *this;
}

double LinExpr::eval(const Vec& x) const {
  double v = constant_;
  for (const auto& t : terms_) v += t.coef * x(t.var);
  return v;
}

LinExpr& LinExpr::compress() {
  std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  std::vector<Term> out;
  for (const auto& t : terms_) {
    if (!out.empty() && out.back().var == t.var)
      out.back().coef += t.coef;
    else
      out.push_back(t);
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const Term& t) { return t.coef == 0.0; }),
            out.end());
  terms_ = std::move(out);
  return *this;
}

LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
LinExpr operator*(double s, LinExpr a) { return a *= s; }

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::NumericalTrouble: return "NumericalTrouble";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// ConvexProgram

int ConvexProgram::add_variable(const std::string& name, int size) {
  if (size <= 0) throw Error(ErrorCode::InvalidArgument, "variable block '" + name + "' is empty");
  blocks_.push_back({name, nvar_, size});
  nvar_ += size;
  fixed_.resize(nvar_, std::numeric_limits<double>::quiet_NaN());
  return static_cast<int>(blocks_.size()) - 1;
}

int ConvexProgram::var(int block_id, int k) const {
  const Block& b = blocks_.at(block_id);
  if (k < 0 || k >= b.size) throw Error(ErrorCode::InvalidArgument, "index out of block " + b.name);
  return b.offset + k;
}

void ConvexProgram::fix(int v, double value) {
  if (v < 0 || v >= nvar_) throw Error(ErrorCode::InvalidArgument, "fix: unknown variable");
  fixed_[v] = value;
}

bool ConvexProgram::is_fixed(int v) const { return !std::isnan(fixed_.at(v)); }
double ConvexProgram::fixed_value(int v) const { return fixed_.at(v); }

int ConvexProgram::num_fixed() const {
  return static_cast<int>(std::count_if(fixed_.begin(), fixed_.end(), [](double d) { return !std::isnan(d); }));
}

int ConvexProgram::family_id(const std::string& name) {
  auto it = std::find(families_.begin(), families_.end(), name);
  if (it != families_.end()) return static_cast<int>(it - families_.begin());
  families_.push_back(name);
  return static_cast<int>(families_.size()) - 1;
}

void ConvexProgram::add_constraint(const LinExpr& lhs, Sense sense, const LinExpr& rhs,
                                   const std::string& family) {
  LinExpr e = lhs - rhs;
  e.compress();
  for (const auto& t : e.terms())
    if (t.var < 0 || t.var >= nvar_)
      throw Error(ErrorCode::InvalidArgument, "constraint references unregistered variable");
  for (const auto& t : e.terms()) {
    cols_.push_back(t.var);
    vals_.push_back(t.coef);
  }
  row_ptr_.push_back(static_cast<int>(cols_.size()));
  rhs_.push_back(-e.constant());
  sense_.push_back(sense);
  row_family_.push_back(family_id(family));
}

void ConvexProgram::add_quadratic(const Mat& weight, std::vector<LinExpr> args,
                                  const LinExpr& bound, const std::string& family) {
  const int k = static_cast<int>(args.size());
  if (weight.rows() != k || weight.cols() != k)
    throw Error(ErrorCode::InvalidArgument, "quadratic weight does not match its arguments");
  const Mat Ws = 0.5 * (weight + weight.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(Ws);
  const Vec d = es.eigenvalues();
  const double dmax = std::max(d.maxCoeff(), 0.0);
  if (d.minCoeff() < -1e-10 * std::max(1.0, dmax))
    throw Error(ErrorCode::InvalidArgument, "quadratic weight is not positive semidefinite");
  std::vector<int> keep;
  for (int i = 0; i < k; ++i)
    if (d(i) > 1e-14 * std::max(1.0, dmax)) keep.push_back(i);
  QuadraticConstraint qc;
  qc.factor.resize(keep.size(), k);
  for (size_t r = 0; r < keep.size(); ++r)
    qc.factor.row(r) = std::sqrt(d(keep[r])) * es.eigenvectors().col(keep[r]).transpose();
  for (auto& a : args) {
    a.compress();
    for (const auto& t : a.terms())
      if (t.var < 0 || t.var >= nvar_)
        throw Error(ErrorCode::InvalidArgument, "quadratic references unregistered variable");
  }
  qc.args = std::move(args);
  qc.bound = bound;
  qc.bound.compress();
  qc.family = family_id(family);
  quads_.push_back(std::move(qc));
}

void ConvexProgram::minimize(const LinExpr& objective) {
  objective_ = objective;
  objective_.compress();
  maximize_ = false;
}

void ConvexProgram::maximize(const LinExpr& objective) {
  objective_ = objective;
  objective_.compress();
  maximize_ = true;
}

double ConvexProgram::max_affine_violation(const Vec& x) const {
  double worst = 0.0;
  for (size_t r = 0; r < rhs_.size(); ++r) {
    double a = 0.0;
    for (int t = row_ptr_[r]; t < row_ptr_[r + 1]; ++t) a += vals_[t] * x(cols_[t]);
    const double viol = sense_[r] == Sense::Leq ? a - rhs_[r] : std::abs(a - rhs_[r]);
    worst = std::max(worst, viol);
  }
  return worst;
}

namespace {
double quad_violation(const QuadraticConstraint& q, const Vec& x) {
  Vec arg(q.args.size());
  for (size_t i = 0; i < q.args.size(); ++i) arg(i) = q.args[i].eval(x);
  const double lhs = (q.factor * arg).squaredNorm();
  const double b = q.bound.eval(x);
  return (lhs - b) / (std::abs(b) + 1.0);
}
}  // namespace

double ConvexProgram::max_quadratic_violation(const Vec& x) const {
  double worst = 0.0;
  for (const auto& q : quads_) worst = std::max(worst, quad_violation(q, x));
  return worst;
}

std::map<std::string, double> ConvexProgram::residuals_by_family(const Vec& x) const {
  std::map<std::string, double> out;
  for (const auto& f : families_) out[f] = 0.0;
  for (size_t r = 0; r < rhs_.size(); ++r) {
    double a = 0.0;
    for (int t = row_ptr_[r]; t < row_ptr_[r + 1]; ++t) a += vals_[t] * x(cols_[t]);
    const double viol = sense_[r] == Sense::Leq ? a - rhs_[r] : std::abs(a - rhs_[r]);
    double& slot = out[families_[row_family_[r]]];
    slot = std::max(slot, viol);
  }
  for (const auto& q : quads_) {
    double& slot = out[families_[q.family]];
    slot = std::max(slot, quad_violation(q, x));
  }
  return out;
}

std::string ConvexProgram::dump_json() const {
  using nlohmann::json;
  json j;
  json blocks = json::array();
  for (const auto& b : blocks_) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
  j["variables"] = blocks;
  json fixed = json::array();
  for (int v = 0; v < nvar_; ++v)
    if (is_fixed(v)) fixed.push_back({v, fixed_[v]});
  j["fixed"] = fixed;
  json rows = json::array(), cols = json::array(), vals = json::array();
  for (size_t r = 0; r < rhs_.size(); ++r)
    for (int t = row_ptr_[r]; t < row_ptr_[r + 1]; ++t) {
      rows.push_back(r);
      cols.push_back(cols_[t]);
      vals.push_back(vals_[t]);
    }
  json sense = json::array();
  for (auto s : sense_) sense.push_back(s == Sense::Leq ? "<=" : "==");
  json fam = json::array();
  for (int f : row_family_) fam.push_back(families_[f]);
  j["affine"] = {{"rows", rows}, {"cols", cols}, {"vals", vals}, {"rhs", rhs_}, {"sense", sense},
                 {"family", fam}};
  json quads = json::array();
  for (const auto& q : quads_) {
    json args = json::array();
    for (const auto& a : q.args) {
      json terms = json::array();
      for (const auto& t : a.terms()) terms.push_back({t.var, t.coef});
      args.push_back({{"terms", terms}, {"constant", a.constant()}});
    }
    json factor = json::array();
    for (int r = 0; r < q.factor.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < q.factor.cols(); ++c) row.push_back(q.factor(r, c));
      factor.push_back(row);
    }
    json bterms = json::array();
    for (const auto& t : q.bound.terms()) bterms.push_back({t.var, t.coef});
    quads.push_back({{"factor", factor},
                     {"args", args},
                     {"bound", {{"terms", bterms}, {"constant", q.bound.constant()}}},
                     {"family", families_[q.family]}});
  }
  j["quadratic"] = quads;
  json obj = json::array();
  for (const auto& t : objective_.terms()) obj.push_back({t.var, t.coef});
  j["objective"] = {{"sense", maximize_ ? "max" : "min"}, {"terms", obj}, {"constant", objective_.constant()}};
  return j.dump();
}

Vec Solution::block(const ConvexProgram& p, int block_id) const {
  const auto& b = p.block(block_id);
  return x.segment(b.offset, b.size);
}

// ---------------------------------------------------------------------------
// Lowering onto the cone form and solve.

namespace {

struct Lowered {
  detail::ConeProblem prob;
  std::vector<int> col_of;  // program variable -> solver column (-1 if fixed)
  std::vector<int> var_of;  // solver column -> program variable
  double obj_scale = 1.0;
  bool trivially_infeasible = false;
};

// Substitutes fixed variables; returns sparse terms over solver columns and
// the accumulated constant.
void substitute(const ConvexProgram& p, const std::vector<int>& col_of, const int* cols,
                const double* vals, int cnt, std::vector<std::pair<int, double>>& out,
                double& constant) {
  out.clear();
  for (int t = 0; t < cnt; ++t) {
    const int v = cols[t];
    if (col_of[v] < 0)
      constant += vals[t] * p.fixed_value(v);
    else
      out.emplace_back(col_of[v], vals[t]);
  }
}

Lowered lower(const ConvexProgram& p) {
  Lowered L;
  const int nv = p.num_variables();
  L.col_of.assign(nv, -1);
  for (int v = 0; v < nv; ++v)
    if (!p.is_fixed(v)) {
      L.col_of[v] = static_cast<int>(L.var_of.size());
      L.var_of.push_back(v);
    }
  const int n = static_cast<int>(L.var_of.size());

  Vec c = Vec::Zero(n);
  for (const auto& t : p.objective().terms())
    if (L.col_of[t.var] >= 0) c(L.col_of[t.var]) += t.coef;
  if (p.is_maximize()) c = -c;
  L.obj_scale = std::max(1.0, c.size() ? c.lpNorm<Eigen::Infinity>() : 0.0);
  L.prob.c = c / L.obj_scale;

  std::vector<Eigen::Triplet<double>> gt, at;
  std::vector<double> h, b;
  std::vector<std::pair<int, double>> terms;
  int grow = 0, arow = 0;

  auto emit_lp = [&](std::vector<std::pair<int, double>>& tm, double rhs, bool eq) {
    double nrm = 0.0;
    for (auto& [col, val] : tm) nrm += val * val;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) {
      const double tol = 1e-9 * (1.0 + std::abs(rhs));
      if ((eq && std::abs(rhs) > tol) || (!eq && rhs < -tol)) L.trivially_infeasible = true;
      return;
    }
    if (eq) {
      for (auto& [col, val] : tm) at.emplace_back(arow, col, val / nrm);
      b.push_back(rhs / nrm);
      ++arow;
    } else {
      for (auto& [col, val] : tm) gt.emplace_back(grow, col, val / nrm);
      h.push_back(rhs / nrm);
      ++grow;
    }
  };

  const auto& rp = p.row_ptr();
  for (int r = 0; r < p.num_affine_rows(); ++r) {
    if (p.senses()[r] != Sense::Leq) continue;
    double k = 0.0;
    substitute(p, L.col_of, p.row_cols().data() + rp[r], p.row_vals().data() + rp[r],
               rp[r + 1] - rp[r], terms, k);
    emit_lp(terms, p.rhs()[r] - k, false);
  }
  L.prob.l = grow;

  // ||F arg||^2 <= bound  <=>  ( bound + 1, bound - 1, 2 F arg ) in the cone.
  for (const auto& q : p.quadratics()) {
    const int r = static_cast<int>(q.factor.rows());
    const int k = static_cast<int>(q.args.size());
    double bconst = q.bound.constant();
    std::vector<std::pair<int, double>> bterms;
    {
      std::vector<int> cc;
      std::vector<double> vv;
      for (const auto& t : q.bound.terms()) {
        cc.push_back(t.var);
        vv.push_back(t.coef);
      }
      substitute(p, L.col_of, cc.data(), vv.data(), static_cast<int>(cc.size()), bterms, bconst);
    }
    // Argument rows: arg_j = P_j x + p_j.
    std::vector<std::vector<std::pair<int, double>>> aterms(k);
    Vec aconst(k);
    for (int j = 0; j < k; ++j) {
      std::vector<int> cc;
      std::vector<double> vv;
      for (const auto& t : q.args[j].terms()) {
        cc.push_back(t.var);
        vv.push_back(t.coef);
      }
      double cst = q.args[j].constant();
      substitute(p, L.col_of, cc.data(), vv.data(), static_cast<int>(cc.size()), aterms[j], cst);
      aconst(j) = cst;
    }
    // Rows in s = h - G x form.
    std::vector<std::map<int, double>> grows(2 + r);
    Vec hrow(2 + r);
    for (auto& [col, val] : bterms) {
      grows[0][col] -= val;
      grows[1][col] -= val;
    }
    hrow(0) = bconst + 1.0;
    hrow(1) = bconst - 1.0;
    for (int i = 0; i < r; ++i) {
      double hc = 0.0;
      for (int j = 0; j < k; ++j) {
        const double f = 2.0 * q.factor(i, j);
        if (f == 0.0) continue;
        for (auto& [col, val] : aterms[j]) grows[2 + i][col] -= f * val;
        hc += f * aconst(j);
      }
      hrow(2 + i) = hc;
    }
    double scale = 0.0;
    for (const auto& g : grows)
      for (auto& [col, val] : g) scale = std::max(scale, std::abs(val));
    scale = scale > 0.0 ? 1.0 / scale : 1.0;
    for (int i = 0; i < 2 + r; ++i) {
      for (auto& [col, val] : grows[i])
        if (val != 0.0) gt.emplace_back(grow + i, col, val * scale);
      h.push_back(hrow(i) * scale);
    }
    grow += 2 + r;
    L.prob.soc.push_back(2 + r);
  }

  for (int r = 0; r < p.num_affine_rows(); ++r) {
    if (p.senses()[r] != Sense::Eq) continue;
    double k = 0.0;
    substitute(p, L.col_of, p.row_cols().data() + rp[r], p.row_vals().data() + rp[r],
               rp[r + 1] - rp[r], terms, k);
    emit_lp(terms, p.rhs()[r] - k, true);
  }

  L.prob.G.resize(grow, n);
  L.prob.G.setFromTriplets(gt.begin(), gt.end());
  L.prob.G.makeCompressed();
  L.prob.h = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
  L.prob.A.resize(arow, n);
  L.prob.A.setFromTriplets(at.begin(), at.end());
  L.prob.A.makeCompressed();
  L.prob.b = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
  return L;
}

}  // namespace

Solution InteriorPointBackend::solve(const ConvexProgram& p, const SolverOptions& opt) const {
  const auto t0 = std::chrono::steady_clock::now();
  Solution sol;
  sol.backend = name();
  const Lowered L = lower(p);
  sol.x = Vec::Zero(p.num_variables());
  for (int v = 0; v < p.num_variables(); ++v)
    if (p.is_fixed(v)) sol.x(v) = p.fixed_value(v);

  if (L.trivially_infeasible) {
    sol.status = SolveStatus::Infeasible;
  } else if (L.var_of.empty()) {
    sol.status = p.max_affine_violation(sol.x) <= 1e-9 && p.max_quadratic_violation(sol.x) <= 1e-9
                     ? SolveStatus::Optimal
                     : SolveStatus::Infeasible;
  } else {
    const detail::ConeResult r = detail::solve_cone(L.prob, opt);
    sol.status = r.status;
    sol.iterations = r.iterations;
    if (r.status == SolveStatus::Optimal || r.status == SolveStatus::NumericalTrouble)
      for (size_t j = 0; j < L.var_of.size(); ++j) sol.x(L.var_of[j]) = r.x(j);
  }
  sol.objective = p.objective().eval(sol.x);
  sol.max_affine_violation = p.max_affine_violation(sol.x);
  sol.max_cone_violation = p.max_quadratic_violation(sol.x);
  sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

Solution solve(const ConvexProgram& p, const SolverOptions& opt) {
  static const InteriorPointBackend backend;
  Solution s = backend.solve(p, opt);
  if (s.status == SolveStatus::NumericalTrouble)
    throw Error(ErrorCode::SolverFailure, "interior-point method stalled after " +
                                              std::to_string(s.iterations) + " iterations");
  if (s.status == SolveStatus::Optimal &&
      (s.max_affine_violation > 1e-7 || s.max_cone_violation > 1e-6))
    throw Error(ErrorCode::SolverFailure,
                "solution failed feasibility re-check (affine " +
                    std::to_string(s.max_affine_violation) + ", quadratic " +
                    std::to_string(s.max_cone_violation) + ")");
  return s;
}

int add_inf_norm_epigraph(ConvexProgram& p, const std::vector<LinExpr>& rows, const Vec& weights,
                          const std::string& name) {
  if (static_cast<int>(rows.size()) != weights.size())
    throw Error(ErrorCode::InvalidArgument, "inf-norm rows and weights differ in length");
  for (int i = 0; i < weights.size(); ++i)
    if (!(weights(i) != 0.0) || !std::isfinite(weights(i)))
      throw Error(ErrorCode::InvalidArgument, "inf-norm weight " + std::to_string(i) + " is zero");
  const int b = p.add_variable(name, 1);
  const int t = p.var(b);
  for (size_t i = 0; i < rows.size(); ++i) {
    const double w = std::abs(weights(static_cast<int>(i)));
    p.add_leq(w * rows[i], LinExpr::var(t), "inf_norm");
    p.add_leq(-w * rows[i], LinExpr::var(t), "inf_norm");
  }
  return t;
}

}  // namespace polyclf
