#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "polyclf/types.hpp"

namespace polyclf {

struct Term {
  int var;
  double coef;
};

/// Sparse affine expression  sum_k coef_k * x[var_k] + constant.
class LinExpr {
 public:
  LinExpr() = default;
  explicit LinExpr(double constant) : constant_(constant) {}
  static LinExpr var(int index, double coef = 1.0);

  LinExpr& add(int index, double coef);
  LinExpr& add_constant(double c);
  LinExpr& operator+=(const LinExpr& o);
  LinExpr& operator-=(const LinExpr& o);
  LinExpr& operator*=(double s);

  const std::vector<Term>& terms() const { return terms_; }
  double constant() const { return constant_; }
  double eval(const Vec& x) const;

  /// Sorts terms by variable, merges duplicates and drops exact zeros.
  LinExpr& compress();

 private:
  std::vector<Term> terms_;
  double constant_ = 0.0;
};

LinExpr operator+(LinExpr a, const LinExpr& b);
LinExpr operator-(LinExpr a, const LinExpr& b);
LinExpr operator*(double s, LinExpr a);

enum class Sense { Leq, Eq };

/// ||factor * arg||^2 <= bound, with factor'factor the PSD weight.
struct QuadraticConstraint {
  Mat factor;
  std::vector<LinExpr> args;
  LinExpr bound;
  int family = 0;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalTrouble };

std::string to_string(SolveStatus s);

struct SolverOptions {
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  double infeas_tol = 1e-8;
  /// A stalled run is still reported Optimal when its best iterate is
  /// feasible to 100 feastol and the gap is below this (absolute or relative).
  double stall_gap = 5e-5;
  int max_iter = 150;
  bool verbose = false;
};

class ConvexProgram;

struct Solution {
  SolveStatus status = SolveStatus::NumericalTrouble;
  Vec x;  // every registered scalar, fixed ones included
  double objective = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  double max_affine_violation = 0.0;
  double max_cone_violation = 0.0;
  std::string backend;

  Vec block(const ConvexProgram& p, int block_id) const;
};

/// Builder for convex programs with affine rows and convex quadratic
/// constraints.  Variables are registered in named blocks.
class ConvexProgram {
 public:
  struct Block {
    std::string name;
    int offset;
    int size;
  };

  int add_variable(const std::string& name, int size = 1);
  const Block& block(int id) const { return blocks_.at(id); }
  const std::vector<Block>& blocks() const { return blocks_; }
  int var(int block_id, int k = 0) const;
  int num_variables() const { return nvar_; }

  void fix(int var, double value);
  bool is_fixed(int var) const;
  double fixed_value(int var) const;

  /// lhs <= rhs (or ==).  `family` labels rows for residual reports.
  void add_constraint(const LinExpr& lhs, Sense sense, const LinExpr& rhs,
                      const std::string& family = "affine");
  void add_leq(const LinExpr& lhs, const LinExpr& rhs, const std::string& family = "affine") {
    add_constraint(lhs, Sense::Leq, rhs, family);
  }
  void add_eq(const LinExpr& lhs, const LinExpr& rhs, const std::string& family = "affine") {
    add_constraint(lhs, Sense::Eq, rhs, family);
  }

  /// arg' W arg <= bound for PSD W (k x k) and k affine arguments.
  void add_quadratic(const Mat& weight, std::vector<LinExpr> args, const LinExpr& bound,
                     const std::string& family = "quadratic");

  void minimize(const LinExpr& objective);
  void maximize(const LinExpr& objective);
  const LinExpr& objective() const { return objective_; }
  bool is_maximize() const { return maximize_; }

  int num_affine_rows() const { return static_cast<int>(rhs_.size()); }
  int num_quadratic() const { return static_cast<int>(quads_.size()); }
  int num_fixed() const;

  // Row access (CSR).
  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& row_cols() const { return cols_; }
  const std::vector<double>& row_vals() const { return vals_; }
  const std::vector<double>& rhs() const { return rhs_; }
  const std::vector<Sense>& senses() const { return sense_; }
  const std::vector<QuadraticConstraint>& quadratics() const { return quads_; }
  const std::vector<std::string>& families() const { return families_; }
  const std::vector<int>& row_families() const { return row_family_; }

  double max_affine_violation(const Vec& x) const;
  /// Violation of ||.||^2 <= bound relative to |bound| + 1.
  double max_quadratic_violation(const Vec& x) const;
  std::map<std::string, double> residuals_by_family(const Vec& x) const;

  /// Sparse-triplet JSON dump; stable ordering, so identical programs give
  /// identical text.
  std::string dump_json() const;

 private:
  int family_id(const std::string& name);

  std::vector<Block> blocks_;
  int nvar_ = 0;
  std::vector<double> fixed_;  // NaN when free

  std::vector<int> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> vals_;
  std::vector<double> rhs_;
  std::vector<Sense> sense_;
  std::vector<int> row_family_;
  std::vector<std::string> families_;

  std::vector<QuadraticConstraint> quads_;
  LinExpr objective_;
  bool maximize_ = false;
};

/// Solver contract.  A backend must report an accurate status; Optimal
/// solutions are re-checked against the program afterwards.
class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual std::string name() const = 0;
  virtual Solution solve(const ConvexProgram& p, const SolverOptions& opt) const = 0;
};

/// Primal-dual interior-point method on the homogeneous self-dual embedding
/// (Nesterov-Todd scaling, Mehrotra predictor-corrector, sparse LDL' on the
/// quasi-definite reduced KKT system).
class InteriorPointBackend : public ConicBackend {
 public:
  std::string name() const override { return "hsd-ipm"; }
  Solution solve(const ConvexProgram& p, const SolverOptions& opt) const override;
};

/// Solves with the default backend.  Throws SolverFailure when the backend
/// reports numerical trouble or its Optimal answer fails the independent
/// feasibility re-check (affine 1e-7, quadratic 1e-6 relative).
Solution solve(const ConvexProgram& p, const SolverOptions& opt = {});

/// Adds t >= |w_i * row_i| for all i and returns the index of t.
int add_inf_norm_epigraph(ConvexProgram& p, const std::vector<LinExpr>& rows,
                          const Vec& weights, const std::string& name = "t_inf");

}  // namespace polyclf
