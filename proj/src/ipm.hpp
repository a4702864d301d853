#pragma once

#include <Eigen/Sparse>

#include <vector>

#include "polyclf/conic.hpp"

namespace polyclf::detail {

using SpRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// min c'x  s.t.  G x + s = h, A x = b, s in K, with K the product of the
/// nonnegative orthant (first l rows) and second-order cones of the listed
/// sizes, { (t, u) : t >= ||u|| }.
struct ConeProblem {
  Vec c;
  SpRow G;
  Vec h;
  int l = 0;
  std::vector<int> soc;
  SpRow A;
  Vec b;
};

struct ConeResult {
  SolveStatus status = SolveStatus::NumericalTrouble;
  Vec x, y, z, s;
  int iterations = 0;
  double pres = 0.0;
  double dres = 0.0;
  double gap = 0.0;
};

ConeResult solve_cone(const ConeProblem& prob, const SolverOptions& opt);

}  // namespace polyclf::detail
