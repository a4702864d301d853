#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "polyclf/types.hpp"

namespace polyclf {

/// Active-set detection tolerance, applied after rows are normalized to unit
/// Euclidean norm.
inline constexpr double kActiveTol = 1e-9;

// ---------------------------------------------------------------------------
// Dense simplex engine for small LPs.

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vec x;
  Vec y;  // multipliers of the equality rows (standard form)
  double value = 0.0;
  std::vector<int> basis;
};

/// min c'l  s.t.  A l = b, l >= 0.  Revised simplex, Dantzig pricing with a
/// switch to Bland's rule on degenerate streaks.  Meant for few rows.
LpResult solve_standard_lp(const Mat& A, const Vec& b, const Vec& c);

/// max c'x  s.t.  F x <= z, x free.  Solved through the dual standard form, so
/// the returned basis lists the facets defining the optimal vertex.
LpResult maximize_over(const Mat& F, const Vec& z, const Vec& c);

// ---------------------------------------------------------------------------

/// Polyhedron { x | F x <= z }.  Rows are normalized to unit norm on
/// construction; `row_norms()` keeps the original scaling.
class HPolyhedron {
 public:
  HPolyhedron() = default;
  HPolyhedron(const Mat& F, const Vec& z);

  static HPolyhedron box(const Vec& lower, const Vec& upper);

  const Mat& F() const { return F_; }
  const Vec& z() const { return z_; }
  const Vec& row_norms() const { return norms_; }
  int dim() const { return static_cast<int>(F_.cols()); }
  int rows() const { return static_cast<int>(F_.rows()); }

  bool contains(const Vec& x, double tol = kActiveTol) const;
  double max_violation(const Vec& x) const;
  bool is_empty() const;

  /// Adds the row e_last' x <= cap (normalized already).
  HPolyhedron with_cap(double cap) const;

 private:
  Mat F_;
  Vec z_;
  Vec norms_;
};

struct VertexInfo {
  Vec point;
  std::vector<int> active_set;  // sorted facet indices with slack <= kActiveTol
};

enum class VertexMethod {
  Auto,        // brute force when C(m,n) <= kBruteForceCrossover, else pivoting
  Pivot,       // graph traversal over adjacent bases
  BruteForce,  // every n-subset of facets
};

/// Crossover between brute force and pivoting in VertexMethod::Auto.  Below it
/// the n-subset scan is cheaper than the repeated LP-free pivot bookkeeping.
inline constexpr double kBruteForceCrossover = 5000.0;

/// Vertices of a pointed polyhedron, each reported once with its active set,
/// sorted lexicographically by point.  Unbounded polyhedra must have the
/// recession cone K_n (epigraph shape) and need `recession_cap`: a temporary
/// facet x_n <= cap is added and the vertices on it are discarded.
std::vector<VertexInfo> enumerate_vertices(const HPolyhedron& poly,
                                           std::optional<double> recession_cap = std::nullopt,
                                           VertexMethod method = VertexMethod::Auto);

/// Chooses a cap automatically (bounded polyhedra need none) and returns only
/// the genuine vertices.
std::vector<VertexInfo> enumerate_vertices_auto(const HPolyhedron& poly,
                                                VertexMethod method = VertexMethod::Auto);

/// A cap lying strictly above every genuine vertex; nullopt for bounded
/// polyhedra.
std::optional<double> find_recession_cap(const HPolyhedron& poly);

bool is_simple(const HPolyhedron& poly);

/// Random perturbation of z (uniform, |dz_i| <= epsilon) until P(F, z') is
/// simple.  Returns z unchanged when it already is.
Vec perturb_to_simple(const Mat& F, const Vec& z, double epsilon, std::uint64_t seed,
                      int max_attempts = 200);

/// max d'x over the polyhedron.
double support(const HPolyhedron& poly, const Vec& direction);

/// argmin ||x - p||_Q over p in poly (Q positive definite).  Exact: scans
/// faces of dimension >= 0 by active subsets of size <= n.
Vec project(const HPolyhedron& poly, const Vec& x, const Mat& Q);

/// Recession test: true iff F d <= 0 has only the zero solution.
bool is_bounded_direction_set(const Mat& F);

}  // namespace polyclf
