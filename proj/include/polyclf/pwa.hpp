#pragma once

#include <string>
#include <vector>

#include "polyclf/bounds.hpp"
#include "polyclf/geometry.hpp"
#include "polyclf/model.hpp"
#include "polyclf/triplet.hpp"

namespace polyclf {

/// Projection of one lower facet of P(z) onto the state space.
struct Region {
  int facet = -1;                          // row index in F (>= f1)
  std::vector<int> vertices;               // epigraph vertex indices, ascending
  std::vector<std::vector<int>> simplices; // pulling triangulation, n_x + 1 vertices each
};

/// M with epi(M) = P(z) for a configuration triplet and a feasible z.
class PwaFunction {
 public:
  PwaFunction(ConfigurationTriplet t, Vec z);

  const ConfigurationTriplet& triplet() const { return t_; }
  const Vec& z() const { return z_; }
  int state_dim() const { return t_.state_dim(); }
  int num_regions() const { return static_cast<int>(regions_.size()); }
  const std::vector<Region>& regions() const { return regions_; }
  const std::vector<Vec>& vertex_points() const { return points_; }  // R_i z
  const Vec& vertex_values() const { return values_; }               // s_i' z
  HPolyhedron domain() const;

  bool in_domain(const Vec& x, double tol = 1e-9) const;
  /// max_j (z2_j - G2_j x) / h_j on the domain, +inf outside.
  double eval(const Vec& x) const;
  /// The affine piece of lower facet `facet` at x (no domain check).
  double piece(int facet, const Vec& x) const;
  /// Lower facet attaining the maximum (lowest index on ties); throws
  /// OutOfDomain.
  int locate(const Vec& x) const;
  /// Index into regions() of a facet, or -1 when the facet has no region.
  int region_of_facet(int facet) const { return region_index_.at(facet); }

  Vec eval_batch_serial(const std::vector<Vec>& xs) const;
  Vec eval_batch_parallel(const std::vector<Vec>& xs) const;

 private:
  ConfigurationTriplet t_;
  Vec z_;
  std::vector<Vec> points_;
  Vec values_;
  std::vector<Region> regions_;
  std::vector<int> region_index_;
};

/// Vertex-control interpolation on top of a PwaFunction.
class ExplicitController {
 public:
  ExplicitController(PwaFunction m, std::vector<Vec> vertex_controls);

  const PwaFunction& function() const { return m_; }
  const std::vector<Vec>& vertex_controls() const { return v_; }

  struct Query {
    Vec u;
    int region = -1;
    Vec theta;           // barycentric weights over `simplex`
    std::vector<int> simplex;
    bool degenerate = false;  // least-squares fallback was used
  };
  /// Locates the region, finds the containing simplex of its fan
  /// triangulation (first in order) and interpolates the vertex controls.
  /// Throws OutOfDomain.
  Query query(const Vec& x) const;
  Vec feedback(const Vec& x) const { return query(x).u; }

 private:
  PwaFunction m_;
  std::vector<Vec> v_;
};

/// Input candidates for one-step searches: a tensor grid over the bounding
/// box of U filtered by membership (`res` points per axis).
std::vector<Vec> input_grid(const HPolyhedron& U, int res);

struct HjbSearch {
  int u_res = 201;
  bool refine = true;            // golden-section around the best grid point (n_u = 1)
  std::vector<Vec> candidates;   // extra inputs to try, e.g. the interpolated feedback
};

/// min over the search of L(x, u) + max_{l, w} M(A_l x + B_l u + w);
/// +inf when every candidate leaves dom(M).
double one_step_value(const PwaFunction& M, const LinearSystem& sys, const StageCost& cost,
                      const UncertaintyModel* unc, const Vec& x, const HjbSearch& search,
                      Vec* best_u = nullptr);

/// M(x) minus one_step_value; throws OutOfDomain.
double hjb_residual(const PwaFunction& M, const LinearSystem& sys, const StageCost& cost,
                    const UncertaintyModel* unc, const Vec& x, const HjbSearch& search);

/// Re-solves min_u L(x, u) + M(Ax + Bu) by search; the alternative to the
/// interpolated feedback.
Vec exact_feedback(const PwaFunction& M, const LinearSystem& sys, const StageCost& cost,
                   const UncertaintyModel* unc, const Vec& x, const HjbSearch& search);

/// max over reference nodes inside dom(M) of |M - ref| divided by the
/// reference maximum.
double max_relative_error(const PwaFunction& M, const GridFunction& ref);

/// "region,facet,vertex,x1,x2" rows: one line per region vertex in boundary
/// order (planar functions only).
std::string export_partition_csv(const PwaFunction& M);

/// "level,k,x1,x2" rows: the vertices of each sublevel set {M <= c} in
/// boundary order.  Throws InvalidArgument for negative levels.
std::string export_contours_csv(const PwaFunction& M, const std::vector<double>& levels);

}  // namespace polyclf
