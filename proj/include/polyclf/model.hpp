#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "polyclf/geometry.hpp"
#include "polyclf/triplet.hpp"
#include "polyclf/types.hpp"

namespace polyclf {

/// x+ = A x + B u with polytopic state and input sets.
struct LinearSystem {
  Mat A;
  Mat B;
  HPolyhedron X;
  HPolyhedron U;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }

  /// Throws InvalidArgument on shape errors, AssumptionViolated when
  /// rank(B) < n_u or 0 is not in X or U.
  void validate() const;
};

LinearSystem make_system(const Mat& A, const Mat& B, const HPolyhedron& X, const HPolyhedron& U);

/// Vertices (A_l, B_l) of a matrix polytope and an additive disturbance set W.
struct UncertaintyModel {
  std::vector<std::pair<Mat, Mat>> AB;
  HPolyhedron W;

  int num_ab() const { return static_cast<int>(AB.size()); }
  std::vector<Vec> W_vertices() const;
  /// w_bar_j = max_{w in W} G_j w for every row of G.
  Vec support_rows(const Mat& G) const;
  /// Throws unless AB is nonempty and W is nonempty and bounded.
  void validate(int nx, int nu) const;
};

/// A single (A, B) vertex and W = conv{-d, d} given by a direction d and a
/// half-width; the segment is written as an H-polytope.
UncertaintyModel segment_uncertainty(const Mat& A, const Mat& B, const Vec& direction,
                                     double half_width);

/// (A, B) with W = {0}.
UncertaintyModel no_uncertainty(const Mat& A, const Mat& B);

struct StageCost {
  enum class Kind { Quadratic, SetDistance };
  Kind kind = Kind::Quadratic;
  Mat Q;
  Mat R;
  Mat K;               // SetDistance only
  HPolyhedron target;  // SetDistance only

  static StageCost quadratic(const Mat& Q, const Mat& R);
  static StageCost set_distance(const Mat& Q, const Mat& R, const Mat& K, const HPolyhedron& target);

  /// L(x, u).  The set-distance variant projects x onto the target in the Q
  /// metric.
  double eval(const Vec& x, const Vec& u) const;
};

/// One affine form  zc' z + vc' v + c  of a robust counterpart.
struct AffineForm {
  RowVec zc;
  RowVec vc;
  double c = 0.0;

  double eval(const Vec& z, const Vec& v) const { return zc.dot(z) + vc.dot(v) + c; }
};

/// The forms {G_j A_l R_i z + G_j B_l v + w_bar_j}_l whose maximum is the
/// worst case of facet row G_j at vertex R_i z under input v.
std::vector<AffineForm> robust_counterpart_rows(const UncertaintyModel& unc, const RowVec& Gj,
                                                const Mat& Ri);

struct RciTarget {
  Vec zs;             // facet parameter of X_s in the domain directions
  HPolyhedron set;    // X_s = {x | G1 x <= zs}
  double invariance_residual = 0.0;  // max over X_s vertices and W vertices
};

/// Smallest (by objective' zs, default all ones) configuration-constrained
/// polytope X_s = {x | G1 x <= zs} with (A_l + B_l K) X_s + W in X_s,
/// K X_s in U and X_s in X, from a single LP on the domain triplet.
RciTarget compute_rci_target(const ConfigurationTriplet& domain, const Mat& K,
                             const LinearSystem& sys, const UncertaintyModel& unc,
                             std::optional<Vec> objective = std::nullopt);

/// Exact vertex check of (A_l + B_l K) x + w in X_s.
double rci_invariance_residual(const HPolyhedron& Xs, const Mat& K, const UncertaintyModel& unc);

/// Largest (by sum of facet parameters) lambda-contractive polytope in the
/// domain directions: vertex controls v_i in U with
/// G (A R_i z + B v_i) <= lambda z, R_i z in X, E z <= 0.  With `unc` the
/// rows are robustified and contract toward `target_zs`.
Vec compute_contractive_domain(const ConfigurationTriplet& domain, const LinearSystem& sys,
                               double lambda, const UncertaintyModel* unc = nullptr,
                               const Vec* target_zs = nullptr);

}  // namespace polyclf
