#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "polyclf/geometry.hpp"
#include "polyclf/types.hpp"

namespace polyclf {

/// Nominal: epigraph template whose lowest vertex is numbered first.
/// Robust: epigraph template whose last row is -e_n (the flat facet).
/// Domain: a bounded polytope without epigraph structure (used for the
/// state-space domain and RCI target sets).
enum class TripletKind { Nominal, Robust, Domain };

/// Full: one row per (vertex, inactive facet).  Reduced: one row per bounded
/// edge of the template polyhedron.
enum class EdgeMode { Full, Reduced };

std::string to_string(TripletKind k);
TripletKind triplet_kind_from_string(const std::string& s);

/// Facet matrix F, edge matrix E and vertex matrices V_i.  V_i is stored in
/// compact form: V_i z = inverse[i] * z(active[i]).
struct ConfigurationTriplet {
  TripletKind kind = TripletKind::Nominal;
  EdgeMode edge_mode = EdgeMode::Full;
  Mat F;
  Vec z_bar;
  int f1 = 0;
  int f2 = 0;
  SpMat E;
  std::vector<std::vector<int>> active;
  std::vector<Mat> inverse;
  std::vector<std::pair<int, int>> edges;  // bounded edges of P(z_bar)
  bool lowest_tie = false;                 // nominal: second-lowest vertex ties at z_bar

  int dim() const { return static_cast<int>(F.cols()); }
  int state_dim() const { return kind == TripletKind::Domain ? dim() : dim() - 1; }
  int num_facets() const { return static_cast<int>(F.rows()); }
  int num_vertices() const { return static_cast<int>(active.size()); }
  int num_edge_rows() const { return static_cast<int>(E.rows()); }

  Vec vertex(int i, const Vec& z) const;
  /// R_i z (state part of the vertex).
  Vec state(int i, const Vec& z) const;
  /// s_i' z (height of the vertex); epigraph kinds only.
  double level(int i, const Vec& z) const;
  /// Dense n x f matrix V_i.
  Mat V(int i) const;
  /// Coefficient of z_{active[i][k]} in component r of V_i z.
  double coef(int i, int r, int k) const { return inverse[i](r, k); }

  /// max_k (E z)_k; E z <= 0 holds iff this is <= 0.
  double edge_residual(const Vec& z) const;
};

/// Builds the triplet of the simple template polyhedron P(z_bar).
/// Epigraph kinds check the block structure (G1 0; G2 h2) with h2 < 0 and G1
/// bounding the domain; the robust kind also requires F_f = -e_n.  Rows that
/// are strictly redundant at z_bar are kept: every vertex must stay inside
/// them, which adds one E row per vertex in reduced mode.
ConfigurationTriplet build_triplet(const Mat& F, const Vec& z_bar, TripletKind kind,
                                   EdgeMode mode = EdgeMode::Full);

/// Rebuilds E in the other mode without re-enumerating vertices.
ConfigurationTriplet with_edge_mode(const ConfigurationTriplet& t, EdgeMode mode);

struct ValidationReport {
  int trials = 0;
  int vertex_failures = 0;      // some V_i z violates F x <= z
  int membership_failures = 0;  // H- and V-representations disagree on a point
  int lowest_failures = 0;      // nominal: V_1 z is not the lowest vertex
  int lowest_ties = 0;          // nominal: tie with another vertex (flagged only)
  int points_checked = 0;
  double max_vertex_violation = 0.0;
  std::vector<std::string> messages;

  bool ok() const { return vertex_failures == 0 && membership_failures == 0 && lowest_failures == 0; }
};

/// Random parameters z = z_bar + t r with E z <= 0, t chosen uniformly up to
/// the first E row that becomes active along r (capped at one).
std::vector<Vec> sample_feasible_parameters(const ConfigurationTriplet& t, int count,
                                            std::uint64_t seed);

/// Checks the configuration property on `trials` random feasible z.
ValidationReport validate_triplet(const ConfigurationTriplet& t, int trials, std::uint64_t seed,
                                  int points_per_trial = 20);

/// True iff p lies in conv(V_1 z, ..., V_v z) (+ K_n for epigraph kinds), by a
/// feasibility LP; `distance` receives the l1 misfit of the best combination.
bool in_vertex_hull(const ConfigurationTriplet& t, const Vec& z, const Vec& p,
                    double tol = 1e-7, double* distance = nullptr);

// ---------------------------------------------------------------------------
// Template strategies.

struct TemplateData {
  Mat F;
  Vec z_bar;
  int f1 = 0;
  int f2 = 0;
};

/// Random facet directions: f1 rows on the equator of the lower hemisphere,
/// f2 rows strictly inside it (last coordinate <= -0.05), z_bar = 1.  With
/// `flat_last` the last of the f2 rows is replaced by -e_n.  Resamples until
/// G1 bounds the domain and P(z_bar) is simple.
TemplateData make_template_s1(int f1, int f2, std::uint64_t seed, int n_x = 2,
                              bool flat_last = false, int max_attempts = 200);

/// Regular polygon directions (n_x = 2): rows (cos, sin) at angles
/// offset + 2 pi k / count.
Mat polygon_directions(int count, double offset = 0.0);

/// Lower convex hull of the graph points (samples_k, values_k) combined with
/// the domain rows: F = (G1 0; a_j' -1), z_bar = (z1; -b_j) for the hull
/// planes y = a_j' x + b_j.  Throws DegenerateHull when the samples do not
/// span the state space.
TemplateData lower_hull_template(const Mat& G1, const Vec& z1, const std::vector<Vec>& samples,
                                 const std::vector<double>& values);

}  // namespace polyclf
