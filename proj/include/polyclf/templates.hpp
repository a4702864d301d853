#pragma once

#include <cstdint>
#include <vector>

#include "polyclf/bounds.hpp"
#include "polyclf/triplet.hpp"

namespace polyclf {

/// Number of leading rows of F with a zero last column.
int count_domain_rows(const Mat& F);

/// S2: keeps F and sets z_bar = zeta^N, from the scenario tree when `unc` is
/// given and from the nominal bound otherwise.
TemplateData make_template_s2(const Mat& F, const LinearSystem& sys, const StageCost& cost,
                              const QuadForm* Mbar, int N, const UncertaintyModel* unc = nullptr,
                              const ZetaOptions& opt = {});

/// S3: lower convex hull of (xi_k, J_N(xi_k)) above the domain {G1 x <= z1}.
/// Throws DegenerateHull for affinely dependent samples and Infeasible when a
/// sample has no admissible N-step trajectory.
TemplateData make_template_s3(const Mat& G1, const Vec& z1, const std::vector<Vec>& samples,
                              const LinearSystem& sys, const StageCost& cost, const QuadForm* Mbar,
                              int N, const SolverOptions& opt = {});

/// Sample placement for S3 on a polytope domain: its vertices, the midpoints
/// of the first `edge_midpoints` edges (in vertex order around the boundary,
/// planar domains only), the origin and `interior` seeded points drawn
/// uniformly and kept at least `spacing` apart from all others.
std::vector<Vec> s3_samples(const HPolyhedron& domain, int edge_midpoints, int interior,
                            std::uint64_t seed, double spacing = 0.1);

/// Mixes fixed domain directions with random lower-hemisphere rows (S1
/// interior rows, z_bar = 1); resamples the random rows until P(z_bar) is
/// simple.
TemplateData make_template_s1_on_domain(const Mat& G1, int f2, std::uint64_t seed,
                                        int max_attempts = 200);

/// Robust template whose zero level set is pinned to X_s.  Domain rows G1,
/// then G1.rows() anchor rows (c g_k / |g_k|, tilt) with c = sqrt(1 - tilt^2)
/// and z_k = c zs_k / |g_k|, then f2 - G1.rows() - 1 random interior rows and
/// the flat row -e_n.  z_bar is the min-max bound zeta^N except on the
/// anchors.  Not perturbed; callers apply perturb_to_simple.
TemplateData make_template_anchored(const Mat& G1, const Vec& zs, int f2, std::uint64_t seed,
                                    const LinearSystem& sys, const UncertaintyModel& unc,
                                    const StageCost& cost, int N, double tilt = -0.9,
                                    const ZetaOptions& opt = {});

}  // namespace polyclf
