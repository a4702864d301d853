#include "polyclf/triplet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "polyclf/detail/combinations.hpp"
#include "polyclf/error.hpp"

namespace polyclf {

std::string to_string(TripletKind k) {
  switch (k) {
    case TripletKind::Nominal:
      return "nominal";
    case TripletKind::Robust:
      return "robust";
    case TripletKind::Domain:
      return "domain";
  }
  return "?";
}

TripletKind triplet_kind_from_string(const std::string& s) {
  if (s == "nominal") return TripletKind::Nominal;
  if (s == "robust") return TripletKind::Robust;
  if (s == "domain") return TripletKind::Domain;
  throw Error(ErrorCode::InvalidArgument, "unknown triplet kind '" + s + "'");
}

Vec ConfigurationTriplet::vertex(int i, const Vec& z) const {
  const auto& J = active[i];
  Vec zj(J.size());
  for (size_t k = 0; k < J.size(); ++k) zj(k) = z(J[k]);
  return inverse[i] * zj;
}

Vec ConfigurationTriplet::state(int i, const Vec& z) const {
  return vertex(i, z).head(state_dim());
}

double ConfigurationTriplet::level(int i, const Vec& z) const {
  if (kind == TripletKind::Domain) throw Error(ErrorCode::ModeMismatch, "domain triplet has no level");
  const auto& J = active[i];
  double s = 0.0;
  for (size_t k = 0; k < J.size(); ++k) s += inverse[i](dim() - 1, k) * z(J[k]);
  return s;
}

Mat ConfigurationTriplet::V(int i) const {
  Mat out = Mat::Zero(dim(), num_facets());
  for (size_t k = 0; k < active[i].size(); ++k) out.col(active[i][k]) = inverse[i].col(k);
  return out;
}

double ConfigurationTriplet::edge_residual(const Vec& z) const {
  if (E.rows() == 0) return -kInf;
  return (E * z).maxCoeff();
}

namespace {

void check_epigraph_structure(const Mat& F, TripletKind kind, int& f1, int& f2) {
  const int f = static_cast<int>(F.rows());
  const int n = static_cast<int>(F.cols());
  if (kind == TripletKind::Domain) {
    f1 = f;
    f2 = 0;
    if (!is_bounded_direction_set(F))
      throw Error(ErrorCode::AssumptionViolated, "domain facet matrix does not bound the polytope");
    return;
  }
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "epigraph template needs n >= 2");
  f1 = 0;
  while (f1 < f && F(f1, n - 1) == 0.0) ++f1;
  for (int r = f1; r < f; ++r) {
    if (F(r, n - 1) == 0.0)
      throw Error(ErrorCode::AssumptionViolated,
                  "row " + std::to_string(r) + " has h = 0 after the lower block started");
    if (F(r, n - 1) > 0.0)
      throw Error(ErrorCode::AssumptionViolated,
                  "row " + std::to_string(r) + " has h > 0; lower facets need h < 0");
  }
  f2 = f - f1;
  if (f2 == 0) throw Error(ErrorCode::AssumptionViolated, "no lower facets (f2 = 0)");
  if (f1 == 0 || !is_bounded_direction_set(F.topLeftCorner(f1, n - 1)))
    throw Error(ErrorCode::AssumptionViolated, "G1 x <= 0 admits a nonzero x; domain unbounded");
  if (kind == TripletKind::Robust) {
    RowVec flat = RowVec::Zero(n);
    flat(n - 1) = -1.0;
    if ((F.row(f - 1) - flat).cwiseAbs().maxCoeff() > 1e-12)
      throw Error(ErrorCode::AssumptionViolated,
                  "robust template: last row " + std::to_string(f - 1) + " is not -e_n");
  }
}

// Row F_j V_i - e_j scaled by 1/|F_j|.
void append_edge_row(const ConfigurationTriplet& t, const Vec& row_norms, int i, int j,
                     std::vector<Eigen::Triplet<double>>& trip, int row) {
  const auto& J = t.active[i];
  const RowVec fj = t.F.row(j) / row_norms(j);
  const RowVec c = fj * t.inverse[i];
  std::vector<std::pair<int, double>> entries;
  for (size_t k = 0; k < J.size(); ++k) entries.emplace_back(J[k], c(k));
  entries.emplace_back(j, -1.0 / row_norms(j));
  std::sort(entries.begin(), entries.end());
  for (auto [col, v] : entries)
    if (v != 0.0) trip.emplace_back(row, col, v);
}

void build_edge_matrix(ConfigurationTriplet& t) {
  const int f = t.num_facets();
  const int nv = t.num_vertices();
  const Vec norms = t.F.rowwise().norm();
  std::vector<Eigen::Triplet<double>> trip;
  int rows = 0;
  if (t.edge_mode == EdgeMode::Full) {
    for (int i = 0; i < nv; ++i) {
      const auto& J = t.active[i];
      for (int j = 0; j < f; ++j) {
        if (std::binary_search(J.begin(), J.end(), j)) continue;
        append_edge_row(t, norms, i, j, trip, rows++);
      }
    }
  } else {
    for (auto [i, k] : t.edges) {
      std::vector<int> diff;
      std::set_difference(t.active[k].begin(), t.active[k].end(), t.active[i].begin(),
                          t.active[i].end(), std::back_inserter(diff));
      append_edge_row(t, norms, i, diff.front(), trip, rows++);
    }
    std::vector<char> used(f, 0);
    for (const auto& J : t.active)
      for (int j : J) used[j] = 1;
    for (int j = 0; j < f; ++j) {
      if (used[j]) continue;
      for (int i = 0; i < nv; ++i) append_edge_row(t, norms, i, j, trip, rows++);
    }
  }
  t.E.resize(rows, f);
  t.E.setFromTriplets(trip.begin(), trip.end());
  t.E.makeCompressed();
}

}  // namespace

ConfigurationTriplet build_triplet(const Mat& F, const Vec& z_bar, TripletKind kind,
                                   EdgeMode mode) {
  if (F.rows() != z_bar.size())
    throw Error(ErrorCode::InvalidArgument, "facet matrix and z_bar sizes differ");
  ConfigurationTriplet t;
  t.kind = kind;
  t.edge_mode = mode;
  t.F = F;
  t.z_bar = z_bar;
  check_epigraph_structure(F, kind, t.f1, t.f2);

  const HPolyhedron P(F, z_bar);
  if (P.is_empty()) throw Error(ErrorCode::Infeasible, "template polyhedron P(z_bar) is empty");
  std::vector<VertexInfo> verts = enumerate_vertices_auto(P);
  const int n = static_cast<int>(F.cols());
  for (size_t k = 0; k < verts.size(); ++k)
    if (static_cast<int>(verts[k].active_set.size()) != n)
      throw Error(ErrorCode::NotSimple, "vertex " + std::to_string(k) + " has " +
                                            std::to_string(verts[k].active_set.size()) +
                                            " active facets (expected " + std::to_string(n) + ")");
  if (verts.empty()) throw Error(ErrorCode::Infeasible, "template polyhedron has no vertices");

  if (kind == TripletKind::Nominal) {
    size_t lo = 0;
    for (size_t k = 1; k < verts.size(); ++k)
      if (verts[k].point(n - 1) < verts[lo].point(n - 1)) lo = k;
    const double ylo = verts[lo].point(n - 1);
    for (size_t k = 0; k < verts.size(); ++k)
      if (k != lo && verts[k].point(n - 1) <= ylo + 1e-10 * (1.0 + std::abs(ylo)))
        t.lowest_tie = true;
    std::rotate(verts.begin(), verts.begin() + lo, verts.begin() + lo + 1);
  } else if (kind == TripletKind::Robust) {
    const int flat = static_cast<int>(F.rows()) - 1;
    std::stable_partition(verts.begin(), verts.end(), [flat](const VertexInfo& v) {
      return !std::binary_search(v.active_set.begin(), v.active_set.end(), flat);
    });
  }

  for (const auto& v : verts) {
    Mat S(n, n);
    for (int k = 0; k < n; ++k) S.row(k) = F.row(v.active_set[k]);
    Eigen::FullPivLU<Mat> lu(S);
    if (!lu.isInvertible()) throw Error(ErrorCode::NotSimple, "singular active-set system");
    t.active.push_back(v.active_set);
    t.inverse.push_back(lu.inverse());
  }

  // Edges join vertices that share n-1 facets.
  std::map<std::vector<int>, std::vector<int>> buckets;
  for (int i = 0; i < t.num_vertices(); ++i) {
    detail::for_each_combination(n, n - 1, [&](const std::vector<int>& pick) {
      std::vector<int> key(n - 1);
      for (int k = 0; k < n - 1; ++k) key[k] = t.active[i][pick[k]];
      buckets[key].push_back(i);
    });
  }
  for (const auto& [key, vs] : buckets) {
    if (vs.size() > 2) throw Error(ErrorCode::NotSimple, "edge shared by more than two vertices");
    if (vs.size() == 2) t.edges.emplace_back(std::min(vs[0], vs[1]), std::max(vs[0], vs[1]));
  }
  std::sort(t.edges.begin(), t.edges.end());
  build_edge_matrix(t);
  return t;
}

ConfigurationTriplet with_edge_mode(const ConfigurationTriplet& t, EdgeMode mode) {
  ConfigurationTriplet out = t;
  out.edge_mode = mode;
  build_edge_matrix(out);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Vec> sample_feasible_parameters(const ConfigurationTriplet& t, int count,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int f = t.num_facets();
  const int n = t.dim();
  const double scale = 0.3 * std::max(1.0, t.z_bar.cwiseAbs().maxCoeff());
  const Vec ez = t.E * t.z_bar;
  std::vector<Vec> out;
  for (int s = 0; s < count; ++s) {
    const Vec r = Vec::NullaryExpr(f, [&]() { return scale * g(rng); });
    const Vec er = t.E * r;
    double tmax = 1.0;
    for (int k = 0; k < er.size(); ++k)
      if (er(k) > 0) tmax = std::min(tmax, std::max(-ez(k), 0.0) / er(k));
    const double alpha = 0.5 + unif(rng);
    Vec shift = Vec::NullaryExpr(n, [&]() { return 0.2 * scale * g(rng); });
    out.push_back(alpha * (t.z_bar + unif(rng) * tmax * r) + t.F * shift);
  }
  return out;
}

bool in_vertex_hull(const ConfigurationTriplet& t, const Vec& z, const Vec& p, double tol,
                    double* distance) {
  const int n = t.dim();
  const int nv = t.num_vertices();
  const bool ray = t.kind != TripletKind::Domain;
  const int cols = nv + (ray ? 1 : 0) + 2 * n;
  Mat A = Mat::Zero(n + 1, cols);
  Vec b(n + 1);
  Vec c = Vec::Zero(cols);
  for (int i = 0; i < nv; ++i) {
    A.block(0, i, n, 1) = t.vertex(i, z);
    A(n, i) = 1.0;
  }
  int col = nv;
  if (ray) A(n - 1, col++) = 1.0;
  A.block(0, col, n, n) = Mat::Identity(n, n);
  A.block(0, col + n, n, n) = -Mat::Identity(n, n);
  c.tail(2 * n).setOnes();
  b << p, 1.0;
  const LpResult r = solve_standard_lp(A, b, c);
  const double d = r.status == LpStatus::Optimal ? r.value : kInf;
  if (distance) *distance = d;
  return d <= tol;
}

ValidationReport validate_triplet(const ConfigurationTriplet& t, int trials, std::uint64_t seed,
                                  int points_per_trial) {
  ValidationReport rep;
  if (trials <= 0) return rep;
  const auto zs = sample_feasible_parameters(t, trials, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  const int n = t.dim();
  const int nv = t.num_vertices();
  const Vec norms = t.F.rowwise().norm();
  const bool epi = t.kind != TripletKind::Domain;

  for (int trial = 0; trial < trials; ++trial) {
    const Vec& z = zs[trial];
    ++rep.trials;
    Mat verts(n, nv);
    for (int i = 0; i < nv; ++i) verts.col(i) = t.vertex(i, z);

    // (a) every vertex is feasible.
    for (int i = 0; i < nv; ++i) {
      const double viol = ((t.F * verts.col(i) - z).cwiseQuotient(norms)).maxCoeff();
      rep.max_vertex_violation = std::max(rep.max_vertex_violation, viol);
      if (viol > 1e-8) {
        ++rep.vertex_failures;
        rep.messages.push_back("trial " + std::to_string(trial) + ": vertex " + std::to_string(i) +
                               " violates a facet by " + std::to_string(viol));
      }
    }

    // (b) both representations agree on random points.
    const Vec lo = verts.rowwise().minCoeff();
    Vec hi = verts.rowwise().maxCoeff();
    if (epi) hi(n - 1) += 1.0;
    const Vec pad = 0.1 * (hi - lo) + Vec::Constant(n, 1e-3);
    for (int k = 0; k < points_per_trial; ++k) {
      // V -> H: convex combination plus a ray.
      Vec w(nv);
      for (int i = 0; i < nv; ++i) w(i) = expo(rng);
      Vec p = verts * (w / w.sum());
      if (epi) p(n - 1) += unif(rng) < 0.5 ? 0.0 : expo(rng);
      const double hv = ((t.F * p - z).cwiseQuotient(norms)).maxCoeff();
      if (hv > 1e-7) {
        ++rep.membership_failures;
        rep.messages.push_back("trial " + std::to_string(trial) +
                               ": hull point outside the H-representation");
      }
      // H -> V: uniform point of a padded box, classified both ways.
      Vec q(n);
      for (int d = 0; d < n; ++d) q(d) = lo(d) - pad(d) + unif(rng) * (hi(d) - lo(d) + 2 * pad(d));
      const double qv = ((t.F * q - z).cwiseQuotient(norms)).maxCoeff();
      if (std::abs(qv) < 1e-7) continue;
      ++rep.points_checked;
      const bool in_h = qv < 0;
      const bool in_v = in_vertex_hull(t, z, q, 1e-7);
      if (in_h != in_v) {
        ++rep.membership_failures;
        rep.messages.push_back("trial " + std::to_string(trial) + ": point classified " +
                               (in_h ? "inside" : "outside") + " by H but not by V");
      }
    }

    // (c) nominal: V_1 z is the unique lowest vertex.
    if (t.kind == TripletKind::Nominal) {
      const double y1 = verts(n - 1, 0);
      for (int i = 1; i < nv; ++i) {
        const double yi = verts(n - 1, i);
        if (yi < y1 - 1e-10) {
          ++rep.lowest_failures;
          rep.messages.push_back("trial " + std::to_string(trial) + ": vertex " +
                                 std::to_string(i) + " lies below vertex 0");
          break;
        }
        if (yi <= y1 + 1e-10 && (verts.col(i) - verts.col(0)).norm() > 1e-10) ++rep.lowest_ties;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

TemplateData make_template_s1(int f1, int f2, std::uint64_t seed, int n_x, bool flat_last,
                              int max_attempts) {
  if (n_x < 1) throw Error(ErrorCode::InvalidArgument, "n_x must be positive");
  if (f1 < n_x + 1)
    throw Error(ErrorCode::InvalidArgument, "f1 must be at least n_x + 1 to bound the domain");
  if (f2 < 1) throw Error(ErrorCode::InvalidArgument, "f2 must be at least 1");
  const int n = n_x + 1;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    TemplateData out;
    out.f1 = f1;
    out.f2 = f2;
    out.F = Mat::Zero(f1 + f2, n);
    for (int r = 0; r < f1; ++r) {
      Vec c = Vec::NullaryExpr(n_x, [&]() { return g(rng); });
      while (c.norm() < 1e-8) c = Vec::NullaryExpr(n_x, [&]() { return g(rng); });
      out.F.row(r).head(n_x) = c.normalized().transpose();
    }
    for (int r = f1; r < f1 + f2; ++r) {
      Vec c(n);
      do {
        c = Vec::NullaryExpr(n, [&]() { return g(rng); });
        c.normalize();
        c(n - 1) = -std::abs(c(n - 1));
      } while (c(n - 1) > -0.05);
      out.F.row(r) = c.transpose();
    }
    if (flat_last) {
      out.F.row(f1 + f2 - 1).setZero();
      out.F(f1 + f2 - 1, n - 1) = -1.0;
    }
    if (!is_bounded_direction_set(out.F.topLeftCorner(f1, n_x))) continue;
    out.z_bar = Vec::Ones(f1 + f2);
    if (!is_simple(HPolyhedron(out.F, out.z_bar))) continue;
    return out;
  }
  throw Error(ErrorCode::PerturbationFailed,
              "no simple S1 template after " + std::to_string(max_attempts) + " draws");
}

Mat polygon_directions(int count, double offset) {
  Mat G(count, 2);
  for (int k = 0; k < count; ++k) {
    const double a = offset + 2.0 * std::numbers::pi * k / count;
    G(k, 0) = std::cos(a);
    G(k, 1) = std::sin(a);
  }
  return G;
}

TemplateData lower_hull_template(const Mat& G1, const Vec& z1, const std::vector<Vec>& samples,
                                 const std::vector<double>& values) {
  const int nx = static_cast<int>(G1.cols());
  const int k = static_cast<int>(samples.size());
  if (static_cast<int>(values.size()) != k)
    throw Error(ErrorCode::InvalidArgument, "sample and value counts differ");
  if (k < nx + 1) throw Error(ErrorCode::DegenerateHull, "need at least n_x + 1 samples");
  Mat D(nx, k - 1);
  for (int i = 1; i < k; ++i) D.col(i - 1) = samples[i] - samples[0];
  Eigen::FullPivLU<Mat> span(D);
  span.setThreshold(1e-10);
  if (span.rank() < nx) throw Error(ErrorCode::DegenerateHull, "samples are affinely dependent");

  double vscale = 1.0;
  for (double v : values) vscale = std::max(vscale, std::abs(v));
  struct Plane {
    Vec a;
    double b;
  };
  std::vector<Plane> planes;
  detail::for_each_combination(k, nx + 1, [&](const std::vector<int>& pick) {
    Mat S(nx + 1, nx + 1);
    Vec r(nx + 1);
    for (int q = 0; q <= nx; ++q) {
      S.row(q).head(nx) = samples[pick[q]].transpose();
      S(q, nx) = 1.0;
      r(q) = values[pick[q]];
    }
    Eigen::FullPivLU<Mat> lu(S);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return;
    const Vec ab = lu.solve(r);
    const Vec a = ab.head(nx);
    const double b = ab(nx);
    for (int m = 0; m < k; ++m)
      if (values[m] < a.dot(samples[m]) + b - 1e-9 * vscale) return;
    for (const auto& p : planes)
      if ((p.a - a).cwiseAbs().maxCoeff() + std::abs(p.b - b) < 1e-8 * (1.0 + vscale)) return;
    planes.push_back({a, b});
  });
  if (planes.empty()) throw Error(ErrorCode::DegenerateHull, "no lower hull facets found");
  std::sort(planes.begin(), planes.end(), [](const Plane& p, const Plane& q) {
    for (int i = 0; i < p.a.size(); ++i)
      if (p.a(i) != q.a(i)) return p.a(i) < q.a(i);
    return p.b < q.b;
  });

  TemplateData out;
  out.f1 = static_cast<int>(G1.rows());
  out.f2 = static_cast<int>(planes.size());
  out.F = Mat::Zero(out.f1 + out.f2, nx + 1);
  out.z_bar.resize(out.f1 + out.f2);
  out.F.topLeftCorner(out.f1, nx) = G1;
  out.z_bar.head(out.f1) = z1;
  for (int j = 0; j < out.f2; ++j) {
    out.F.row(out.f1 + j).head(nx) = planes[j].a.transpose();
    out.F(out.f1 + j, nx) = -1.0;
    out.z_bar(out.f1 + j) = -planes[j].b;
  }
  return out;
}

}  // namespace polyclf
