#include "polyclf/templates.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "polyclf/error.hpp"

namespace polyclf {

int count_domain_rows(const Mat& F) {
  const int last = static_cast<int>(F.cols()) - 1;
  int f1 = 0;
  while (f1 < F.rows() && F(f1, last) == 0.0) ++f1;
  return f1;
}

TemplateData make_template_s2(const Mat& F, const LinearSystem& sys, const StageCost& cost,
                              const QuadForm* Mbar, int N, const UncertaintyModel* unc,
                              const ZetaOptions& opt) {
  TemplateData out;
  out.F = F;
  out.f1 = count_domain_rows(F);
  out.f2 = static_cast<int>(F.rows()) - out.f1;
  out.z_bar = unc ? zeta_minmax(F, sys, *unc, cost, Mbar, N, opt)
                  : zeta_nominal(F, sys, cost, Mbar, N, opt);
  if (HPolyhedron(F, out.z_bar).is_empty())
    throw Error(ErrorCode::Infeasible, "P(zeta^N) is empty");
  return out;
}

TemplateData make_template_s3(const Mat& G1, const Vec& z1, const std::vector<Vec>& samples,
                              const LinearSystem& sys, const StageCost& cost, const QuadForm* Mbar,
                              int N, const SolverOptions& opt) {
  const HPolyhedron domain(G1, z1);
  std::vector<double> values;
  for (size_t k = 0; k < samples.size(); ++k) {
    if (!domain.contains(samples[k], 1e-7))
      throw Error(ErrorCode::InvalidArgument, "sample " + std::to_string(k) + " is outside the domain");
    const double v = ocp_value(sys, cost, Mbar, N, samples[k], opt);
    if (!std::isfinite(v))
      throw Error(ErrorCode::Infeasible, "sample " + std::to_string(k) + " has no admissible trajectory");
    values.push_back(v);
  }
  return lower_hull_template(G1, z1, samples, values);
}

std::vector<Vec> s3_samples(const HPolyhedron& domain, int edge_midpoints, int interior,
                            std::uint64_t seed, double spacing) {
  std::vector<Vec> pts;
  const auto verts = enumerate_vertices(domain);
  const int n = domain.dim();
  if (edge_midpoints > 0) {
    if (n != 2) throw Error(ErrorCode::InvalidArgument, "edge midpoints need a planar domain");
    // Order the vertices around the centroid.
    Vec c = Vec::Zero(2);
    for (const auto& v : verts) c += v.point;
    c /= static_cast<double>(verts.size());
    std::vector<Vec> ring;
    for (const auto& v : verts) ring.push_back(v.point);
    std::sort(ring.begin(), ring.end(), [&](const Vec& a, const Vec& b) {
      return std::atan2(a(1) - c(1), a(0) - c(0)) < std::atan2(b(1) - c(1), b(0) - c(0));
    });
    for (const auto& p : ring) pts.push_back(p);
    const int m = static_cast<int>(ring.size());
    for (int k = 0; k < std::min(edge_midpoints, m); ++k)
      pts.push_back(0.5 * (ring[k] + ring[(k + 1) % m]));
  } else {
    for (const auto& v : verts) pts.push_back(v.point);
  }
  const Vec origin = Vec::Zero(n);
  if (!domain.contains(origin)) throw Error(ErrorCode::InvalidArgument, "domain must contain 0");
  pts.push_back(origin);

  Vec lo(n), hi(n);
  for (int d = 0; d < n; ++d) {
    lo(d) = -support(domain, -Vec::Unit(n, d));
    hi(d) = support(domain, Vec::Unit(n, d));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int added = 0;
  for (int tries = 0; added < interior; ++tries) {
    if (tries > 100000) throw Error(ErrorCode::InvalidArgument, "could not place interior samples");
    Vec x(n);
    for (int d = 0; d < n; ++d) x(d) = lo(d) + (hi(d) - lo(d)) * U(rng);
    if (domain.max_violation(x) > -spacing * 0.5) continue;
    bool close = false;
    for (const auto& p : pts) close = close || (p - x).norm() < spacing;
    if (close) continue;
    pts.push_back(x);
    ++added;
  }
  return pts;
}

TemplateData make_template_s1_on_domain(const Mat& G1, int f2, std::uint64_t seed,
                                        int max_attempts) {
  const int nx = static_cast<int>(G1.cols());
  const int n = nx + 1;
  const int f1 = static_cast<int>(G1.rows());
  if (f2 < 1) throw Error(ErrorCode::InvalidArgument, "f2 must be at least 1");
  if (!is_bounded_direction_set(G1))
    throw Error(ErrorCode::AssumptionViolated, "domain rows do not bound the state space");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    TemplateData out;
    out.f1 = f1;
    out.f2 = f2;
    out.F = Mat::Zero(f1 + f2, n);
    for (int r = 0; r < f1; ++r) out.F.row(r).head(nx) = G1.row(r).normalized();
    for (int r = f1; r < f1 + f2; ++r) {
      Vec c(n);
      do {
        c = Vec::NullaryExpr(n, [&]() { return g(rng); });
        c.normalize();
        c(n - 1) = -std::abs(c(n - 1));
      } while (c(n - 1) > -0.05);
      out.F.row(r) = c.transpose();
    }
    out.z_bar = Vec::Ones(f1 + f2);
    if (!is_simple(HPolyhedron(out.F, out.z_bar))) continue;
    return out;
  }
  throw Error(ErrorCode::PerturbationFailed,
              "no simple template after " + std::to_string(max_attempts) + " draws");
}

TemplateData make_template_anchored(const Mat& G1, const Vec& zs, int f2, std::uint64_t seed,
                                    const LinearSystem& sys, const UncertaintyModel& unc,
                                    const StageCost& cost, int N, double tilt,
                                    const ZetaOptions& opt) {
  const int f1 = static_cast<int>(G1.rows());
  const int nx = static_cast<int>(G1.cols());
  if (zs.size() != f1) throw Error(ErrorCode::InvalidArgument, "zs must match G1");
  if (f2 < f1 + 2) throw Error(ErrorCode::InvalidArgument, "f2 must exceed G1.rows() + 1");
  if (!(tilt < 0.0 && tilt > -1.0)) throw Error(ErrorCode::InvalidArgument, "tilt must lie in (-1, 0)");
  TemplateData out = make_template_s1(f1, f2, seed, nx, true);
  const double c = std::sqrt(1.0 - tilt * tilt);
  for (int k = 0; k < f1; ++k) {
    out.F.row(k).head(nx) = G1.row(k).normalized();
    out.F(k, nx) = 0.0;
    out.F.row(f1 + k).head(nx) = c * G1.row(k).normalized();
    out.F(f1 + k, nx) = tilt;
  }
  out.z_bar = zeta_minmax(out.F, sys, unc, cost, nullptr, N, opt);
  for (int k = 0; k < f1; ++k) out.z_bar(f1 + k) = c * zs(k) / G1.row(k).norm();
  return out;
}

}  // namespace polyclf
