#include "polyclf/pwa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "polyclf/error.hpp"

namespace polyclf {

namespace {

// Pulling triangulation of the face {S subset of J_i} of dimension `dim`:
// cone from its lowest vertex over the subfaces that miss it.
void pull(const ConfigurationTriplet& t, std::vector<int>& S, int dim, const std::vector<int>& verts,
          std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  if (verts.empty()) return;
  if (dim == 0) {
    prefix.push_back(verts[0]);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  const int p0 = verts[0];
  std::vector<int> cand;
  for (int i : verts)
    for (int k : t.active[i])
      if (std::find(S.begin(), S.end(), k) == S.end()) cand.push_back(k);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  prefix.push_back(p0);
  for (int k : cand) {
    std::vector<int> sub;
    for (int i : verts) {
      const auto& J = t.active[i];
      if (std::find(J.begin(), J.end(), k) != J.end()) sub.push_back(i);
    }
    if (static_cast<int>(sub.size()) < dim) continue;
    if (std::find(sub.begin(), sub.end(), p0) != sub.end()) continue;
    S.push_back(k);
    pull(t, S, dim - 1, sub, prefix, out);
    S.pop_back();
  }
  prefix.pop_back();
}

// Barycentric weights of x in the simplex with vertex points P (columns);
// false when the simplex is flat.
bool barycentric(const Mat& P, const Vec& x, Vec& theta) {
  const int n = static_cast<int>(P.rows());
  Mat D(n, n);
  for (int k = 0; k < n; ++k) D.col(k) = P.col(k + 1) - P.col(0);
  const double scale = std::max(1.0, D.cwiseAbs().maxCoeff());
  Eigen::PartialPivLU<Mat> lu(D);
  if (std::abs(lu.determinant()) <= 1e-13 * std::pow(scale, n)) return false;
  const Vec lam = lu.solve(x - P.col(0));
  theta.resize(n + 1);
  theta(0) = 1.0 - lam.sum();
  theta.tail(n) = lam;
  return true;
}

std::vector<Vec> ring_order(std::vector<Vec> pts) {
  if (pts.empty()) return pts;
  Vec c = Vec::Zero(pts[0].size());
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b) {
    return std::atan2(a(1) - c(1), a(0) - c(0)) < std::atan2(b(1) - c(1), b(0) - c(0));
  });
  return pts;
}

}  // namespace

PwaFunction::PwaFunction(ConfigurationTriplet t, Vec z) : t_(std::move(t)), z_(std::move(z)) {
  if (t_.kind == TripletKind::Domain)
    throw Error(ErrorCode::ModeMismatch, "a PWA function needs an epigraph triplet");
  if (z_.size() != t_.num_facets()) throw Error(ErrorCode::InvalidArgument, "z has the wrong length");
  const int v = t_.num_vertices();
  values_.resize(v);
  for (int i = 0; i < v; ++i) {
    points_.push_back(t_.state(i, z_));
    values_(i) = t_.level(i, z_);
  }
  region_index_.assign(t_.num_facets(), -1);
  const int nx = t_.state_dim();
  for (int j = t_.f1; j < t_.num_facets(); ++j) {
    Region r;
    r.facet = j;
    for (int i = 0; i < v; ++i) {
      const auto& J = t_.active[i];
      if (std::find(J.begin(), J.end(), j) != J.end()) r.vertices.push_back(i);
    }
    if (static_cast<int>(r.vertices.size()) < nx + 1) continue;
    std::vector<int> S{j}, prefix;
    pull(t_, S, nx, r.vertices, prefix, r.simplices);
    region_index_[j] = static_cast<int>(regions_.size());
    regions_.push_back(std::move(r));
  }
}

HPolyhedron PwaFunction::domain() const {
  const int nx = state_dim();
  return HPolyhedron(t_.F.topLeftCorner(t_.f1, nx), z_.head(t_.f1));
}

bool PwaFunction::in_domain(const Vec& x, double tol) const {
  const int nx = state_dim();
  for (int j = 0; j < t_.f1; ++j) {
    const auto g = t_.F.row(j).head(nx);
    if (g.dot(x) - z_(j) > tol * (1.0 + g.norm())) return false;
  }
  return true;
}

double PwaFunction::piece(int facet, const Vec& x) const {
  const int nx = state_dim();
  return (z_(facet) - t_.F.row(facet).head(nx).dot(x)) / t_.F(facet, nx);
}

double PwaFunction::eval(const Vec& x) const {
  if (!in_domain(x)) return kInf;
  double m = -kInf;
  for (int j = t_.f1; j < t_.num_facets(); ++j) m = std::max(m, piece(j, x));
  return m;
}

int PwaFunction::locate(const Vec& x) const {
  if (!in_domain(x)) throw Error(ErrorCode::OutOfDomain, "point outside dom(M)");
  int best = -1;
  double m = -kInf;
  for (int j = t_.f1; j < t_.num_facets(); ++j) {
    const double p = piece(j, x);
    if (p > m) m = p, best = j;
  }
  const double tol = 1e-12 * (1.0 + std::abs(m));
  for (int j = t_.f1; j < best; ++j)
    if (piece(j, x) >= m - tol) return j;
  return best;
}

Vec PwaFunction::eval_batch_serial(const std::vector<Vec>& xs) const {
  Vec out(static_cast<int>(xs.size()));
  for (size_t k = 0; k < xs.size(); ++k) out(static_cast<int>(k)) = eval(xs[k]);
  return out;
}

Vec PwaFunction::eval_batch_parallel(const std::vector<Vec>& xs) const {
  const int n = static_cast<int>(xs.size());
  Vec out(n);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) out(k) = eval(xs[k]);
  return out;
}

// ---------------------------------------------------------------------------

ExplicitController::ExplicitController(PwaFunction m, std::vector<Vec> vertex_controls)
    : m_(std::move(m)), v_(std::move(vertex_controls)) {
  if (static_cast<int>(v_.size()) != m_.triplet().num_vertices())
    throw Error(ErrorCode::InvalidArgument, "one control per epigraph vertex is required");
}

ExplicitController::Query ExplicitController::query(const Vec& x) const {
  const int first = m_.locate(x);
  const int nx = m_.state_dim();
  const auto& pts = m_.vertex_points();
  // Candidate regions: the located one, then any other facet tied with it.
  std::vector<int> facets{first};
  const double m = m_.piece(first, x);
  for (int j = m_.triplet().f1; j < m_.triplet().num_facets(); ++j)
    if (j != first && m_.piece(j, x) >= m - 1e-9 * (1.0 + std::abs(m))) facets.push_back(j);

  auto make = [&](int facet, const std::vector<int>& simplex, const Vec& theta, bool degenerate) {
    Query q;
    q.region = facet;
    q.simplex = simplex;
    q.theta = theta;
    q.degenerate = degenerate;
    q.u = Vec::Zero(v_[0].size());
    for (size_t k = 0; k < simplex.size(); ++k) q.u += theta(static_cast<int>(k)) * v_[simplex[k]];
    return q;
  };

  Mat P(nx, nx + 1);
  Vec theta;
  for (int facet : facets) {
    const int r = m_.region_of_facet(facet);
    if (r < 0) continue;
    for (const auto& s : m_.regions()[r].simplices) {
      for (int k = 0; k <= nx; ++k) P.col(k) = pts[s[k]];
      if (!barycentric(P, x, theta)) continue;
      if (theta.minCoeff() >= -1e-9) {
        theta = theta.cwiseMax(0.0);
        theta /= theta.sum();
        return make(facet, s, theta, false);
      }
    }
  }
  // Fallback: least-squares weights clipped onto the simplex, best fit wins.
  double best = kInf;
  Query out;
  for (int facet : facets) {
    const int r = m_.region_of_facet(facet);
    if (r < 0) continue;
    for (const auto& s : m_.regions()[r].simplices) {
      Mat Aug(nx + 1, nx + 1);
      for (int k = 0; k <= nx; ++k) {
        Aug.col(k).head(nx) = pts[s[k]];
        Aug(nx, k) = 1.0;
      }
      Vec rhs(nx + 1);
      rhs << x, 1.0;
      Vec th = Aug.completeOrthogonalDecomposition().solve(rhs).cwiseMax(0.0);
      if (th.sum() <= 0) th.setConstant(1.0);
      th /= th.sum();
      const double misfit = (Aug.topRows(nx) * th - x).norm();
      if (misfit < best) best = misfit, out = make(facet, s, th, true);
    }
  }
  if (!std::isfinite(best))
    throw Error(ErrorCode::DegenerateRegion, "no region with a triangulation contains x");
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Vec> input_grid(const HPolyhedron& U, int res) {
  const int nu = U.dim();
  Vec lo(nu), hi(nu);
  for (int d = 0; d < nu; ++d) {
    lo(d) = -support(U, -Vec::Unit(nu, d));
    hi(d) = support(U, Vec::Unit(nu, d));
  }
  std::vector<Vec> out;
  std::vector<int> idx(nu, 0);
  while (true) {
    Vec u(nu);
    for (int d = 0; d < nu; ++d)
      u(d) = res == 1 ? 0.5 * (lo(d) + hi(d)) : lo(d) + (hi(d) - lo(d)) * idx[d] / (res - 1);
    if (U.contains(u, 1e-12)) out.push_back(u);
    int d = 0;
    while (d < nu && ++idx[d] == res) idx[d++] = 0;
    if (d == nu) break;
  }
  return out;
}

namespace {

struct StepEval {
  const PwaFunction& M;
  const LinearSystem& sys;
  const StageCost& cost;
  const UncertaintyModel* unc;
  const Vec& x;
  std::vector<Vec> W;
  double state_part;
  Vec u_ref;

  StepEval(const PwaFunction& M_, const LinearSystem& s, const StageCost& c,
           const UncertaintyModel* u, const Vec& x_)
      : M(M_), sys(s), cost(c), unc(u), x(x_) {
    if (unc) W = distinct_w_vertices(*unc);
    u_ref = cost.kind == StageCost::Kind::SetDistance ? Vec(cost.K * x) : Vec::Zero(sys.nu());
    state_part = cost.eval(x, u_ref);
  }

  double operator()(const Vec& u) const {
    if (!sys.U.contains(u, 1e-12)) return kInf;
    const Vec du = u - u_ref;
    const double stage = state_part + du.dot(cost.R * du);
    double worst = -kInf;
    if (!unc) {
      worst = M.eval(sys.A * x + sys.B * u);
    } else {
      for (const auto& [A, B] : unc->AB) {
        const Vec base = A * x + B * u;
        for (const auto& w : W) {
          worst = std::max(worst, M.eval(base + w));
          if (!std::isfinite(worst)) return kInf;
        }
      }
    }
    return stage + worst;
  }
};

}  // namespace

double one_step_value(const PwaFunction& M, const LinearSystem& sys, const StageCost& cost,
                      const UncertaintyModel* unc, const Vec& x, const HjbSearch& search,
                      Vec* best_u) {
  const StepEval f(M, sys, cost, unc, x);
  const auto grid = input_grid(sys.U, search.u_res);
  double best = kInf;
  Vec arg;
  int best_k = -1;
  for (size_t k = 0; k < grid.size(); ++k) {
    const double v = f(grid[k]);
    if (v < best) best = v, arg = grid[k], best_k = static_cast<int>(k);
  }
  if (search.refine && sys.nu() == 1 && best_k >= 0) {
    // Convex in u, so golden-section on the neighbouring grid cells.
    double a = grid[std::max(best_k - 1, 0)](0);
    double b = grid[std::min<size_t>(best_k + 1, grid.size() - 1)](0);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(Vec::Constant(1, c)), fd = f(Vec::Constant(1, d));
    for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
      if (fc <= fd) {
        b = d, d = c, fd = fc;
        c = b - g * (b - a);
        fc = f(Vec::Constant(1, c));
      } else {
        a = c, c = d, fc = fd;
        d = a + g * (b - a);
        fd = f(Vec::Constant(1, d));
      }
    }
    const Vec um = Vec::Constant(1, 0.5 * (a + b));
    const double fm = f(um);
    if (fm < best) best = fm, arg = um;
  }
  for (const auto& u : search.candidates) {
    const double v = f(u);
    if (v < best) best = v, arg = u;
  }
  if (best_u) *best_u = arg;
  return best;
}

double hjb_residual(const PwaFunction& M, const LinearSystem& sys, const StageCost& cost,
                    const UncertaintyModel* unc, const Vec& x, const HjbSearch& search) {
  if (!M.in_domain(x)) throw Error(ErrorCode::OutOfDomain, "point outside dom(M)");
  return M.eval(x) - one_step_value(M, sys, cost, unc, x, search);
}

Vec exact_feedback(const PwaFunction& M, const LinearSystem& sys, const StageCost& cost,
                   const UncertaintyModel* unc, const Vec& x, const HjbSearch& search) {
  if (!M.in_domain(x)) throw Error(ErrorCode::OutOfDomain, "point outside dom(M)");
  Vec u;
  if (!std::isfinite(one_step_value(M, sys, cost, unc, x, search, &u)))
    throw Error(ErrorCode::OutOfDomain, "no input keeps the successor in dom(M)");
  return u;
}

double max_relative_error(const PwaFunction& M, const GridFunction& ref) {
  double err = 0.0;
  for (int a = 0; a < ref.values.rows(); ++a)
    for (int b = 0; b < ref.values.cols(); ++b) {
      if (!ref.mask(a, b) || !std::isfinite(ref.values(a, b))) continue;
      Vec x(2);
      x << ref.axis0(a), ref.axis1(b);
      const double m = M.eval(x);
      if (!std::isfinite(m)) continue;
      err = std::max(err, std::abs(m - ref.values(a, b)));
    }
  const double top = ref.max_value();
  return top > 0 ? err / top : err;
}

std::string export_partition_csv(const PwaFunction& M) {
  if (M.state_dim() != 2) throw Error(ErrorCode::InvalidArgument, "partition export is planar");
  std::ostringstream os;
  os.precision(12);
  os << "region,facet,vertex,x1,x2\n";
  for (int r = 0; r < M.num_regions(); ++r) {
    const auto& reg = M.regions()[r];
    std::vector<Vec> pts;
    for (int i : reg.vertices) pts.push_back(M.vertex_points()[i]);
    pts = ring_order(pts);
    for (size_t k = 0; k < pts.size(); ++k)
      os << r << ',' << reg.facet << ',' << k << ',' << pts[k](0) << ',' << pts[k](1) << '\n';
  }
  return os.str();
}

std::string export_contours_csv(const PwaFunction& M, const std::vector<double>& levels) {
  if (M.state_dim() != 2) throw Error(ErrorCode::InvalidArgument, "contour export is planar");
  for (double c : levels)
    if (c < 0) throw Error(ErrorCode::InvalidArgument, "contour levels must be >= 0");
  const auto& t = M.triplet();
  std::ostringstream os;
  os.precision(12);
  os << "level,k,x1,x2\n";
  for (double c : levels) {
    // {x | G1 x <= z1, G2 x <= z2 - h2 c}
    Mat F = t.F.leftCols(2);
    Vec z = M.z() - c * t.F.col(2);
    const HPolyhedron S(F, z);
    if (S.is_empty()) continue;
    std::vector<Vec> pts;
    for (const auto& v : enumerate_vertices(S)) pts.push_back(v.point);
    pts = ring_order(pts);
    for (size_t k = 0; k < pts.size(); ++k)
      os << c << ',' << k << ',' << pts[k](0) << ',' << pts[k](1) << '\n';
  }
  return os.str();
}

}  // namespace polyclf
