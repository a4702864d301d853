#include "polyclf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>

#include "polyclf/detail/combinations.hpp"
#include "polyclf/error.hpp"

namespace polyclf {

namespace {

enum class PhaseOutcome { Optimal, Unbounded };

// One simplex phase on min cost'x, Ae x = b, x >= 0 from a feasible basis.
// On return xB/y correspond to the final basis.
PhaseOutcome run_phase(const Mat& Ae, const Vec& b, const Vec& cost, std::vector<int>& basis,
                       const std::vector<char>& allowed, Vec& xB, Vec& y) {
  const int p = static_cast<int>(Ae.rows());
  const int m = static_cast<int>(Ae.cols());
  const double price_tol = 1e-10 * (1.0 + cost.cwiseAbs().maxCoeff());
  std::vector<char> in_basis(m, 0);
  for (int k : basis) in_basis[k] = 1;

  int degenerate_streak = 0;
  const int max_iter = 100 * (m + p) + 1000;
  Mat B(p, p);
  Vec cB(p);
  for (int it = 0; it < max_iter; ++it) {
    for (int k = 0; k < p; ++k) {
      B.col(k) = Ae.col(basis[k]);
      cB(k) = cost(basis[k]);
    }
    Eigen::PartialPivLU<Mat> lu(B);
    xB = lu.solve(b);
    y = lu.transpose().solve(cB);

    const bool bland = degenerate_streak > 30;
    int q = -1;
    double best = -price_tol;
    for (int j = 0; j < m; ++j) {
      if (!allowed[j] || in_basis[j]) continue;
      const double r = cost(j) - Ae.col(j).dot(y);
      if (r < -price_tol) {
        if (bland) {
          q = j;
          break;
        }
        if (r < best) {
          best = r;
          q = j;
        }
      }
    }
    if (q < 0) return PhaseOutcome::Optimal;

    const Vec d = lu.solve(Ae.col(q));
    int leave = -1;
    double tmin = kInf;
    for (int k = 0; k < p; ++k) {
      if (d(k) <= 1e-9) continue;
      const double t = std::max(xB(k), 0.0) / d(k);
      if (leave < 0 || t < tmin - 1e-13) {
        tmin = t;
        leave = k;
      } else if (t <= tmin + 1e-13 && basis[k] < basis[leave]) {
        tmin = std::min(t, tmin);
        leave = k;
      }
    }
    if (leave < 0) return PhaseOutcome::Unbounded;
    degenerate_streak = tmin < 1e-12 ? degenerate_streak + 1 : 0;
    in_basis[basis[leave]] = 0;
    in_basis[q] = 1;
    basis[leave] = q;
  }
  throw Error(ErrorCode::SolverFailure, "simplex iteration limit reached");
}

// Generic cost vector used to pick a single start vertex.
Vec generic_direction(int n) {
  Vec c(n);
  for (int i = 0; i < n; ++i) c(i) = 1.0 / std::sqrt(2.0 + 1.7 * i) + 0.1 * std::sin(3.0 * i + 1.0);
  return c;
}

std::vector<int> active_rows(const Mat& F, const Vec& z, const Vec& x) {
  std::vector<int> act;
  const Vec slack = z - F * x;
  for (int j = 0; j < slack.size(); ++j)
    if (std::abs(slack(j)) <= kActiveTol) act.push_back(j);
  return act;
}

bool feasible_point(const Mat& F, const Vec& z, const Vec& x) {
  return ((F * x - z).array() <= kActiveTol).all();
}

enum class Shape { Empty, Bounded, Epigraph, NotPointed };

Shape classify(const Mat& F, const Vec& z) {
  const int n = static_cast<int>(F.cols());
  // Every direction except "up the last axis" must be bounded for a pointed
  // polyhedron of epigraph shape; that one is probed last.
  for (int k = 0; k < n; ++k) {
    for (double sgn : {-1.0, 1.0}) {
      if (k == n - 1 && sgn > 0) continue;
      Vec c = Vec::Zero(n);
      c(k) = sgn;
      const LpResult r = maximize_over(F, z, c);
      if (r.status == LpStatus::Infeasible) return Shape::Empty;
      if (r.status == LpStatus::Unbounded) return Shape::NotPointed;
    }
  }
  Vec up = Vec::Zero(n);
  up(n - 1) = 1.0;
  const LpResult r = maximize_over(F, z, up);
  if (r.status == LpStatus::Infeasible) return Shape::Empty;
  return r.status == LpStatus::Unbounded ? Shape::Epigraph : Shape::Bounded;
}

std::vector<VertexInfo> sorted(std::map<std::vector<int>, Vec>& found) {
  std::vector<VertexInfo> out;
  out.reserve(found.size());
  for (auto& [act, x] : found) out.push_back({x, act});
  std::sort(out.begin(), out.end(), [](const VertexInfo& a, const VertexInfo& b) {
    for (int i = 0; i < a.point.size(); ++i) {
      if (a.point(i) < b.point(i)) return true;
      if (a.point(i) > b.point(i)) return false;
    }
    return a.active_set < b.active_set;
  });
  return out;
}

Eigen::FullPivLU<Mat> facet_lu(const Mat& F, const std::vector<int>& rows) {
  Mat S(rows.size(), F.cols());
  for (size_t r = 0; r < rows.size(); ++r) S.row(r) = F.row(rows[r]);
  Eigen::FullPivLU<Mat> lu(S);
  lu.setThreshold(1e-10);
  return lu;
}

Vec gather(const Vec& z, const std::vector<int>& rows) {
  Vec out(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) out(r) = z(rows[r]);
  return out;
}

std::vector<VertexInfo> brute_force_bounded(const Mat& F, const Vec& z) {
  const int m = static_cast<int>(F.rows());
  const int n = static_cast<int>(F.cols());
  std::map<std::vector<int>, Vec> found;
  detail::for_each_combination(m, n, [&](const std::vector<int>& rows) {
    auto lu = facet_lu(F, rows);
    if (lu.rank() < n) return;
    const Vec x = lu.solve(gather(z, rows));
    if (!feasible_point(F, z, x)) return;
    auto act = active_rows(F, z, x);
    found.emplace(std::move(act), x);
  });
  return sorted(found);
}

std::vector<VertexInfo> pivot_bounded(const Mat& F, const Vec& z) {
  const int n = static_cast<int>(F.cols());
  const LpResult start = maximize_over(F, z, generic_direction(n));
  if (start.status != LpStatus::Optimal) return {};

  std::map<std::vector<int>, Vec> found;
  std::deque<std::vector<int>> queue;
  auto act0 = active_rows(F, z, start.x);
  found.emplace(act0, start.x);
  queue.push_back(act0);

  while (!queue.empty()) {
    const std::vector<int> act = queue.front();
    queue.pop_front();
    const Vec x = found.at(act);
    const Vec slack = z - F * x;
    const int a = static_cast<int>(act.size());

    detail::for_each_combination(a, n, [&](const std::vector<int>& pick) {
      std::vector<int> S(n);
      for (int k = 0; k < n; ++k) S[k] = act[pick[k]];
      auto lu = facet_lu(F, S);
      if (lu.rank() < n) return;
      const Mat inv = lu.inverse();
      for (int k = 0; k < n; ++k) {
        // Move off facet S[k], stay on the others.
        const Vec d = -inv.col(k);
        bool ok = true;
        for (int j : act)
          if (F.row(j).dot(d) > 1e-9 * d.norm()) {
            ok = false;
            break;
          }
        if (!ok) continue;
        int hit = -1;
        double tmin = kInf;
        for (int j = 0; j < F.rows(); ++j) {
          if (std::binary_search(act.begin(), act.end(), j)) continue;
          const double fd = F.row(j).dot(d);
          if (fd <= 1e-12) continue;
          const double t = slack(j) / fd;
          if (t < tmin) {
            tmin = t;
            hit = j;
          }
        }
        if (hit < 0) continue;  // unbounded edge cannot occur on a bounded input
        Vec xn = x + tmin * d;
        std::vector<int> S2 = S;
        S2[k] = hit;
        auto lu2 = facet_lu(F, S2);
        if (lu2.rank() == n) xn = lu2.solve(gather(z, S2));
        auto act2 = active_rows(F, z, xn);
        if (found.emplace(act2, xn).second) queue.push_back(std::move(act2));
      }
    });
  }
  return sorted(found);
}

}  // namespace

// ---------------------------------------------------------------------------

LpResult solve_standard_lp(const Mat& A_in, const Vec& b_in, const Vec& c) {
  const int p = static_cast<int>(A_in.rows());
  const int m = static_cast<int>(A_in.cols());
  if (b_in.size() != p || c.size() != m)
    throw Error(ErrorCode::InvalidArgument, "standard LP dimension mismatch");

  Mat A = A_in;
  Vec b = b_in;
  Vec sign = Vec::Ones(p);
  for (int i = 0; i < p; ++i)
    if (b(i) < 0) {
      A.row(i) *= -1.0;
      b(i) = -b(i);
      sign(i) = -1.0;
    }

  Mat Ae(p, m + p);
  Ae << A, Mat::Identity(p, p);
  std::vector<int> basis(p);
  for (int i = 0; i < p; ++i) basis[i] = m + i;
  std::vector<char> allowed(m + p, 1);
  Vec xB, y;

  Vec c1 = Vec::Zero(m + p);
  c1.tail(p).setOnes();
  run_phase(Ae, b, c1, basis, allowed, xB, y);

  LpResult res;
  double infeas = 0.0;
  for (int k = 0; k < p; ++k)
    if (basis[k] >= m) infeas += std::max(xB(k), 0.0);
  if (infeas > 1e-9 * (1.0 + b.cwiseAbs().maxCoeff())) {
    res.status = LpStatus::Infeasible;
    return res;
  }

  // Drive zero-level artificials out where a structural column can replace
  // them; artificials left behind sit on redundant rows and stay at zero.
  for (int k = 0; k < p; ++k) {
    if (basis[k] < m) continue;
    Mat B(p, p);
    for (int r = 0; r < p; ++r) B.col(r) = Ae.col(basis[r]);
    Eigen::PartialPivLU<Mat> lu(B);
    const RowVec row_k = lu.inverse().row(k);
    int best = -1;
    double best_val = 1e-9;
    for (int j = 0; j < m; ++j) {
      if (std::find(basis.begin(), basis.end(), j) != basis.end()) continue;
      const double v = std::abs(row_k.dot(Ae.col(j)));
      if (v > best_val) {
        best_val = v;
        best = j;
      }
    }
    if (best >= 0) basis[k] = best;
  }
  for (int i = 0; i < p; ++i) allowed[m + i] = 0;

  Vec c2 = Vec::Zero(m + p);
  c2.head(m) = c;
  if (run_phase(Ae, b, c2, basis, allowed, xB, y) == PhaseOutcome::Unbounded) {
    res.status = LpStatus::Unbounded;
    return res;
  }
  res.status = LpStatus::Optimal;
  res.x = Vec::Zero(m);
  for (int k = 0; k < p; ++k)
    if (basis[k] < m) {
      res.x(basis[k]) = std::max(xB(k), 0.0);
      res.basis.push_back(basis[k]);
    }
  std::sort(res.basis.begin(), res.basis.end());
  res.y = sign.cwiseProduct(y);
  res.value = c.dot(res.x);
  return res;
}

LpResult maximize_over(const Mat& F, const Vec& z, const Vec& c) {
  if (F.rows() != z.size() || F.cols() != c.size())
    throw Error(ErrorCode::InvalidArgument, "maximize_over dimension mismatch");
  const LpResult dual = solve_standard_lp(F.transpose(), c, z);
  LpResult res;
  if (dual.status == LpStatus::Optimal) {
    res.status = LpStatus::Optimal;
    res.x = dual.y;
    res.value = c.dot(res.x);
    res.basis = dual.basis;
    res.y = dual.x;
    return res;
  }
  if (dual.status == LpStatus::Unbounded) {
    res.status = LpStatus::Infeasible;
    return res;
  }
  // Dual infeasible: the primal is unbounded if it has a point at all.
  const LpResult feas = solve_standard_lp(F.transpose(), Vec::Zero(c.size()), z);
  res.status = feas.status == LpStatus::Unbounded ? LpStatus::Infeasible : LpStatus::Unbounded;
  return res;
}

// ---------------------------------------------------------------------------

HPolyhedron::HPolyhedron(const Mat& F, const Vec& z) {
  if (F.rows() != z.size())
    throw Error(ErrorCode::InvalidArgument, "facet matrix and parameter sizes differ");
  if (F.cols() == 0) throw Error(ErrorCode::InvalidArgument, "zero-dimensional polyhedron");
  F_ = F;
  z_ = z;
  norms_ = F.rowwise().norm();
  for (int i = 0; i < F.rows(); ++i) {
    if (!(norms_(i) > 0.0) || !std::isfinite(norms_(i)))
      throw Error(ErrorCode::InvalidArgument, "facet row " + std::to_string(i) + " is zero");
    F_.row(i) /= norms_(i);
    z_(i) /= norms_(i);
  }
}

HPolyhedron HPolyhedron::box(const Vec& lower, const Vec& upper) {
  const int n = static_cast<int>(lower.size());
  Mat F(2 * n, n);
  F << Mat::Identity(n, n), -Mat::Identity(n, n);
  Vec z(2 * n);
  z << upper, -lower;
  return HPolyhedron(F, z);
}

bool HPolyhedron::contains(const Vec& x, double tol) const { return max_violation(x) <= tol; }

double HPolyhedron::max_violation(const Vec& x) const {
  if (F_.rows() == 0) return 0.0;
  return (F_ * x - z_).maxCoeff();
}

bool HPolyhedron::is_empty() const {
  const LpResult r = solve_standard_lp(F_.transpose(), Vec::Zero(dim()), z_);
  return r.status == LpStatus::Unbounded;
}

HPolyhedron HPolyhedron::with_cap(double cap) const {
  Mat F(F_.rows() + 1, F_.cols());
  F << F_, RowVec::Zero(F_.cols());
  F(F_.rows(), F_.cols() - 1) = 1.0;
  Vec z(z_.size() + 1);
  z << z_, cap;
  return HPolyhedron(F, z);
}

// ---------------------------------------------------------------------------

std::vector<VertexInfo> enumerate_vertices(const HPolyhedron& poly,
                                           std::optional<double> recession_cap,
                                           VertexMethod method) {
  const Shape shape = classify(poly.F(), poly.z());
  if (shape == Shape::Empty) return {};
  if (shape == Shape::NotPointed)
    throw Error(ErrorCode::NotPointed, "recession cone is not contained in the epigraph ray");

  HPolyhedron work = poly;
  const bool capped = shape == Shape::Epigraph;
  if (capped) {
    if (!recession_cap) throw Error(ErrorCode::Unbounded, "unbounded polyhedron needs a cap");
    work = poly.with_cap(*recession_cap);
    const Shape s2 = classify(work.F(), work.z());
    if (s2 == Shape::Empty) return {};
    if (s2 != Shape::Bounded)
      throw Error(ErrorCode::NotPointed, "capped polyhedron is still unbounded");
  }

  const int m = work.rows();
  const int n = work.dim();
  if (method == VertexMethod::Auto)
    method = detail::binomial(m, n) <= kBruteForceCrossover ? VertexMethod::BruteForce
                                                            : VertexMethod::Pivot;
  std::vector<VertexInfo> verts = method == VertexMethod::BruteForce
                                      ? brute_force_bounded(work.F(), work.z())
                                      : pivot_bounded(work.F(), work.z());
  if (!capped) return verts;

  const int cap_row = poly.rows();
  std::vector<VertexInfo> out;
  for (auto& v : verts)
    if (!std::binary_search(v.active_set.begin(), v.active_set.end(), cap_row))
      out.push_back(std::move(v));
  return out;
}

std::optional<double> find_recession_cap(const HPolyhedron& poly) {
  const Shape shape = classify(poly.F(), poly.z());
  if (shape == Shape::Empty || shape == Shape::Bounded) return std::nullopt;
  if (shape == Shape::NotPointed)
    throw Error(ErrorCode::NotPointed, "recession cone is not contained in the epigraph ray");

  const int n = poly.dim();
  Vec down = Vec::Zero(n);
  down(n - 1) = -1.0;
  const double ymin = -maximize_over(poly.F(), poly.z(), down).value;
  double spread = 1.0 + std::abs(ymin) * 1e-3;
  const int cap_row = poly.rows();
  for (int attempt = 0; attempt < 80; ++attempt, spread *= 2.0) {
    const double cap = ymin + spread;
    const HPolyhedron work = poly.with_cap(cap);
    const auto verts = enumerate_vertices(work, std::nullopt, VertexMethod::Auto);
    // Above every genuine vertex the cap only meets vertical edges, whose
    // facets have a zero last coefficient.
    bool clean = true;
    for (const auto& v : verts) {
      if (!std::binary_search(v.active_set.begin(), v.active_set.end(), cap_row)) continue;
      for (int j : v.active_set)
        if (j != cap_row && std::abs(work.F()(j, n - 1)) > 1e-12) clean = false;
      if (!clean) break;
    }
    if (clean) return cap;
  }
  throw Error(ErrorCode::Unbounded, "could not find a recession cap");
}

std::vector<VertexInfo> enumerate_vertices_auto(const HPolyhedron& poly, VertexMethod method) {
  return enumerate_vertices(poly, find_recession_cap(poly), method);
}

bool is_simple(const HPolyhedron& poly) {
  const auto verts = enumerate_vertices_auto(poly);
  for (const auto& v : verts)
    if (static_cast<int>(v.active_set.size()) != poly.dim()) return false;
  return true;
}

Vec perturb_to_simple(const Mat& F, const Vec& z, double epsilon, std::uint64_t seed,
                      int max_attempts) {
  if (HPolyhedron(F, z).is_empty())
    throw Error(ErrorCode::Infeasible, "cannot perturb an empty polyhedron");
  if (is_simple(HPolyhedron(F, z))) return z;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-epsilon, epsilon);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Vec zp = z;
    for (int i = 0; i < zp.size(); ++i) zp(i) += unif(rng);
    const HPolyhedron P(F, zp);
    if (P.is_empty()) continue;
    if (is_simple(P)) return zp;
  }
  throw Error(ErrorCode::PerturbationFailed,
              "no simple perturbation found in " + std::to_string(max_attempts) + " attempts");
}

double support(const HPolyhedron& poly, const Vec& direction) {
  const LpResult r = maximize_over(poly.F(), poly.z(), direction);
  if (r.status == LpStatus::Infeasible) throw Error(ErrorCode::Infeasible, "support of empty set");
  if (r.status == LpStatus::Unbounded)
    throw Error(ErrorCode::Unbounded, "polyhedron unbounded in the support direction");
  return r.value;
}

Vec project(const HPolyhedron& poly, const Vec& x, const Mat& Q) {
  if (poly.contains(x, 0.0)) return x;
  const int m = poly.rows();
  const int n = poly.dim();
  double work = 0.0;
  for (int k = 1; k <= n; ++k) work += detail::binomial(m, k);
  if (work > 2e6) throw Error(ErrorCode::InvalidArgument, "projection face scan too large");

  const Eigen::LLT<Mat> Qllt(Q);
  if (Qllt.info() != Eigen::Success)
    throw Error(ErrorCode::InvalidArgument, "projection metric is not positive definite");
  const Mat Qinv = Qllt.solve(Mat::Identity(n, n));

  Vec best;
  double best_d = kInf;
  for (int k = 1; k <= n; ++k) {
    detail::for_each_combination(m, k, [&](const std::vector<int>& rows) {
      Mat S(k, n);
      Vec zs(k);
      for (int r = 0; r < k; ++r) {
        S.row(r) = poly.F().row(rows[r]);
        zs(r) = poly.z()(rows[r]);
      }
      const Mat K = S * Qinv * S.transpose();
      Eigen::LDLT<Mat> ldlt(K);
      if (ldlt.info() != Eigen::Success || ldlt.vectorD().cwiseAbs().minCoeff() < 1e-12) return;
      const Vec mu = ldlt.solve(S * x - zs);
      const Vec p = x - Qinv * S.transpose() * mu;
      if (!poly.contains(p, 1e-10)) return;
      const Vec dv = p - x;
      const double d = dv.dot(Q * dv);
      if (d < best_d) {
        best_d = d;
        best = p;
      }
    });
  }
  if (best.size() == 0) throw Error(ErrorCode::Infeasible, "projection onto empty polyhedron");
  return best;
}

bool is_bounded_direction_set(const Mat& F) {
  // F d <= 0 has only d = 0 iff the polyhedron {F d <= 1} is bounded.
  const Shape s = classify(F, Vec::Ones(F.rows()));
  return s == Shape::Bounded;
}

}  // namespace polyclf
