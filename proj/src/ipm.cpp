#include "ipm.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>

#include "polyclf/error.hpp"

namespace polyclf::detail {

namespace {

struct Cones {
  int l = 0;
  std::vector<int> soc;
  std::vector<int> off;  // offsets of the cone blocks
  int dim = 0;
  int degree = 0;

  Cones(int l_, const std::vector<int>& soc_) : l(l_), soc(soc_) {
    int o = l;
    for (int q : soc) {
      off.push_back(o);
      o += q;
    }
    dim = o;
    degree = l + static_cast<int>(soc.size());
  }
};

// Nesterov-Todd scaling.  Orthant part: W = diag(d).  Cone k:
// W = beta_k (2 v v' - J), W^{-1} = (1/beta_k)(2 J v v' J - J).
struct Scaling {
  Vec d;
  std::vector<double> beta;
  std::vector<Vec> v;
  Vec lambda;
};

inline double jnorm(const Eigen::Ref<const Vec>& u) {
  const double t = u.tail(u.size() - 1).norm();
  return std::sqrt(std::max((u(0) - t) * (u(0) + t), 0.0));
}

void apply_w(const Cones& K, const Scaling& W, const Vec& u, Vec& out, bool inverse) {
  out.resize(u.size());
  if (inverse)
    out.head(K.l) = u.head(K.l).cwiseQuotient(W.d);
  else
    out.head(K.l) = u.head(K.l).cwiseProduct(W.d);
  for (size_t k = 0; k < K.soc.size(); ++k) {
    const int o = K.off[k], q = K.soc[k];
    const Vec& v = W.v[k];
    auto uk = u.segment(o, q);
    auto ok = out.segment(o, q);
    if (!inverse) {
      const double vu = v.dot(uk);
      ok = 2.0 * vu * v;
      ok(0) -= uk(0);
      ok.tail(q - 1) += uk.tail(q - 1);
      ok *= W.beta[k];
    } else {
      // Jv = (v0, -v1);  (2 Jv v'J - J) u = 2 Jv (Jv . u) - J u
      const double jvu = v(0) * uk(0) - v.tail(q - 1).dot(uk.tail(q - 1));
      ok(0) = 2.0 * jvu * v(0) - uk(0);
      ok.tail(q - 1) = -2.0 * jvu * v.tail(q - 1) + uk.tail(q - 1);
      ok /= W.beta[k];
    }
  }
}

void jordan(const Cones& K, const Vec& u, const Vec& w, Vec& out) {
  out.resize(u.size());
  out.head(K.l) = u.head(K.l).cwiseProduct(w.head(K.l));
  for (size_t k = 0; k < K.soc.size(); ++k) {
    const int o = K.off[k], q = K.soc[k];
    out(o) = u.segment(o, q).dot(w.segment(o, q));
    out.segment(o + 1, q - 1) = u(o) * w.segment(o + 1, q - 1) + w(o) * u.segment(o + 1, q - 1);
  }
}

// Solves lambda o u = r for u.
void jordan_solve(const Cones& K, const Vec& lam, const Vec& r, Vec& out) {
  out.resize(r.size());
  out.head(K.l) = r.head(K.l).cwiseQuotient(lam.head(K.l));
  for (size_t k = 0; k < K.soc.size(); ++k) {
    const int o = K.off[k], q = K.soc[k];
    const double l0 = lam(o);
    auto l1 = lam.segment(o + 1, q - 1);
    const double r0 = r(o);
    auto r1 = r.segment(o + 1, q - 1);
    const double det = (l0 - l1.norm()) * (l0 + l1.norm());
    const double u0 = (l0 * r0 - l1.dot(r1)) / det;
    out(o) = u0;
    out.segment(o + 1, q - 1) = (r1 - u0 * l1) / l0;
  }
}

Vec identity_element(const Cones& K) {
  Vec e = Vec::Zero(K.dim);
  e.head(K.l).setOnes();
  for (size_t k = 0; k < K.soc.size(); ++k) e(K.off[k]) = 1.0;
  return e;
}

// Largest alpha with u + alpha d in K (infinity when unrestricted).
double max_step(const Cones& K, const Vec& u, const Vec& d) {
  double amax = kInf;
  for (int i = 0; i < K.l; ++i)
    if (d(i) < 0) amax = std::min(amax, -u(i) / d(i));
  for (size_t k = 0; k < K.soc.size(); ++k) {
    const int o = K.off[k], q = K.soc[k];
    auto uk = u.segment(o, q);
    auto dk = d.segment(o, q);
    const double un = uk.tail(q - 1).norm();
    const double c = (uk(0) - un) * (uk(0) + un);
    const double a = dk(0) * dk(0) - dk.tail(q - 1).squaredNorm();
    const double b = uk(0) * dk(0) - uk.tail(q - 1).dot(dk.tail(q - 1));
    double root = kInf;
    if (std::abs(a) <= 1e-14 * (std::abs(b) + std::abs(c)) || a == 0.0) {
      if (b < 0) root = -c / (2.0 * b);
    } else {
      const double disc = b * b - a * c;
      if (disc >= 0) {
        const double sq = std::sqrt(disc);
        const double r1 = (-b - std::copysign(sq, b)) / a;
        const double r2 = (r1 != 0.0) ? c / (a * r1) : kInf;
        for (double r : {r1, r2})
          if (r > 0 && r < root) root = r;
      }
    }
    if (dk(0) < 0) root = std::min(root, -uk(0) / dk(0));
    amax = std::min(amax, root);
  }
  return amax;
}

// Distance to the cone boundary along the identity: min eigenvalue.
double min_eig(const Cones& K, const Vec& u) {
  double m = kInf;
  for (int i = 0; i < K.l; ++i) m = std::min(m, u(i));
  for (size_t k = 0; k < K.soc.size(); ++k) {
    const int o = K.off[k], q = K.soc[k];
    m = std::min(m, u(o) - u.segment(o + 1, q - 1).norm());
  }
  return m;
}

Scaling compute_scaling(const Cones& K, const Vec& s, const Vec& z) {
  Scaling W;
  W.d = (s.head(K.l).cwiseQuotient(z.head(K.l))).cwiseSqrt();
  W.lambda.resize(K.dim);
  W.lambda.head(K.l) = (s.head(K.l).cwiseProduct(z.head(K.l))).cwiseSqrt();
  for (size_t k = 0; k < K.soc.size(); ++k) {
    const int o = K.off[k], q = K.soc[k];
    const Vec sk = s.segment(o, q), zk = z.segment(o, q);
    const double sn = jnorm(sk), zn = jnorm(zk);
    const Vec sb = sk / sn, zb = zk / zn;
    const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 0.0));
    Vec wb(q);
    wb(0) = (sb(0) + zb(0)) / (2.0 * gamma);
    wb.tail(q - 1) = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
    Vec v = wb;
    v(0) += 1.0;
    v /= std::sqrt(2.0 * (wb(0) + 1.0));
    W.beta.push_back(std::sqrt(sn / zn));
    W.v.push_back(v);
  }
  // lambda = W z on the cone blocks.
  Vec wz;
  apply_w(K, W, z, wz, false);
  W.lambda.tail(K.dim - K.l) = wz.tail(K.dim - K.l);
  return W;
}

Scaling identity_scaling(const Cones& K) {
  Scaling W;
  W.d = Vec::Ones(K.l);
  for (int q : K.soc) {
    W.beta.push_back(1.0);
    Vec v = Vec::Zero(q);
    v(0) = 1.0;
    W.v.push_back(v);
  }
  W.lambda = identity_element(K);
  return W;
}

// Reduced KKT system  [H + dI, A'; A, -dI]  with H = G' W^{-2} G.  The
// sparsity pattern is fixed, so positions into the value array are computed
// once and reused by every factorization.
class KktSolver {
 public:
  KktSolver(const ConeProblem& P, const Cones& K) : P_(P), K_(K) {
    n_ = static_cast<int>(P.c.size());
    p_ = static_cast<int>(P.b.size());
    const int N = n_ + p_;
    std::vector<std::int64_t> keys;
    auto key = [N](int row, int col) { return static_cast<std::int64_t>(col) * N + row; };
    for (int i = 0; i < N; ++i) keys.push_back(key(i, i));
    for (int r = 0; r < K.l; ++r) {
      const int* idx = P.G.innerIndexPtr() + P.G.outerIndexPtr()[r];
      const int cnt = P.G.outerIndexPtr()[r + 1] - P.G.outerIndexPtr()[r];
      for (int a = 0; a < cnt; ++a)
        for (int b = a; b < cnt; ++b) keys.push_back(key(idx[b], idx[a]));
    }
    for (size_t k = 0; k < K.soc.size(); ++k) {
      std::vector<int> U;
      for (int r = K.off[k]; r < K.off[k] + K.soc[k]; ++r)
        for (int t = P.G.outerIndexPtr()[r]; t < P.G.outerIndexPtr()[r + 1]; ++t)
          U.push_back(P.G.innerIndexPtr()[t]);
      std::sort(U.begin(), U.end());
      U.erase(std::unique(U.begin(), U.end()), U.end());
      for (size_t a = 0; a < U.size(); ++a)
        for (size_t b = a; b < U.size(); ++b) keys.push_back(key(U[b], U[a]));
      soc_cols_.push_back(std::move(U));
    }
    for (int r = 0; r < p_; ++r)
      for (int t = P.A.outerIndexPtr()[r]; t < P.A.outerIndexPtr()[r + 1]; ++t)
        keys.push_back(key(n_ + r, P.A.innerIndexPtr()[t]));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    auto pos = [&](int row, int col) {
      return static_cast<int>(std::lower_bound(keys.begin(), keys.end(), key(row, col)) -
                              keys.begin());
    };
    // Build the CSC structure of the lower triangle.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(keys.size());
    for (auto k2 : keys) trip.emplace_back(static_cast<int>(k2 % N), static_cast<int>(k2 / N), 0.0);
    Kmat_.resize(N, N);
    Kmat_.setFromTriplets(trip.begin(), trip.end());
    Kmat_.makeCompressed();

    for (int i = 0; i < N; ++i) diag_pos_.push_back(pos(i, i));
    lp_off_.push_back(0);
    for (int r = 0; r < K.l; ++r) {
      const int* idx = P.G.innerIndexPtr() + P.G.outerIndexPtr()[r];
      const int cnt = P.G.outerIndexPtr()[r + 1] - P.G.outerIndexPtr()[r];
      for (int a = 0; a < cnt; ++a)
        for (int b = a; b < cnt; ++b) lp_pos_.push_back(pos(idx[b], idx[a]));
      lp_off_.push_back(static_cast<int>(lp_pos_.size()));
    }
    for (const auto& U : soc_cols_) {
      std::vector<int> pp;
      for (size_t a = 0; a < U.size(); ++a)
        for (size_t b = a; b < U.size(); ++b) pp.push_back(pos(U[b], U[a]));
      soc_pos_.push_back(std::move(pp));
    }
    for (int r = 0; r < p_; ++r)
      for (int t = P.A.outerIndexPtr()[r]; t < P.A.outerIndexPtr()[r + 1]; ++t)
        a_pos_.push_back(pos(n_ + r, P.A.innerIndexPtr()[t]));

    ldlt_.analyzePattern(Kmat_);
  }

  void factor(const Scaling& W) {
    W_ = &W;
    double* val = Kmat_.valuePtr();
    std::fill(val, val + Kmat_.nonZeros(), 0.0);
    const auto& G = P_.G;
    for (int r = 0; r < K_.l; ++r) {
      const double w = 1.0 / (W.d(r) * W.d(r));
      const int beg = G.outerIndexPtr()[r];
      const int cnt = G.outerIndexPtr()[r + 1] - beg;
      const double* gv = G.valuePtr() + beg;
      int t = lp_off_[r];
      for (int a = 0; a < cnt; ++a) {
        const double wa = w * gv[a];
        for (int b = a; b < cnt; ++b) val[lp_pos_[t++]] += wa * gv[b];
      }
    }
    for (size_t k = 0; k < K_.soc.size(); ++k) {
      const auto& U = soc_cols_[k];
      const int o = K_.off[k], q = K_.soc[k];
      Mat Gs = Mat::Zero(q, U.size());
      for (int r = 0; r < q; ++r)
        for (int t = G.outerIndexPtr()[o + r]; t < G.outerIndexPtr()[o + r + 1]; ++t) {
          const int c = static_cast<int>(
              std::lower_bound(U.begin(), U.end(), G.innerIndexPtr()[t]) - U.begin());
          Gs(r, c) = G.valuePtr()[t];
        }
      // W^{-1} as a dense q x q matrix.
      const Vec& v = W.v[k];
      Vec jv = v;
      jv.tail(q - 1) *= -1.0;
      Mat Winv = 2.0 * jv * jv.transpose();
      Winv(0, 0) -= 1.0;
      for (int i = 1; i < q; ++i) Winv(i, i) += 1.0;
      Winv /= W.beta[k];
      const Mat WG = Winv * Gs;
      const Mat Hs = WG.transpose() * WG;
      int t = 0;
      for (size_t a = 0; a < U.size(); ++a)
        for (size_t b = a; b < U.size(); ++b) val[soc_pos_[k][t++]] += Hs(b, a);
    }
    int t = 0;
    for (int r = 0; r < p_; ++r)
      for (int j = P_.A.outerIndexPtr()[r]; j < P_.A.outerIndexPtr()[r + 1]; ++j)
        val[a_pos_[t++]] += P_.A.valuePtr()[j];
    // Near the optimum the scaling spans many decades and the static shift
    // can be swamped; raise it until the factorization succeeds.  Refinement
    // in solve() works on the unshifted system.
    double applied = 0.0;
    for (double reg = kReg; reg <= 1e-3; reg *= 100.0) {
      for (int i = 0; i < n_; ++i) val[diag_pos_[i]] += reg - applied;
      for (int i = 0; i < p_; ++i) val[diag_pos_[n_ + i]] -= reg - applied;
      applied = reg;
      ldlt_.factorize(Kmat_);
      if (ldlt_.info() == Eigen::Success && ldlt_.vectorD().allFinite()) return;
    }
    throw Error(ErrorCode::SolverFailure, "KKT factorization failed");
  }

  // [0 A' G'; A 0 0; G 0 -W'W] (dx, dy, dz) = (r1, r2, r3), with iterative
  // refinement on the full three-block system.
  void solve(const Vec& r1, const Vec& r2, const Vec& r3, Vec& dx, Vec& dy, Vec& dz) const {
    reduced_solve(r1, r2, r3, dx, dy, dz);
    const double rn = std::max({inf(r1), inf(r2), inf(r3), 1.0});
    double last = kInf;
    for (int it = 0; it < 8; ++it) {
      const Vec e1 = r1 - (P_.A.transpose() * dy + P_.G.transpose() * dz);
      const Vec e2 = r2 - P_.A * dx;
      Vec w2;
      w2sq(dz, w2);
      const Vec e3 = r3 - (P_.G * dx - w2);
      const double en = std::max({inf(e1), inf(e2), inf(e3)});
      if (en <= 1e-14 * rn || en >= 0.5 * last) break;
      last = en;
      Vec cx, cy, cz;
      reduced_solve(e1, e2, e3, cx, cy, cz);
      dx += cx;
      dy += cy;
      dz += cz;
    }
  }

 private:
  static constexpr double kReg = 1e-9;

  static double inf(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

  void reduced_solve(const Vec& r1, const Vec& r2, const Vec& r3, Vec& dx, Vec& dy,
                     Vec& dz) const {
    Vec w3;
    winv2(r3, w3);
    Vec rhs(n_ + p_);
    rhs.head(n_) = r1 + P_.G.transpose() * w3;
    rhs.tail(p_) = r2;
    const Vec sol = ldlt_.solve(rhs);
    dx = sol.head(n_);
    dy = sol.tail(p_);
    winv2(P_.G * dx - r3, dz);
  }

  void winv2(const Vec& u, Vec& out) const {
    Vec tmp;
    apply_w(K_, *W_, u, tmp, true);
    apply_w(K_, *W_, tmp, out, true);
  }

  void w2sq(const Vec& u, Vec& out) const {
    Vec tmp;
    apply_w(K_, *W_, u, tmp, false);
    apply_w(K_, *W_, tmp, out, false);
  }

  const ConeProblem& P_;
  const Cones& K_;
  int n_ = 0, p_ = 0;
  const Scaling* W_ = nullptr;
  Eigen::SparseMatrix<double> Kmat_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  std::vector<int> diag_pos_, lp_pos_, lp_off_, a_pos_;
  std::vector<std::vector<int>> soc_cols_;
  std::vector<std::vector<int>> soc_pos_;
};

double inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

struct Step {
  Vec dx, dy, dz, ds;
  double dtau = 0.0, dkappa = 0.0;
};

}  // namespace

ConeResult solve_cone(const ConeProblem& P, const SolverOptions& opt) {
  const int n = static_cast<int>(P.c.size());
  const Cones K(P.l, P.soc);
  if (P.G.rows() != K.dim || P.h.size() != K.dim)
    throw Error(ErrorCode::InvalidArgument, "cone dimensions do not match G");

  KktSolver kkt(P, K);
  const Vec e = identity_element(K);

  // Starting point: least-norm slacks, shifted into the cone interior.
  Scaling W = identity_scaling(K);
  kkt.factor(W);
  Vec x, y, z, s, tmp1, tmp2;
  kkt.solve(Vec::Zero(n), P.b, P.h, x, tmp1, tmp2);
  s = -tmp2;
  kkt.solve(-P.c, Vec::Zero(P.b.size()), Vec::Zero(K.dim), tmp1, y, z);
  {
    const double ts = -min_eig(K, s);
    const double nrm = std::max(1.0, s.norm());
    if (ts >= -1e-8 * nrm) s += (1.0 + ts) * e;
    const double tz = -min_eig(K, z);
    const double nrz = std::max(1.0, z.norm());
    if (tz >= -1e-8 * nrz) z += (1.0 + tz) * e;
  }
  double tau = 1.0, kappa = 1.0;

  const double cn = inf_norm(P.c), bn = inf_norm(P.b), hn = inf_norm(P.h);
  ConeResult res;
  double last_pres = kInf, last_dres = kInf, last_gap = kInf, last_relgap = kInf;
  int tiny_steps = 0;
  // Best iterate seen, for the stalled exit: late iterations can lose
  // accuracy when cones sit at their apex.
  double best_merit = kInf, best_pres = kInf, best_dres = kInf, best_gap = kInf, best_relgap = kInf;
  Vec bx, by_, bz, bs;
  double btau = 1.0;

  for (int iter = 0; iter <= opt.max_iter; ++iter) {
    res.iterations = iter;
    const Vec R1 = P.A.transpose() * y + P.G.transpose() * z + tau * P.c;
    const Vec R2 = P.A * x - tau * P.b;
    const Vec R3 = P.G * x + s - tau * P.h;
    const double cx = P.c.dot(x), by = P.b.dot(y), hz = P.h.dot(z);
    const double R4 = kappa + cx + by + hz;

    const double pres = std::max(inf_norm(R2) / tau / (1.0 + bn), inf_norm(R3) / tau / (1.0 + hn));
    const double dres = inf_norm(R1) / tau / (1.0 + cn);
    const double gap = s.dot(z) / (tau * tau);
    const double pcost = cx / tau, dcost = -(by + hz) / tau;
    double relgap = kInf;
    if (pcost < 0)
      relgap = gap / -pcost;
    else if (dcost > 0)
      relgap = gap / dcost;
    last_pres = pres;
    last_dres = dres;
    last_gap = gap;
    last_relgap = relgap;
    const double merit = std::max({pres / (1e2 * opt.feastol), dres / (1e2 * opt.feastol),
                                   std::min(gap, relgap) / opt.stall_gap});
    if (merit < best_merit) {
      best_merit = merit;
      best_pres = pres;
      best_dres = dres;
      best_gap = gap;
      best_relgap = relgap;
      bx = x;
      by_ = y;
      bz = z;
      bs = s;
      btau = tau;
    }
    if (opt.verbose)
      std::fprintf(stderr, "%3d  pcost %+.8e  dcost %+.8e  gap %.2e  pres %.2e  dres %.2e  k/t %.2e\n",
                   iter, pcost, dcost, gap, pres, dres, kappa / tau);

    if (pres <= opt.feastol && dres <= opt.feastol &&
        (gap <= opt.abstol || relgap <= opt.reltol)) {
      res.status = SolveStatus::Optimal;
      res.x = x / tau;
      res.y = y / tau;
      res.z = z / tau;
      res.s = s / tau;
      res.pres = pres;
      res.dres = dres;
      res.gap = gap;
      return res;
    }
    if (hz + by < 0) {
      const double pinf = inf_norm(P.A.transpose() * y + P.G.transpose() * z) / std::max(1.0, cn) /
                          (-(hz + by));
      if (pinf <= opt.infeas_tol) {
        res.status = SolveStatus::Infeasible;
        res.y = y / -(hz + by);
        res.z = z / -(hz + by);
        return res;
      }
    }
    if (cx < 0) {
      const double dinf = std::max(inf_norm(P.A * x) / std::max(1.0, bn),
                                   inf_norm(P.G * x + s) / std::max(1.0, hn)) /
                          (-cx);
      if (dinf <= opt.infeas_tol) {
        res.status = SolveStatus::Unbounded;
        res.x = x / -cx;
        res.s = s / -cx;
        return res;
      }
    }
    if (iter == opt.max_iter || tiny_steps >= 4) break;

    W = compute_scaling(K, s, z);
    try {
      kkt.factor(W);
    } catch (const Error&) {
      break;
    }
    Vec dx2, dy2, dz2;
    kkt.solve(-P.c, P.b, P.h, dx2, dy2, dz2);
    const double q2 = P.c.dot(dx2) + P.b.dot(dy2) + P.h.dot(dz2);
    const double mu = (s.dot(z) + tau * kappa) / (K.degree + 1);

    auto newton = [&](double eta, const Vec& dsc, double dk, Step& st) {
      Vec t, wt;
      jordan_solve(K, W.lambda, dsc, t);
      apply_w(K, W, t, wt, false);
      Vec dx1, dy1, dz1;
      kkt.solve(-eta * R1, -eta * R2, -eta * R3 - wt, dx1, dy1, dz1);
      const double q1 = P.c.dot(dx1) + P.b.dot(dy1) + P.h.dot(dz1);
      st.dtau = (-eta * R4 - dk / tau - q1) / (q2 - kappa / tau);
      st.dx = dx1 + st.dtau * dx2;
      st.dy = dy1 + st.dtau * dy2;
      st.dz = dz1 + st.dtau * dz2;
      Vec wdz;
      apply_w(K, W, st.dz, wdz, false);
      apply_w(K, W, t - wdz, st.ds, false);
      st.dkappa = (dk - kappa * st.dtau) / tau;
    };
    auto step_len = [&](const Step& st) {
      double a = std::min(max_step(K, s, st.ds), max_step(K, z, st.dz));
      if (st.dtau < 0) a = std::min(a, -tau / st.dtau);
      if (st.dkappa < 0) a = std::min(a, -kappa / st.dkappa);
      return a;
    };

    Vec ll;
    jordan(K, W.lambda, W.lambda, ll);
    Step aff;
    newton(1.0, -ll, -tau * kappa, aff);
    const double alpha_aff = std::min(1.0, step_len(aff));
    const double sigma = std::pow(std::max(0.0, 1.0 - alpha_aff), 3);

    Vec sa, za, corr;
    apply_w(K, W, aff.ds, sa, true);
    apply_w(K, W, aff.dz, za, false);
    jordan(K, sa, za, corr);
    const Vec dsc = -ll - corr + sigma * mu * e;
    const double dk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    Step cmb;
    newton(1.0 - sigma, dsc, dk, cmb);
    const double alpha = std::min(1.0, 0.99 * step_len(cmb));
    tiny_steps = alpha < 1e-9 ? tiny_steps + 1 : 0;

    x += alpha * cmb.dx;
    y += alpha * cmb.dy;
    z += alpha * cmb.dz;
    s += alpha * cmb.ds;
    tau += alpha * cmb.dtau;
    kappa += alpha * cmb.dkappa;
  }

  // Stalled: accept the best iterate at the reduced accuracy level, else
  // report trouble.
  if (best_merit < kInf) {
    x = bx;
    y = by_;
    z = bz;
    s = bs;
    tau = btau;
    last_pres = best_pres;
    last_dres = best_dres;
    last_gap = best_gap;
    last_relgap = best_relgap;
  }
  if (last_pres <= 1e2 * opt.feastol && last_dres <= 1e2 * opt.feastol &&
      (last_gap <= opt.stall_gap || last_relgap <= opt.stall_gap)) {
    res.status = SolveStatus::Optimal;
  } else {
    res.status = SolveStatus::NumericalTrouble;
  }
  res.x = x / tau;
  res.y = y / tau;
  res.z = z / tau;
  res.s = s / tau;
  res.pres = last_pres;
  res.dres = last_dres;
  res.gap = last_gap;
  return res;
}

}  // namespace polyclf::detail
