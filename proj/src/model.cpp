#include "polyclf/model.hpp"

#include <algorithm>
#include <cmath>

#include "polyclf/error.hpp"

namespace polyclf {

void LinearSystem::validate() const {
  if (A.rows() != A.cols()) throw Error(ErrorCode::InvalidArgument, "A must be square");
  if (B.rows() != A.rows()) throw Error(ErrorCode::InvalidArgument, "B must have n_x rows");
  if (X.dim() != nx()) throw Error(ErrorCode::InvalidArgument, "X has the wrong dimension");
  if (U.dim() != nu()) throw Error(ErrorCode::InvalidArgument, "U has the wrong dimension");
  Eigen::FullPivLU<Mat> lu(B);
  if (lu.rank() != nu() || nu() > nx())
    throw Error(ErrorCode::AssumptionViolated, "rank(B) must equal n_u <= n_x");
  if (!X.contains(Vec::Zero(nx()))) throw Error(ErrorCode::AssumptionViolated, "0 is not in X");
  if (!U.contains(Vec::Zero(nu()))) throw Error(ErrorCode::AssumptionViolated, "0 is not in U");
}

LinearSystem make_system(const Mat& A, const Mat& B, const HPolyhedron& X, const HPolyhedron& U) {
  LinearSystem s{A, B, X, U};
  s.validate();
  return s;
}

std::vector<Vec> UncertaintyModel::W_vertices() const {
  std::vector<Vec> out;
  for (const auto& v : enumerate_vertices(W)) out.push_back(v.point);
  return out;
}

Vec UncertaintyModel::support_rows(const Mat& G) const {
  Vec w(G.rows());
  for (int j = 0; j < G.rows(); ++j) w(j) = support(W, G.row(j).transpose());
  return w;
}

void UncertaintyModel::validate(int nx, int nu) const {
  if (AB.empty()) throw Error(ErrorCode::InvalidArgument, "uncertainty needs at least one (A, B)");
  for (const auto& [A, B] : AB)
    if (A.rows() != nx || A.cols() != nx || B.rows() != nx || B.cols() != nu)
      throw Error(ErrorCode::InvalidArgument, "uncertainty (A, B) vertex has the wrong shape");
  if (W.dim() != nx) throw Error(ErrorCode::InvalidArgument, "W has the wrong dimension");
  if (W.is_empty()) throw Error(ErrorCode::InvalidArgument, "W is empty");
  if (!is_bounded_direction_set(W.F())) throw Error(ErrorCode::InvalidArgument, "W is unbounded");
}

UncertaintyModel segment_uncertainty(const Mat& A, const Mat& B, const Vec& direction,
                                     double half_width) {
  const int n = static_cast<int>(direction.size());
  if (n != 2) throw Error(ErrorCode::InvalidArgument, "segment uncertainty is two-dimensional");
  const Vec d = direction;
  Vec perp(2);
  perp << -d(1), d(0);
  Mat F(4, 2);
  F.row(0) = perp.transpose();
  F.row(1) = -perp.transpose();
  F.row(2) = d.transpose();
  F.row(3) = -d.transpose();
  Vec z(4);
  const double reach = half_width * d.squaredNorm();
  z << 0, 0, reach, reach;
  UncertaintyModel u;
  u.AB.emplace_back(A, B);
  u.W = HPolyhedron(F, z);
  return u;
}

UncertaintyModel no_uncertainty(const Mat& A, const Mat& B) {
  UncertaintyModel u;
  u.AB.emplace_back(A, B);
  const int n = static_cast<int>(A.rows());
  u.W = HPolyhedron::box(Vec::Zero(n), Vec::Zero(n));
  return u;
}

StageCost StageCost::quadratic(const Mat& Q, const Mat& R) {
  StageCost c;
  c.kind = Kind::Quadratic;
  c.Q = Q;
  c.R = R;
  return c;
}

StageCost StageCost::set_distance(const Mat& Q, const Mat& R, const Mat& K,
                                  const HPolyhedron& target) {
  if (target.is_empty()) throw Error(ErrorCode::InvalidArgument, "set-distance target is empty");
  StageCost c;
  c.kind = Kind::SetDistance;
  c.Q = Q;
  c.R = R;
  c.K = K;
  c.target = target;
  return c;
}

double StageCost::eval(const Vec& x, const Vec& u) const {
  if (kind == Kind::Quadratic) return x.dot(Q * x) + u.dot(R * u);
  const Vec xi = project(target, x, Q);
  const Vec dx = x - xi;
  const Vec du = u - K * x;
  return dx.dot(Q * dx) + du.dot(R * du);
}

std::vector<AffineForm> robust_counterpart_rows(const UncertaintyModel& unc, const RowVec& Gj,
                                                const Mat& Ri) {
  const double wbar = support(unc.W, Gj.transpose());
  std::vector<AffineForm> out;
  for (const auto& [A, B] : unc.AB) out.push_back({Gj * A * Ri, Gj * B, wbar});
  return out;
}

namespace {

// Accumulates dense LP rows  a' x <= b.
struct LpRows {
  std::vector<RowVec> a;
  std::vector<double> b;

  void add(const RowVec& row, double rhs) {
    a.push_back(row);
    b.push_back(rhs);
  }
  Mat matrix(int cols) const {
    Mat F(a.size(), cols);
    for (size_t r = 0; r < a.size(); ++r) F.row(r) = a[r];
    return F;
  }
  Vec rhs() const { return Eigen::Map<const Vec>(b.data(), b.size()); }
};

}  // namespace

double rci_invariance_residual(const HPolyhedron& Xs, const Mat& K, const UncertaintyModel& unc) {
  const auto verts = enumerate_vertices(Xs);
  const auto wv = unc.W_vertices();
  double worst = -kInf;
  for (const auto& v : verts)
    for (const auto& [A, B] : unc.AB)
      for (const auto& w : wv) {
        const Vec xp = (A + B * K) * v.point + w;
        worst = std::max(worst, (Xs.F() * xp - Xs.z()).maxCoeff());
      }
  return worst;
}

RciTarget compute_rci_target(const ConfigurationTriplet& domain, const Mat& K,
                             const LinearSystem& sys, const UncertaintyModel& unc,
                             std::optional<Vec> objective) {
  if (domain.kind != TripletKind::Domain)
    throw Error(ErrorCode::ModeMismatch, "RCI target needs a domain triplet");
  const int f = domain.num_facets();
  const Mat& G = domain.F;
  const Vec wbar = unc.support_rows(G);
  LpRows rows;
  const Mat E = Mat(domain.E);
  for (int r = 0; r < E.rows(); ++r) rows.add(E.row(r), 0.0);
  for (int i = 0; i < domain.num_vertices(); ++i) {
    const Mat Ri = domain.V(i);
    for (const auto& [A, B] : unc.AB) {
      const Mat Acl = (A + B * K) * Ri;
      for (int j = 0; j < f; ++j) {
        RowVec row = G.row(j) * Acl;
        row(j) -= 1.0;
        rows.add(row, -wbar(j));
      }
    }
    const Mat KR = K * Ri;
    for (int r = 0; r < sys.U.rows(); ++r) rows.add(sys.U.F().row(r) * KR, sys.U.z()(r));
    for (int r = 0; r < sys.X.rows(); ++r) rows.add(sys.X.F().row(r) * Ri, sys.X.z()(r));
  }
  const Vec c = objective ? *objective : Vec::Ones(f);
  const LpResult lp = maximize_over(rows.matrix(f), rows.rhs(), -c);
  if (lp.status == LpStatus::Infeasible)
    throw Error(ErrorCode::Infeasible, "no RCI set in this template for the given K");
  if (lp.status == LpStatus::Unbounded)
    throw Error(ErrorCode::Unbounded, "RCI objective is unbounded below");
  RciTarget out;
  out.zs = lp.x;
  out.set = HPolyhedron(G, out.zs);
  out.invariance_residual = rci_invariance_residual(out.set, K, unc);
  return out;
}

Vec compute_contractive_domain(const ConfigurationTriplet& domain, const LinearSystem& sys,
                               double lambda, const UncertaintyModel* unc, const Vec* target_zs) {
  if (domain.kind != TripletKind::Domain)
    throw Error(ErrorCode::ModeMismatch, "contractive domain needs a domain triplet");
  const int f = domain.num_facets();
  const int nv = domain.num_vertices();
  const int nu = sys.nu();
  const int cols = f + nv * nu;
  const Mat& G = domain.F;
  UncertaintyModel nominal = no_uncertainty(sys.A, sys.B);
  const UncertaintyModel& u = unc ? *unc : nominal;
  const Vec wbar = u.support_rows(G);
  const Vec zs = target_zs ? *target_zs : Vec::Zero(f);

  LpRows rows;
  const Mat E = Mat(domain.E);
  for (int r = 0; r < E.rows(); ++r) {
    RowVec row = RowVec::Zero(cols);
    row.head(f) = E.row(r);
    rows.add(row, 0.0);
  }
  for (int i = 0; i < nv; ++i) {
    const Mat Ri = domain.V(i);
    for (const auto& [A, B] : u.AB) {
      const Mat GAR = G * A * Ri;
      const Mat GB = G * B;
      for (int j = 0; j < f; ++j) {
        RowVec row = RowVec::Zero(cols);
        row.head(f) = GAR.row(j);
        row(j) -= lambda;
        row.segment(f + i * nu, nu) = GB.row(j);
        rows.add(row, (1.0 - lambda) * zs(j) - wbar(j));
      }
    }
    for (int r = 0; r < sys.X.rows(); ++r) {
      RowVec row = RowVec::Zero(cols);
      row.head(f) = sys.X.F().row(r) * Ri;
      rows.add(row, sys.X.z()(r));
    }
    for (int r = 0; r < sys.U.rows(); ++r) {
      RowVec row = RowVec::Zero(cols);
      row.segment(f + i * nu, nu) = sys.U.F().row(r);
      rows.add(row, sys.U.z()(r));
    }
  }
  Vec c = Vec::Zero(cols);
  c.head(f).setOnes();
  const LpResult lp = maximize_over(rows.matrix(cols), rows.rhs(), c);
  if (lp.status != LpStatus::Optimal)
    throw Error(ErrorCode::Infeasible, "no lambda-contractive polytope in these directions");
  return lp.x.head(f);
}

}  // namespace polyclf
