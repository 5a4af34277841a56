#include "omt/pointwise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "omt/errors.hpp"

namespace omt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Safeguarded Newton for a decreasing function h with h(lo) > 0 > h(hi).
template <class Eval>
double decreasing_root(Eval&& eval, double lo, double hi) {
  double x = lo;
  for (int it = 0; it < 200; ++it) {
    auto [h, dh] = eval(x);
    if (h == 0.0) return x;
    if (h > 0.0)
      lo = x;
    else
      hi = x;
    double next = (dh < 0.0) ? x - h / dh : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x)) || hi - lo <= 1e-15 * (1.0 + std::abs(hi))) return next;
    x = next;
  }
  return x;
}

}  // namespace

ParaboloidPoint proj_K(const ParaboloidPoint& q) {
  const double bb = q.b.squaredNorm();
  if (q.a + 0.5 * bb <= 0.0) return q;
  // h(l) = a - l + |b|^2 / (2 (1+l)^2) is convex and decreasing on l >= 0, so
  // Newton from l = 0 increases monotonically to the root.
  double l = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double s = 1.0 + l;
    const double h = q.a - l + 0.5 * bb / (s * s);
    const double dh = -1.0 - bb / (s * s * s);
    const double step = -h / dh;
    l += step;
    if (std::abs(step) <= 1e-16 * (1.0 + l)) break;
  }
  ParaboloidPoint out;
  out.a = q.a - l;
  out.b = q.b / (1.0 + l);
  return out;
}

KfSet::KfSet(const SmallVec& c_, const SmallMat& gram_) : c(c_), gram(gram_) {
  Eigen::SelfAdjointEigenSolver<SmallMat> es(gram);
  basis = es.eigenvectors();
  lambda = es.eigenvalues().cwiseMax(0.0);
  plain = c.isZero(0.0) && gram.isIdentity(0.0);
}

KfSet::KfSet(const KfSet& shared, const SmallVec& c_)
    : c(c_), gram(shared.gram), basis(shared.basis), lambda(shared.lambda) {
  plain = c.isZero(0.0) && gram.isIdentity(0.0);
}

double KfSet::value(const ParaboloidPoint& q) const { return q.a + c.dot(q.b) + 0.5 * q.b.dot(gram * q.b); }

ParaboloidPoint proj_Kf(const ParaboloidPoint& q, const KfSet& set) {
  if (set.plain) return proj_K(q);
  if (set.value(q) <= 0.0) return q;
  const SmallVec bt = set.basis.transpose() * q.b;
  const SmallVec ct = set.basis.transpose() * set.c;
  const int d = static_cast<int>(bt.size());
  auto beta_of = [&](double l) {
    SmallVec out(d);
    for (int i = 0; i < d; ++i) out(i) = (bt(i) - l * ct(i)) / (1.0 + l * set.lambda(i));
    return out;
  };
  auto eval = [&](double l) {
    const SmallVec be = beta_of(l);
    double h = q.a - l, dh = -1.0;
    for (int i = 0; i < d; ++i) {
      h += ct(i) * be(i) + 0.5 * set.lambda(i) * be(i) * be(i);
      const double g = ct(i) + set.lambda(i) * be(i);
      dh -= g * g / (1.0 + l * set.lambda(i));
    }
    return std::pair{h, dh};
  };
  double hi = 1.0;
  while (eval(hi).first > 0.0) hi *= 2.0;
  const double l = decreasing_root(eval, 0.0, hi);
  ParaboloidPoint out;
  out.a = q.a - l;
  out.b = set.basis * beta_of(l);
  return out;
}

ParaboloidPoint proj_Kf(const ParaboloidPoint& q, const SmallVec& c, const SmallMat& gram) {
  return proj_Kf(q, KfSet(c, gram));
}

ProxMData::ProxMData(const SmallMat& Bdag, const SmallVec& f_) : f(f_) {
  const SmallMat w = Bdag.transpose() * Bdag;
  Eigen::SelfAdjointEigenSolver<SmallMat> es(w);
  basis = es.eigenvectors();
  lambda = es.eigenvalues().cwiseMax(0.0);
  for (int i = 0; i < lambda.size(); ++i)
    if (lambda(i) <= 1e-14 * lambda.maxCoeff()) lambda(i) = 0.0;
  fWf = f.dot(w * f);
}

ProxMData::ProxMData(const ProxMData& shared, const SmallVec& f_)
    : f(f_), basis(shared.basis), lambda(shared.lambda) {
  const SmallVec ft = basis.transpose() * f;
  fWf = ft.dot(lambda.cwiseProduct(ft));
}

double ProxMData::M(const SmallVec& mu) const {
  const double rho = mu(0);
  const SmallVec d = basis.transpose() * (mu.tail(f.size()) - rho * f);
  double q = 0.0;
  for (int i = 0; i < d.size(); ++i) q += lambda(i) * d(i) * d(i);
  if (rho > 0.0) return 0.5 * q / rho;
  if (rho == 0.0 && q == 0.0) return 0.0;
  return kInf;
}

namespace {

// Point at rho = 0: m is restricted to the null space of W.
SmallVec boundary_point(const SmallVec& mt, const ProxMData& data) {
  const int n = static_cast<int>(mt.size());
  SmallVec keep(n);
  for (int i = 0; i < n; ++i) keep(i) = (data.lambda(i) == 0.0) ? mt(i) : 0.0;
  SmallVec out(n + 1);
  out(0) = 0.0;
  out.tail(n) = data.basis * keep;
  return out;
}

SmallVec assemble(double rho, const SmallVec& yt, const ProxMData& data) {
  const int n = static_cast<int>(yt.size());
  SmallVec m(n);
  for (int i = 0; i < n; ++i) m(i) = rho * yt(i) / (rho + data.lambda(i));
  SmallVec out(n + 1);
  out(0) = rho;
  out.tail(n) = data.basis * m;
  return out;
}

}  // namespace

SmallVec prox_M_point(const SmallVec& muhat, const ProxMData& data, ProxMVariant variant) {
  const int n = static_cast<int>(data.f.size());
  const double rhohat = muhat(0);
  const SmallVec mt = data.basis.transpose() * muhat.tail(n);
  const SmallVec ft = data.basis.transpose() * data.f;
  // m(rho) = rho (rho I + W)^{-1} y with y = mhat + W f, in the eigenbasis.
  SmallVec yt(n);
  for (int i = 0; i < n; ++i) yt(i) = mt(i) + data.lambda(i) * ft(i);

  // sum lambda_i z_i^2 with z_i = y_i / (rho + lambda_i), i.e. |B^+ m / rho|^2.
  auto kinetic = [&](double rho) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      if (data.lambda(i) == 0.0) continue;
      const double z = yt(i) / (rho + data.lambda(i));
      s += data.lambda(i) * z * z;
    }
    return s;
  };

  if (variant == ProxMVariant::exact) {
    // F(rho) = rho - rhohat - kinetic(rho)/2 + fWf/2 is increasing on rho > 0.
    auto F = [&](double rho) { return rho - rhohat - 0.5 * kinetic(rho) + 0.5 * data.fWf; };
    if (F(0.0) >= 0.0) return boundary_point(mt, data);
    double lo = 0.0, hi = std::max(1.0, std::abs(rhohat));
    while (F(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 60 && hi - lo > 1e-13 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (F(mid) < 0.0 ? lo : hi) = mid;
    }
    double rho = 0.5 * (lo + hi);
    for (int it = 0; it < 3; ++it) {
      double dF = 1.0;
      for (int i = 0; i < n; ++i) {
        const double s = rho + data.lambda(i);
        if (data.lambda(i) > 0.0) dF += data.lambda(i) * yt(i) * yt(i) / (s * s * s);
      }
      const double next = rho - F(rho) / dF;
      if (!(next >= lo && next <= hi)) break;
      rho = next;
    }
    return assemble(rho, yt, data);
  }

  // Literal system: rho - rhohat - |B^+ m|^2 / (2 rhohat^2) + fWf/2 = 0 with the
  // same m(rho). Take the largest positive root.
  if (!(rhohat > 0.0)) return boundary_point(mt, data);
  const double inv = 1.0 / (2.0 * rhohat * rhohat);
  auto F = [&](double rho) { return rho - rhohat - inv * rho * rho * kinetic(rho) + 0.5 * data.fWf; };
  double sup_kin = 0.0;  // bound of rho^2 kinetic(rho) over rho >= 0
  for (int i = 0; i < n; ++i) sup_kin += data.lambda(i) * yt(i) * yt(i);
  const double upper = std::max(0.0, rhohat - 0.5 * data.fWf + inv * sup_kin) + 1.0;
  // F > 0 beyond `upper`; scan down for the last sign change.
  constexpr int kScan = 4096;
  double prev_x = upper, prev_f = F(upper);
  for (int k = kScan - 1; k >= 1; --k) {
    const double x = upper * k / kScan;
    const double fx = F(x);
    if (fx <= 0.0 && prev_f > 0.0) {
      double lo = x, hi = prev_x;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (F(mid) <= 0.0 ? lo : hi) = mid;
      }
      return assemble(0.5 * (lo + hi), yt, data);
    }
    prev_x = x;
    prev_f = fx;
  }
  // F(0+) = fWf/2 - rhohat; a sign change in (0, upper/kScan) is still a root.
  if (F(0.0) <= 0.0) {
    double lo = 0.0, hi = prev_x;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (F(mid) <= 0.0 ? lo : hi) = mid;
    }
    if (hi > 0.0) return assemble(0.5 * (lo + hi), yt, data);
  }
  return boundary_point(mt, data);
}

SmallVec prox_M_point(const SmallVec& muhat, const SmallMat& Bdag, const SmallVec& f, ProxMVariant variant) {
  return prox_M_point(muhat, ProxMData(Bdag, f), variant);
}

SmallVec project_polyhedron(const SmallVec& mu, const double* A, const double* c, int rows) {
  const int dim = static_cast<int>(mu.size());
  auto row = [&](int k) { return Eigen::Map<const Eigen::VectorXd>(A + k * dim, dim); };
  auto slack = [&](int k, const SmallVec& x) { return row(k).dot(x) - c[k]; };
  // Round-off along the path scales with the input as well as the iterate.
  const double mu_scale = mu.cwiseAbs().sum();
  auto tol = [&](int k, const SmallVec& x) {
    return 1e-13 * (1.0 + mu_scale + x.cwiseAbs().sum() + std::abs(c[k]));
  };

  SmallVec x = mu;
  // Active normals and their multipliers; at most dim independent rows.
  int active[kMaxSpaceDim + 1];
  double u[kMaxSpaceDim + 1];
  int q = 0;

  for (int outer = 0; outer < 8 * rows + 16; ++outer) {
    int p = -1;
    double worst = 0.0;
    for (int k = 0; k < rows; ++k) {
      const double s = slack(k, x);
      if (s > tol(k, x) && s > worst) {
        worst = s;
        p = k;
      }
    }
    if (p < 0) return x;

    double up = 0.0;
    for (int inner = 0; inner < 4 * (kMaxSpaceDim + 1) + 4; ++inner) {
      SmallMat N(dim, q);
      for (int i = 0; i < q; ++i) N.col(i) = row(active[i]);
      const SmallVec ap = row(p);
      SmallVec r(q);
      SmallVec z = -ap;
      if (q > 0) {
        const SmallMat NtN = N.transpose() * N;
        r = NtN.ldlt().solve(N.transpose() * ap);
        z += N * r;
      }
      const double zz = z.squaredNorm();
      double t1 = kInf;
      int block = -1;
      for (int i = 0; i < q; ++i) {
        if (r(i) > 1e-14 && u[i] / r(i) < t1) {
          t1 = u[i] / r(i);
          block = i;
        }
      }
      const bool primal = zz > 1e-24;
      const double t2 = primal ? slack(p, x) / zz : kInf;
      if (!primal && block < 0) throw ProjectionFailure("project_polyhedron: constraints are inconsistent");
      const double t = std::min(t1, t2);
      if (primal) x += t * z;
      for (int i = 0; i < q; ++i) u[i] -= t * r(i);
      up += t;
      if (primal && t2 <= t1) {
        active[q] = p;
        u[q] = up;
        ++q;
        break;
      }
      // Drop the blocking constraint and retry.
      for (int i = block; i + 1 < q; ++i) {
        active[i] = active[i + 1];
        u[i] = u[i + 1];
      }
      --q;
      if (inner == 4 * (kMaxSpaceDim + 1) + 3) throw ProjectionFailure("project_polyhedron: active set cycling");
    }
    if (q > dim) throw ProjectionFailure("project_polyhedron: degenerate active set");
  }
  throw ProjectionFailure("project_polyhedron: iteration cap reached");
}

SmallVec project_polyhedron(const SmallVec& mu, const CompiledConstraints& cc, std::size_t cell) {
  return project_polyhedron(mu, cc.row(cell, 0), cc.rhs.data() + cell * cc.rows, cc.rows);
}

void clamp_cap(std::span<double> xi, std::span<const double> gamma) {
  for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = std::min(xi[i], gamma[i]);
}

}  // namespace omt
