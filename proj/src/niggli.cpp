// Krivy & Gruber (1976) reduction in the numerically stable form of
// Grosse-Kunstleve, Sauter & Adams (2004). The integer change of basis is
// tracked explicitly and the G6 vector is recomputed from the transformed
// rows on every pass, so rounding never accumulates.

#include <cmath>

#include "mcflow/errors.hpp"
#include "mcflow/lattice.hpp"

namespace mcflow {

namespace {

int sign_eps(double x, double eps) { return x > eps ? 1 : (x < -eps ? -1 : 0); }

IntMatrix3 rows(int a0, int a1, int a2, int b0, int b1, int b2, int c0, int c1, int c2) {
  IntMatrix3 t;
  t << a0, a1, a2, b0, b1, b2, c0, c1, c2;
  return t;
}

} // namespace

NiggliResult niggli_reduce(const LatticeMatrix& m, int max_iterations) {
  double volume = cell_volume(m);
  if (volume < kMinVolume)
    throw InvalidLattice("cannot reduce a degenerate lattice");
  const double eps = 1e-5 * std::cbrt(volume);
  IntMatrix3 cob = IntMatrix3::Identity();
  if (m.determinant() < 0)
    cob = -cob;  // keep a right-handed basis

  for (int iter = 0; iter < max_iterations; ++iter) {
    LatticeMatrix cur = cob.cast<double>() * m;
    auto g = g6_of(cur);
    double A = g[0], B = g[1], C = g[2], xi = g[3], eta = g[4], zeta = g[5];

    // 1: order A <= B
    if (A > B + eps || (std::abs(A - B) <= eps && std::abs(xi) > std::abs(eta) + eps)) {
      cob = rows(0, -1, 0, -1, 0, 0, 0, 0, -1) * cob;
      continue;
    }
    // 2: order B <= C
    if (B > C + eps || (std::abs(B - C) <= eps && std::abs(eta) > std::abs(zeta) + eps)) {
      cob = rows(-1, 0, 0, 0, 0, -1, 0, -1, 0) * cob;
      continue;
    }
    // 3/4: sign normalization to all-positive or all-nonpositive
    int l = sign_eps(xi, eps), mm = sign_eps(eta, eps), n = sign_eps(zeta, eps);
    if (l * mm * n == 1) {
      IntMatrix3 t = IntMatrix3::Identity();
      t(0, 0) = l == -1 ? -1 : 1;
      t(1, 1) = mm == -1 ? -1 : 1;
      t(2, 2) = n == -1 ? -1 : 1;
      cob = t * cob;
    } else {
      int f[3] = {1, 1, 1};
      int zero_at = -1;
      if (l == 1) f[0] = -1; else if (l == 0) zero_at = 0;
      if (mm == 1) f[1] = -1; else if (mm == 0) zero_at = 1;
      if (n == 1) f[2] = -1; else if (n == 0) zero_at = 2;
      if (f[0] * f[1] * f[2] < 0 && zero_at >= 0)
        f[zero_at] = -1;
      cob = rows(f[0], 0, 0, 0, f[1], 0, 0, 0, f[2]) * cob;
    }
    cur = cob.cast<double>() * m;
    g = g6_of(cur);
    A = g[0], B = g[1], C = g[2], xi = g[3], eta = g[4], zeta = g[5];

    // 5
    if (std::abs(xi) > B + eps || (std::abs(xi - B) <= eps && 2 * eta < zeta - eps) ||
        (std::abs(xi + B) <= eps && zeta < -eps)) {
      int s = xi > 0 ? 1 : -1;
      cob = rows(1, 0, 0, 0, 1, 0, 0, -s, 1) * cob;
      continue;
    }
    // 6
    if (std::abs(eta) > A + eps || (std::abs(eta - A) <= eps && 2 * xi < zeta - eps) ||
        (std::abs(eta + A) <= eps && zeta < -eps)) {
      int s = eta > 0 ? 1 : -1;
      cob = rows(1, 0, 0, 0, 1, 0, -s, 0, 1) * cob;
      continue;
    }
    // 7
    if (std::abs(zeta) > A + eps || (std::abs(zeta - A) <= eps && 2 * xi < eta - eps) ||
        (std::abs(zeta + A) <= eps && eta < -eps)) {
      int s = zeta > 0 ? 1 : -1;
      cob = rows(1, 0, 0, -s, 1, 0, 0, 0, 1) * cob;
      continue;
    }
    // 8
    double sum = xi + eta + zeta + A + B;
    if (sum < -eps || (std::abs(sum) <= eps && 2 * (A + eta) + zeta > eps)) {
      cob = rows(1, 0, 0, 0, 1, 0, 1, 1, 1) * cob;
      continue;
    }
    return {cur, cob, iter + 1};
  }
  throw ReductionFailure("Niggli reduction did not converge");
}

} // namespace mcflow
