#include "mcflow/lattice.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mcflow/errors.hpp"

namespace mcflow {

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

double cell_volume(const LatticeParams& p) {
  double ca = std::cos(deg2rad(p.angles[0]));
  double cb = std::cos(deg2rad(p.angles[1]));
  double cg = std::cos(deg2rad(p.angles[2]));
  double x = 1 - ca * ca - cb * cb - cg * cg + 2 * ca * cb * cg;
  if (!(x > 0))
    return 0.0;
  return p.a() * p.b() * p.c() * std::sqrt(x);
}

double cell_volume(const LatticeMatrix& m) { return std::abs(m.determinant()); }

void validate_lattice(const LatticeParams& p) {
  for (int i = 0; i < 3; ++i) {
    if (!(p.lengths[i] > 0) || !std::isfinite(p.lengths[i]))
      throw InvalidLattice("lattice length " + std::to_string(i) + " must be positive");
    if (!(p.angles[i] >= kMinAngle && p.angles[i] <= kMaxAngle))
      throw InvalidLattice("lattice angle " + std::to_string(i) + " = " +
                           std::to_string(p.angles[i]) + " outside [60, 120]");
  }
  if (cell_volume(p) < kMinVolume)
    throw InvalidLattice("degenerate lattice (volume below 1e-12)");
}

LatticeMatrix params_to_matrix(const LatticeParams& p) {
  for (int i = 0; i < 3; ++i)
    if (!(p.lengths[i] > 0))
      throw InvalidLattice("lattice lengths must be positive");
  if (cell_volume(p) < kMinVolume)
    throw InvalidLattice("degenerate lattice (volume below 1e-12)");
  double ca = std::cos(deg2rad(p.angles[0]));
  double cb = std::cos(deg2rad(p.angles[1]));
  double cg = std::cos(deg2rad(p.angles[2]));
  double sg = std::sin(deg2rad(p.angles[2]));
  double cy = (ca - cb * cg) / sg;
  double cz = std::sqrt(std::max(0.0, 1 - cb * cb - cy * cy));
  LatticeMatrix m;
  m << p.a(), 0, 0,
       p.b() * cg, p.b() * sg, 0,
       p.c() * cb, p.c() * cy, p.c() * cz;
  return m;
}

LatticeParams matrix_to_params(const LatticeMatrix& m) {
  if (cell_volume(m) < kMinVolume)
    throw InvalidLattice("near-collinear lattice vectors");
  LatticeParams p;
  for (int i = 0; i < 3; ++i)
    p.lengths[i] = m.row(i).norm();
  auto angle = [&](int i, int j) {
    double c = m.row(i).dot(m.row(j)) / (p.lengths[i] * p.lengths[j]);
    return rad2deg(std::acos(std::clamp(c, -1.0, 1.0)));
  };
  p.angles = Vec3(angle(1, 2), angle(0, 2), angle(0, 1));
  return p;
}

std::array<double, 6> g6_of(const LatticeMatrix& m) {
  Vec3 a = m.row(0), b = m.row(1), c = m.row(2);
  return {a.dot(a), b.dot(b), c.dot(c), 2 * b.dot(c), 2 * a.dot(c), 2 * a.dot(b)};
}

} // namespace mcflow
