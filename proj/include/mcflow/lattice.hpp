// Lattice parameters, lattice matrices and Niggli reduction.
//
// A LatticeMatrix stores lattice vectors as rows. Cartesian coordinates of a
// fractional column f are L^T f. Angles are degrees at the API boundary.

#ifndef MCFLOW_LATTICE_HPP_
#define MCFLOW_LATTICE_HPP_

#include <Eigen/Dense>
#include <array>

namespace mcflow {

using Vec3 = Eigen::Vector3d;
using LatticeMatrix = Eigen::Matrix3d;
using IntMatrix3 = Eigen::Matrix3i;

struct LatticeParams {
  Vec3 lengths{1, 1, 1};     // a, b, c (angstrom)
  Vec3 angles{90, 90, 90};   // alpha, beta, gamma (degrees)

  double a() const { return lengths[0]; }
  double b() const { return lengths[1]; }
  double c() const { return lengths[2]; }
  bool operator==(const LatticeParams&) const = default;
};

inline constexpr double kMinVolume = 1e-12;
inline constexpr double kMinAngle = 60.0;
inline constexpr double kMaxAngle = 120.0;

double deg2rad(double deg);
double rad2deg(double rad);

// Cell volume computed from parameters; 0 for impossible angle triples.
double cell_volume(const LatticeParams& p);
double cell_volume(const LatticeMatrix& m);

// Checks lengths > 0, angles in [60, 120] and positive volume.
// Throws InvalidLattice naming the violated invariant.
void validate_lattice(const LatticeParams& p);

// Lower-triangular construction: a along x, b in the xy-plane.
// Only requires positive lengths and non-degenerate volume, so skewed
// (non-reduced) cells can be represented as well.
LatticeMatrix params_to_matrix(const LatticeParams& p);
LatticeParams matrix_to_params(const LatticeMatrix& m);

struct NiggliResult {
  LatticeMatrix reduced;
  // reduced = change_of_basis * input (acting on the rows); |det| = 1.
  IntMatrix3 change_of_basis;
  int iterations = 0;
};

// Krivy-Gruber reduction with tolerance eps = 1e-5 * V^(1/3).
NiggliResult niggli_reduce(const LatticeMatrix& m, int max_iterations = 10000);

// G6 vector (A, B, C, xi, eta, zeta) = (a.a, b.b, c.c, 2b.c, 2a.c, 2a.b).
std::array<double, 6> g6_of(const LatticeMatrix& m);

} // namespace mcflow
#endif
