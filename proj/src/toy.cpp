#include "mcflow/toy.hpp"

#include <random>

#include "mcflow/errors.hpp"
#include "mcflow/torus.hpp"

namespace mcflow {

namespace {

constexpr double kRockSaltA = 5.64;   // conventional cubic edge
constexpr double kPerovskiteA = 3.905;

// The 48 signed permutation matrices of the cubic holohedry.
std::vector<IntMatrix3> cubic_point_group() {
  std::vector<IntMatrix3> out;
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms)
    for (int signs = 0; signs < 8; ++signs) {
      IntMatrix3 m = IntMatrix3::Zero();
      for (int r = 0; r < 3; ++r)
        m(r, p[r]) = (signs >> r & 1) ? -1 : 1;
      out.push_back(m);
    }
  return out;
}

std::vector<SymmetryOp> point_ops(const std::vector<IntMatrix3>& rotations) {
  std::vector<SymmetryOp> ops;
  for (const IntMatrix3& r : rotations)
    ops.push_back({r, Vec3::Zero()});
  return ops;
}

} // namespace

DatasetRecord rock_salt_prototype() {
  // Primitive vectors of the fcc lattice in conventional fractional units
  // (columns): a1 = (0,1/2,1/2), a2 = (1/2,0,1/2), a3 = (1/2,1/2,0).
  Eigen::Matrix3d p;
  p << 0, 0.5, 0.5,
       0.5, 0, 0.5,
       0.5, 0.5, 0;
  Eigen::Matrix3d pinv = p.inverse();
  std::vector<IntMatrix3> rots;
  for (const IntMatrix3& rc : cubic_point_group()) {
    Eigen::Matrix3d rp = pinv * rc.cast<double>() * p;
    rots.push_back(rp.array().round().cast<int>().matrix());
  }
  DatasetRecord r;
  r.id = "NaCl-proto";
  r.crystal.atom_types = {11, 17};
  r.crystal.frac_coords = {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5)};
  r.crystal.lattice.lengths = Vec3::Constant(kRockSaltA / std::sqrt(2.0));
  r.crystal.lattice.angles = Vec3::Constant(60.0);
  r.spacegroup_number = 225;
  r.symmetry_ops = point_ops(rots);
  r.wyckoff_letters = {'a', 'b'};
  return r;
}

DatasetRecord perovskite_prototype() {
  DatasetRecord r;
  r.id = "SrTiO3-proto";
  r.crystal.atom_types = {38, 22, 8, 8, 8};
  r.crystal.frac_coords = {Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5), Vec3(0, 0.5, 0.5),
                           Vec3(0.5, 0, 0.5), Vec3(0.5, 0.5, 0)};
  r.crystal.lattice.lengths = Vec3::Constant(kPerovskiteA);
  r.crystal.lattice.angles = Vec3::Constant(90.0);
  r.spacegroup_number = 221;
  r.symmetry_ops = point_ops(cubic_point_group());
  r.wyckoff_letters = {'a', 'b', 'c', 'c', 'c'};
  return r;
}

std::vector<DatasetRecord> make_toy_dataset(int count, std::uint64_t seed) {
  if (count < 1)
    throw UsageError("toy dataset needs at least one crystal");
  const DatasetRecord protos[2] = {rock_salt_prototype(), perovskite_prototype()};
  std::mt19937_64 rng(seed);
  std::vector<DatasetRecord> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    DatasetRecord r = protos[i % 2];
    r.id = r.id.substr(0, r.id.find('-')) + "-" + std::to_string(i);
    std::normal_distribution<double> coord(0.0, kToyCoordJitter);
    for (Vec3& f : r.crystal.frac_coords)
      for (int k = 0; k < 3; ++k)
        f[k] = wrap01(f[k] + coord(rng));
    std::normal_distribution<double> scale(1.0, kToyLengthJitter);
    r.crystal.lattice.lengths *= scale(rng);
    out.push_back(std::move(r));
  }
  return out;
}

} // namespace mcflow
