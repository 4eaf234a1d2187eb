#include "mcflow/crystal.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mcflow/elements.hpp"
#include "mcflow/errors.hpp"

namespace mcflow {

void validate_crystal(const Crystal& c) {
  if (c.atom_types.empty())
    throw InvalidData("crystal has no sites");
  if (c.atom_types.size() != c.frac_coords.size())
    throw InvalidData("atom_types and frac_coords differ in length");
  for (size_t i = 0; i < c.atom_types.size(); ++i) {
    if (!is_supported_element(c.atom_types[i]))
      throw UnsupportedElement("site " + std::to_string(i) + ": unsupported element Z=" +
                               std::to_string(c.atom_types[i]));
    for (int k = 0; k < 3; ++k) {
      double f = c.frac_coords[i][k];
      if (!(f >= 0.0 && f < 1.0))
        throw InvalidData("site " + std::to_string(i) + ": fractional coordinate " +
                          std::to_string(f) + " outside [0, 1)");
    }
  }
  validate_lattice(c.lattice);
}

Eigen::Matrix3Xd frac_to_cart(const Crystal& c) {
  LatticeMatrix m = params_to_matrix(c.lattice);
  Eigen::Matrix3Xd out(3, c.num_atoms());
  for (int i = 0; i < c.num_atoms(); ++i)
    out.col(i) = m.transpose() * c.frac_coords[i];
  return out;
}

int image_search_range(const LatticeParams& p) {
  for (int i = 0; i < 3; ++i)
    if (p.angles[i] < 75.0 || p.angles[i] > 105.0)
      return 2;
  double lo = p.lengths.minCoeff(), hi = p.lengths.maxCoeff();
  return hi > 3.0 * lo ? 2 : 1;
}

namespace {

double min_image_norm(const LatticeMatrix& mt, const Vec3& d, int range, bool skip_zero) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = -range; i <= range; ++i)
    for (int j = -range; j <= range; ++j)
      for (int k = -range; k <= range; ++k) {
        if (skip_zero && i == 0 && j == 0 && k == 0)
          continue;
        Vec3 shifted = d + Vec3(i, j, k);
        best = std::min(best, (mt * shifted).norm());
      }
  return best;
}

} // namespace

double min_periodic_distance(const Crystal& c) {
  int n = c.num_atoms();
  if (n < 2)
    return std::numeric_limits<double>::infinity();
  LatticeMatrix mt = params_to_matrix(c.lattice).transpose();
  int range = image_search_range(c.lattice);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Vec3 d = c.frac_coords[j] - c.frac_coords[i];
      for (int k = 0; k < 3; ++k)
        d[k] -= std::round(d[k]);
      best = std::min(best, min_image_norm(mt, d, range, false));
    }
  return best;
}

double min_self_image_distance(const LatticeParams& p) {
  LatticeMatrix mt = params_to_matrix(p).transpose();
  return min_image_norm(mt, Vec3::Zero(), image_search_range(p), true);
}

std::map<int, int> composition(const Crystal& c) {
  std::map<int, int> out;
  for (int z : c.atom_types)
    ++out[z];
  return out;
}

Crystal permute_sites(const Crystal& c, const std::vector<int>& perm) {
  Crystal out;
  out.lattice = c.lattice;
  out.atom_types.reserve(perm.size());
  out.frac_coords.reserve(perm.size());
  for (int src : perm) {
    out.atom_types.push_back(c.atom_types[src]);
    out.frac_coords.push_back(c.frac_coords[src]);
  }
  return out;
}

} // namespace mcflow
