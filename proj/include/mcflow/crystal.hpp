// Crystal: one primitive cell with atom types, fractional coordinates and
// lattice parameters.

#ifndef MCFLOW_CRYSTAL_HPP_
#define MCFLOW_CRYSTAL_HPP_

#include <map>
#include <vector>

#include "mcflow/lattice.hpp"

namespace mcflow {

struct Crystal {
  std::vector<int> atom_types;     // atomic numbers
  std::vector<Vec3> frac_coords;   // each component in [0, 1)
  LatticeParams lattice;

  int num_atoms() const { return static_cast<int>(atom_types.size()); }
  bool operator==(const Crystal&) const = default;
};

// Throws InvalidData / InvalidLattice / UnsupportedElement.
void validate_crystal(const Crystal& c);

// Column i is the Cartesian position of site i.
Eigen::Matrix3Xd frac_to_cart(const Crystal& c);

// Image offsets searched for minimum-image distances: {-1,0,1}^3, widened
// to {-2..2}^3 for cells with an angle outside [75, 105] or a length ratio
// above 3.
int image_search_range(const LatticeParams& p);

// Minimum over distinct site pairs of the minimum-image Cartesian distance.
// +infinity for fewer than two sites.
double min_periodic_distance(const Crystal& c);
// Shortest nonzero lattice translation (distance of a site to its own images).
double min_self_image_distance(const LatticeParams& p);

// element -> count
std::map<int, int> composition(const Crystal& c);

// Applies a site permutation: out[i] = in[perm[i]].
Crystal permute_sites(const Crystal& c, const std::vector<int>& perm);

} // namespace mcflow
#endif
