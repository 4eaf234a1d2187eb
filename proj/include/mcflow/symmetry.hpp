// Orbit partitioning from supplied symmetry operations, composition- and
// symmetry-aware site ordering, and hierarchical permutation augmentation.

#ifndef MCFLOW_SYMMETRY_HPP_
#define MCFLOW_SYMMETRY_HPP_

#include <random>
#include <vector>

#include "mcflow/crystal.hpp"

namespace mcflow {

// Space-group operation in the fractional basis: f -> (R f + t) mod 1.
struct SymmetryOp {
  IntMatrix3 rotation = IntMatrix3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& f) const;
  bool is_identity() const;
  bool operator==(const SymmetryOp&) const = default;
};

struct Orbit {
  std::vector<int> site_indices;
  int element = 0;
  char wyckoff_letter = 'a';
};

// Orbits sharing one element and one Wyckoff letter.
struct WyckoffGroup {
  int element = 0;
  char wyckoff_letter = 'a';
  std::vector<Orbit> orbits;

  int num_sites() const;
};

struct OrbitStructure {
  std::vector<WyckoffGroup> groups;

  int num_sites() const;
  int num_orbits() const;
};

inline constexpr double kDefaultOrbitTolerance = 1e-3;

// Ordering of elements: ascending Pauling electronegativity, ties broken by
// atomic number; elements without a tabulated value come last, by atomic
// number. Throws UnsupportedElement outside Z = 1..94.
bool element_precedes(int z1, int z2);

// Groups sites into orbits by closure of the op action (component-wise,
// mod 1, within tol). The result is sorted: groups by (element order,
// letter), orbits by their smallest member coordinate triple, sites inside
// an orbit by coordinate triple. Indices refer to the input crystal.
OrbitStructure partition_orbits(const Crystal& crystal, const std::vector<SymmetryOp>& ops,
                                const std::vector<char>& wyckoff_letters,
                                double tol = kDefaultOrbitTolerance);

struct OrderedCrystal {
  Crystal crystal;
  OrbitStructure structure;  // indices into `crystal`, contiguous 0..N-1
};

// Reorders the sites to the concatenation of the structure's groups.
OrderedCrystal canonical_order(const Crystal& crystal, const OrbitStructure& structure);

// Orders bare atom types (no symmetry information) by element_precedes, the
// order a composition condition takes.
std::vector<int> canonical_atom_order(std::vector<int> atom_types);

// Site permutation drawn by the hierarchical augmentation: orbit blocks are
// shuffled inside each group, then sites inside each orbit. out[i] is the
// source index of position i.
std::vector<int> augment_permutation(const OrbitStructure& structure, std::mt19937_64& rng);

// Applies augment_permutation and, when `translate` is set, one global
// translation u ~ U[0,1)^3 modulo 1.
Crystal augment(const OrbitStructure& structure, const Crystal& crystal, std::mt19937_64& rng,
                bool translate = true);

// log10 of prod_i |W^i|! prod_j |O^i_j|!.
double reduced_perm_space_log10(const OrbitStructure& structure);
// log10(n!)
double log10_factorial(int n);

} // namespace mcflow
#endif
