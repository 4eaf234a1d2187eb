#include "mcflow/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "mcflow/elements.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/torus.hpp"

namespace mcflow {

Vec3 SymmetryOp::apply(const Vec3& f) const {
  Vec3 r = rotation.cast<double>() * f + translation;
  return Vec3(wrap01(r[0]), wrap01(r[1]), wrap01(r[2]));
}

bool SymmetryOp::is_identity() const {
  return rotation == IntMatrix3::Identity() && translation.isZero(1e-9);
}

int WyckoffGroup::num_sites() const {
  int n = 0;
  for (const Orbit& o : orbits)
    n += static_cast<int>(o.site_indices.size());
  return n;
}

int OrbitStructure::num_sites() const {
  int n = 0;
  for (const WyckoffGroup& g : groups)
    n += g.num_sites();
  return n;
}

int OrbitStructure::num_orbits() const {
  int n = 0;
  for (const WyckoffGroup& g : groups)
    n += static_cast<int>(g.orbits.size());
  return n;
}

namespace {

// (untabulated?, electronegativity or Z, Z)
std::tuple<int, double, int> element_key(int z) {
  std::optional<double> en = electronegativity(z);  // throws for unsupported Z
  if (en)
    return {0, *en, z};
  return {1, static_cast<double>(z), z};
}

bool coord_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x)
      x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b)
      parent[std::max(a, b)] = std::min(a, b);
  }
};

void sort_structure(const Crystal& crystal, OrbitStructure& s) {
  const auto& fc = crystal.frac_coords;
  for (WyckoffGroup& g : s.groups) {
    for (Orbit& o : g.orbits)
      std::sort(o.site_indices.begin(), o.site_indices.end(),
                [&](int i, int j) { return coord_less(fc[i], fc[j]); });
    // the first member is now the orbit's smallest coordinate triple
    std::sort(g.orbits.begin(), g.orbits.end(), [&](const Orbit& a, const Orbit& b) {
      return coord_less(fc[a.site_indices.front()], fc[b.site_indices.front()]);
    });
  }
  std::stable_sort(s.groups.begin(), s.groups.end(),
                   [](const WyckoffGroup& a, const WyckoffGroup& b) {
                     if (a.element != b.element)
                       return element_precedes(a.element, b.element);
                     return a.wyckoff_letter < b.wyckoff_letter;
                   });
}

} // namespace

bool element_precedes(int z1, int z2) { return element_key(z1) < element_key(z2); }

OrbitStructure partition_orbits(const Crystal& crystal, const std::vector<SymmetryOp>& ops,
                                const std::vector<char>& wyckoff_letters, double tol) {
  const int n = crystal.num_atoms();
  if (ops.empty())
    throw InvalidData("partition_orbits: no symmetry operations");
  if (static_cast<int>(wyckoff_letters.size()) != n)
    throw InvalidData("partition_orbits: expected " + std::to_string(n) + " Wyckoff letters");
  if (!(tol > 0))
    throw InvalidData("partition_orbits: tolerance must be positive");
  for (char letter : wyckoff_letters)
    if (letter < 'a' || letter > 'z')
      throw InvalidData(std::string("invalid Wyckoff letter '") + letter + "'");
  for (int z : crystal.atom_types)
    element_key(z);

  DisjointSets sets(n);
  for (int i = 0; i < n; ++i) {
    for (size_t k = 0; k < ops.size(); ++k) {
      Vec3 image = ops[k].apply(crystal.frac_coords[i]);
      int best = -1;
      double best_dist = tol;
      for (int j = 0; j < n; ++j) {
        if (crystal.atom_types[j] != crystal.atom_types[i])
          continue;
        double d = 0;
        for (int c = 0; c < 3; ++c)
          d = std::max(d, std::abs(torus_log(image[c], crystal.frac_coords[j][c])));
        if (d <= best_dist) {
          best_dist = d;
          best = j;
        }
      }
      if (best < 0)
        throw InconsistentSymmetry("symmetry op " + std::to_string(k) + " maps site " +
                                   std::to_string(i) + " onto no site of the same element");
      if (wyckoff_letters[best] != wyckoff_letters[i])
        throw InconsistentSymmetry("symmetry op " + std::to_string(k) + " relates sites " +
                                   std::to_string(i) + " and " + std::to_string(best) +
                                   " with different Wyckoff letters");
      sets.unite(i, best);
    }
  }

  OrbitStructure out;
  std::vector<int> orbit_of_root(n, -1);
  std::vector<Orbit> orbits;
  for (int i = 0; i < n; ++i) {
    int root = sets.find(i);
    if (orbit_of_root[root] < 0) {
      orbit_of_root[root] = static_cast<int>(orbits.size());
      orbits.push_back({{}, crystal.atom_types[i], wyckoff_letters[i]});
    }
    orbits[orbit_of_root[root]].site_indices.push_back(i);
  }
  for (Orbit& o : orbits) {
    auto it = std::find_if(out.groups.begin(), out.groups.end(), [&](const WyckoffGroup& g) {
      return g.element == o.element && g.wyckoff_letter == o.wyckoff_letter;
    });
    if (it == out.groups.end()) {
      out.groups.push_back({o.element, o.wyckoff_letter, {}});
      it = std::prev(out.groups.end());
    }
    it->orbits.push_back(std::move(o));
  }
  sort_structure(crystal, out);
  return out;
}

OrderedCrystal canonical_order(const Crystal& crystal, const OrbitStructure& structure) {
  if (structure.num_sites() != crystal.num_atoms())
    throw InvalidData("orbit structure does not cover the crystal");
  OrbitStructure sorted = structure;
  sort_structure(crystal, sorted);
  std::vector<int> perm;
  perm.reserve(crystal.num_atoms());
  OrderedCrystal out;
  for (WyckoffGroup& g : sorted.groups)
    for (Orbit& o : g.orbits)
      for (int& idx : o.site_indices) {
        perm.push_back(idx);
        idx = static_cast<int>(perm.size()) - 1;
      }
  out.crystal = permute_sites(crystal, perm);
  out.structure = std::move(sorted);
  return out;
}

std::vector<int> canonical_atom_order(std::vector<int> atom_types) {
  std::stable_sort(atom_types.begin(), atom_types.end(), element_precedes);
  return atom_types;
}

std::vector<int> augment_permutation(const OrbitStructure& structure, std::mt19937_64& rng) {
  std::vector<int> perm;
  perm.reserve(structure.num_sites());
  for (const WyckoffGroup& g : structure.groups) {
    std::vector<const Orbit*> blocks;
    for (const Orbit& o : g.orbits)
      blocks.push_back(&o);
    std::shuffle(blocks.begin(), blocks.end(), rng);
    for (const Orbit* o : blocks) {
      std::vector<int> sites = o->site_indices;
      std::shuffle(sites.begin(), sites.end(), rng);
      perm.insert(perm.end(), sites.begin(), sites.end());
    }
  }
  return perm;
}

Crystal augment(const OrbitStructure& structure, const Crystal& crystal, std::mt19937_64& rng,
                bool translate) {
  Crystal out = permute_sites(crystal, augment_permutation(structure, rng));
  if (translate) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec3 u;
    for (int k = 0; k < 3; ++k)
      u[k] = unif(rng);
    for (Vec3& f : out.frac_coords)
      for (int k = 0; k < 3; ++k)
        f[k] = torus_exp(f[k], u[k]);
  }
  return out;
}

double log10_factorial(int n) { return std::lgamma(n + 1.0) / std::log(10.0); }

double reduced_perm_space_log10(const OrbitStructure& structure) {
  double total = 0;
  for (const WyckoffGroup& g : structure.groups) {
    total += log10_factorial(static_cast<int>(g.orbits.size()));
    for (const Orbit& o : g.orbits)
      total += log10_factorial(static_cast<int>(o.site_indices.size()));
  }
  return total;
}

} // namespace mcflow
