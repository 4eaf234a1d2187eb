// Static per-element chemistry for Z = 1..94: symbols, Pauling
// electronegativity, common oxidation states and a metal flag.

#ifndef MCFLOW_ELEMENTS_HPP_
#define MCFLOW_ELEMENTS_HPP_

#include <optional>
#include <span>
#include <string_view>

namespace mcflow {

inline constexpr int kMaxZ = 94;
// Number of real atom-type categories; category k holds element Z = k + 1.
inline constexpr int kNumElements = kMaxZ;
// Reserved category indices, after the real elements.
inline constexpr int kMaskToken = kNumElements;
inline constexpr int kPadToken = kNumElements + 1;

struct ElementChemistry {
  std::string_view symbol;
  double electronegativity;  // Pauling; NaN when not tabulated (He, Ne, Ar, Rn)
  std::span<const int> oxidation_states;
  bool metal;
};

bool is_supported_element(int z);
// Throws UnsupportedElement for Z outside 1..94.
const ElementChemistry& element(int z);
std::optional<double> electronegativity(int z);
// Throws UnsupportedElement for unknown symbols.
int atomic_number(std::string_view symbol);

inline int category_of(int z) { return z - 1; }
inline int element_of(int category) { return category + 1; }

} // namespace mcflow
#endif
