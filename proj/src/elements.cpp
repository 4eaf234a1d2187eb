#include "mcflow/elements.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mcflow/errors.hpp"

namespace mcflow {

namespace {

constexpr double NA = std::numeric_limits<double>::quiet_NaN();

// Common oxidation states, at most 8 per element.
constexpr int ox_none[] = {0};
constexpr int ox_H[] = {-1, 1};
constexpr int ox_p1[] = {1};
constexpr int ox_p2[] = {2};
constexpr int ox_p3[] = {3};
constexpr int ox_p4[] = {4};
constexpr int ox_p5[] = {5};
constexpr int ox_B[] = {3};
constexpr int ox_C[] = {-4, 2, 4};
constexpr int ox_N[] = {-3, 3, 5};
constexpr int ox_O[] = {-2};
constexpr int ox_F[] = {-1};
constexpr int ox_Si[] = {-4, 4};
constexpr int ox_P[] = {-3, 3, 5};
constexpr int ox_S[] = {-2, 2, 4, 6};
constexpr int ox_Cl[] = {-1, 1, 3, 5, 7};
constexpr int ox_Ti[] = {2, 3, 4};
constexpr int ox_V[] = {2, 3, 4, 5};
constexpr int ox_Cr[] = {2, 3, 6};
constexpr int ox_Mn[] = {2, 3, 4, 7};
constexpr int ox_Fe[] = {2, 3};
constexpr int ox_Co[] = {2, 3};
constexpr int ox_Cu[] = {1, 2};
constexpr int ox_Ge[] = {-4, 2, 4};
constexpr int ox_As[] = {-3, 3, 5};
constexpr int ox_Se[] = {-2, 2, 4, 6};
constexpr int ox_Br[] = {-1, 1, 3, 5};
constexpr int ox_Nb[] = {3, 5};
constexpr int ox_Mo[] = {4, 6};
constexpr int ox_Tc[] = {4, 7};
constexpr int ox_Ru[] = {3, 4};
constexpr int ox_Pd[] = {2, 4};
constexpr int ox_Sn[] = {-4, 2, 4};
constexpr int ox_Sb[] = {-3, 3, 5};
constexpr int ox_Te[] = {-2, 2, 4, 6};
constexpr int ox_I[] = {-1, 1, 3, 5, 7};
constexpr int ox_Xe[] = {2, 4, 6};
constexpr int ox_Ce[] = {3, 4};
constexpr int ox_Eu[] = {2, 3};
constexpr int ox_W[] = {4, 6};
constexpr int ox_Ir[] = {3, 4};
constexpr int ox_Pt[] = {2, 4};
constexpr int ox_Au[] = {1, 3};
constexpr int ox_Hg[] = {1, 2};
constexpr int ox_Tl[] = {1, 3};
constexpr int ox_Pb[] = {2, 4};
constexpr int ox_Po[] = {-2, 2, 4};
constexpr int ox_At[] = {-1, 1};
constexpr int ox_U[] = {3, 4, 5, 6};
constexpr int ox_Pu[] = {3, 4};

constexpr std::span<const int> none() { return {ox_none, 0}; }

struct Row {
  const char* symbol;
  double en;
  std::span<const int> ox;
  bool metal;
};

// Index Z - 1.
const std::array<Row, kMaxZ> kTable = {{
  {"H", 2.20, ox_H, false},   {"He", NA, none(), false},
  {"Li", 0.98, ox_p1, true},  {"Be", 1.57, ox_p2, true},
  {"B", 2.04, ox_B, false},   {"C", 2.55, ox_C, false},
  {"N", 3.04, ox_N, false},   {"O", 3.44, ox_O, false},
  {"F", 3.98, ox_F, false},   {"Ne", NA, none(), false},
  {"Na", 0.93, ox_p1, true},  {"Mg", 1.31, ox_p2, true},
  {"Al", 1.61, ox_p3, true},  {"Si", 1.90, ox_Si, false},
  {"P", 2.19, ox_P, false},   {"S", 2.58, ox_S, false},
  {"Cl", 3.16, ox_Cl, false}, {"Ar", NA, none(), false},
  {"K", 0.82, ox_p1, true},   {"Ca", 1.00, ox_p2, true},
  {"Sc", 1.36, ox_p3, true},  {"Ti", 1.54, ox_Ti, true},
  {"V", 1.63, ox_V, true},    {"Cr", 1.66, ox_Cr, true},
  {"Mn", 1.55, ox_Mn, true},  {"Fe", 1.83, ox_Fe, true},
  {"Co", 1.88, ox_Co, true},  {"Ni", 1.91, ox_p2, true},
  {"Cu", 1.90, ox_Cu, true},  {"Zn", 1.65, ox_p2, true},
  {"Ga", 1.81, ox_p3, true},  {"Ge", 2.01, ox_Ge, false},
  {"As", 2.18, ox_As, false}, {"Se", 2.55, ox_Se, false},
  {"Br", 2.96, ox_Br, false}, {"Kr", 3.00, ox_p2, false},
  {"Rb", 0.82, ox_p1, true},  {"Sr", 0.95, ox_p2, true},
  {"Y", 1.22, ox_p3, true},   {"Zr", 1.33, ox_p4, true},
  {"Nb", 1.60, ox_Nb, true},  {"Mo", 2.16, ox_Mo, true},
  {"Tc", 1.90, ox_Tc, true},  {"Ru", 2.20, ox_Ru, true},
  {"Rh", 2.28, ox_p3, true},  {"Pd", 2.20, ox_Pd, true},
  {"Ag", 1.93, ox_p1, true},  {"Cd", 1.69, ox_p2, true},
  {"In", 1.78, ox_p3, true},  {"Sn", 1.96, ox_Sn, true},
  {"Sb", 2.05, ox_Sb, false}, {"Te", 2.10, ox_Te, false},
  {"I", 2.66, ox_I, false},   {"Xe", 2.60, ox_Xe, false},
  {"Cs", 0.79, ox_p1, true},  {"Ba", 0.89, ox_p2, true},
  {"La", 1.10, ox_p3, true},  {"Ce", 1.12, ox_Ce, true},
  {"Pr", 1.13, ox_p3, true},  {"Nd", 1.14, ox_p3, true},
  {"Pm", 1.13, ox_p3, true},  {"Sm", 1.17, ox_p3, true},
  {"Eu", 1.20, ox_Eu, true},  {"Gd", 1.20, ox_p3, true},
  {"Tb", 1.10, ox_p3, true},  {"Dy", 1.22, ox_p3, true},
  {"Ho", 1.23, ox_p3, true},  {"Er", 1.24, ox_p3, true},
  {"Tm", 1.25, ox_p3, true},  {"Yb", 1.10, ox_p3, true},
  {"Lu", 1.27, ox_p3, true},  {"Hf", 1.30, ox_p4, true},
  {"Ta", 1.50, ox_p5, true},  {"W", 2.36, ox_W, true},
  {"Re", 1.90, ox_p4, true},  {"Os", 2.20, ox_p4, true},
  {"Ir", 2.20, ox_Ir, true},  {"Pt", 2.28, ox_Pt, true},
  {"Au", 2.54, ox_Au, true},  {"Hg", 2.00, ox_Hg, true},
  {"Tl", 1.62, ox_Tl, true},  {"Pb", 2.33, ox_Pb, true},
  {"Bi", 2.02, ox_p3, true},  {"Po", 2.00, ox_Po, false},
  {"At", 2.20, ox_At, false}, {"Rn", NA, none(), false},
  {"Fr", 0.70, ox_p1, true},  {"Ra", 0.90, ox_p2, true},
  {"Ac", 1.10, ox_p3, true},  {"Th", 1.30, ox_p4, true},
  {"Pa", 1.50, ox_p5, true},  {"U", 1.38, ox_U, true},
  {"Np", 1.36, ox_p5, true},  {"Pu", 1.28, ox_Pu, true},
}};

const std::array<ElementChemistry, kMaxZ>& chemistry() {
  static const std::array<ElementChemistry, kMaxZ> table = [] {
    std::array<ElementChemistry, kMaxZ> out{};
    for (int i = 0; i < kMaxZ; ++i)
      out[i] = {kTable[i].symbol, kTable[i].en, kTable[i].ox, kTable[i].metal};
    return out;
  }();
  return table;
}

} // namespace

bool is_supported_element(int z) { return z >= 1 && z <= kMaxZ; }

const ElementChemistry& element(int z) {
  if (!is_supported_element(z))
    throw UnsupportedElement("unsupported element Z=" + std::to_string(z));
  return chemistry()[z - 1];
}

std::optional<double> electronegativity(int z) {
  double en = element(z).electronegativity;
  if (std::isnan(en))
    return std::nullopt;
  return en;
}

int atomic_number(std::string_view symbol) {
  for (int z = 1; z <= kMaxZ; ++z)
    if (chemistry()[z - 1].symbol == symbol)
      return z;
  throw UnsupportedElement("unsupported element symbol '" + std::string(symbol) + "'");
}

} // namespace mcflow
