// Synthetic two-prototype corpus for end-to-end runs: rock salt NaCl in the
// fcc primitive cell (2 sites) and cubic perovskite SrTiO3 (5 sites), each
// labelled with its full point-group operations and Wyckoff letters.
#ifndef MCFLOW_TOY_HPP_
#define MCFLOW_TOY_HPP_

#include <cstdint>
#include <vector>

#include "mcflow/records.hpp"

namespace mcflow {

inline constexpr double kToyCoordJitter = 0.01;   // fractional, per component
inline constexpr double kToyLengthJitter = 0.02;  // relative, one factor per cell
// Orbit tolerance that tolerates the coordinate jitter.
inline constexpr double kToyOrbitTolerance = 0.1;

DatasetRecord rock_salt_prototype();
DatasetRecord perovskite_prototype();

// Alternates the two prototypes, with jitter drawn from `seed`.
std::vector<DatasetRecord> make_toy_dataset(int count, std::uint64_t seed);

} // namespace mcflow
#endif
