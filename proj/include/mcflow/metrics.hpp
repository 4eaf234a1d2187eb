// Evaluation: tolerance-gated structure matching, match rate / RMSE,
// structural and compositional validity, and 1-D Wasserstein property
// distances.
#ifndef MCFLOW_METRICS_HPP_
#define MCFLOW_METRICS_HPP_

#include <map>
#include <optional>
#include <vector>

#include "mcflow/crystal.hpp"

namespace mcflow {

struct MatchTolerances {
  double stol = 0.5;       // max normalized site displacement
  double ltol = 0.3;       // relative length tolerance
  double angle_tol = 10.0; // degrees
};

// Matching works on Niggli-reduced cells of equal site count. Candidate
// lattice correspondences are integer bases of the second cell (coefficients
// in [-2, 2]) whose lengths and angles agree with the first reduced cell.
// For each one, translations are anchored on site pairs of the rarest
// element, sites are assigned per element by minimum-cost bipartite
// matching, and the mean displacement is removed. Displacements are measured
// in the averaged lattice and divided by ((V1 + V2) / 2 / N)^(1/3).
// Returns the RMS normalized displacement of the assignment with the smallest
// maximum displacement, if that maximum is within stol.
std::optional<double> structure_match(const Crystal& c1, const Crystal& c2,
                                      const MatchTolerances& tol = {});

struct MatchSummary {
  double match_rate = 0;  // percent of targets matched by any candidate
  double mean_rmse = 0;   // over matched targets, best candidate each; NaN if none
  int matched = 0;
  std::vector<std::optional<double>> per_target;
};

MatchSummary match_rate_rmse(const std::vector<std::vector<Crystal>>& predictions,
                             const std::vector<Crystal>& targets, const MatchTolerances& tol = {});

inline constexpr double kMinInteratomicDistance = 0.5;
inline constexpr double kMinCellVolume = 0.1;

// Volume >= 0.1 A^3 and every interatomic distance > 0.5 A. A single-site
// cell is judged by the distance to its own periodic images.
bool structural_validity(const Crystal& c);

inline constexpr double kMaxOxidationCombinations = 1e6;

// Unary and all-metal compositions pass. Otherwise some assignment of one
// oxidation state per element must be charge neutral with every anion at
// least as electronegative as every cation. Searches over more than 1e6
// assignments are rejected.
bool compositional_validity(const std::map<int, int>& composition);

// Earth mover's distance between two empirical distributions on the line,
// integral of |F_a - F_b|.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

struct PropertyDistances {
  double d_rho = 0;   // on atom density N / V
  double d_elem = 0;  // on number of distinct elements
};

PropertyDistances property_distances(const std::vector<Crystal>& generated,
                                     const std::vector<Crystal>& reference);

// Minimum-cost perfect assignment on a square cost matrix; result[i] is the
// column assigned to row i.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

} // namespace mcflow
#endif
