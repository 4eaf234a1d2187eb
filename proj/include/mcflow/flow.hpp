// Multimodal flow paths: base distributions, conditional interpolants,
// conditional targets, clean-data parameterization and the weighted
// Bregman-divergence loss.
//
// Atom types live on a masked discrete path (CTMC), fractional coordinates
// on the torus (geodesic), lattice lengths and angles on straight lines.

#ifndef MCFLOW_FLOW_HPP_
#define MCFLOW_FLOW_HPP_

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mcflow/elements.hpp"
#include "mcflow/lattice.hpp"

namespace mcflow {

// t drives atom types, s drives the structure.
struct JointTime {
  double t = 0;
  double s = 0;
};

// Per-site category: 0..kNumElements-1 for Z = 1..94, or kMaskToken.
using AtomTypeState = std::vector<int>;
// Per-site off-diagonal CTMC rates over the real categories (N x K).
using RateVector = Eigen::MatrixXd;

struct LogNormalPrior {
  Vec3 mu = Vec3::Zero();
  Vec3 sigma = Vec3::Ones();
};

inline constexpr double kDenominatorFloor = 1e-4;
inline constexpr double kSigmaFloor = 1e-3;
inline constexpr double kGklFloor = 1e-12;

// max(1 - time, 1e-4)
double time_denominator(double time);

AtomTypeState to_categories(const std::vector<int>& atomic_numbers);
std::vector<int> to_atomic_numbers(const AtomTypeState& categories);

// t, s ~ U[0,1], each then clipped to at most `clip`.
JointTime sample_time(std::mt19937_64& rng, double clip);

// Per-component MLE of log-lengths; sigma floored at 1e-3.
LogNormalPrior fit_lognormal(const std::vector<Vec3>& lengths);

struct BaseSample {
  AtomTypeState atoms;            // all MASK
  std::vector<Vec3> frac_coords;  // U[0,1)
  Vec3 lengths;                   // LogNormal per component
  Vec3 angles;                    // U[60, 120] degrees
};

BaseSample sample_base(int num_atoms, const LogNormalPrior& prior, std::mt19937_64& rng);
std::vector<Vec3> sample_frac_base(int num_atoms, std::mt19937_64& rng);

// Each site equals its clean value with probability t, otherwise MASK.
AtomTypeState interpolate_discrete(const AtomTypeState& clean, double t, std::mt19937_64& rng);
// Torus geodesic exp_{f0}(s log_{f0}(f1)), per component.
std::vector<Vec3> interpolate_frac(const std::vector<Vec3>& f0, const std::vector<Vec3>& f1,
                                   double s);
Vec3 interpolate_linear(const Vec3& y0, const Vec3& y1, double s);

// Masked sites: 1/(1-t) on the clean category. Unmasked sites: zero.
RateVector cond_rate_atoms(const AtomTypeState& current, const AtomTypeState& clean, double t);
// log_{F_s}(F_1) / (1-s)
std::vector<Vec3> cond_vel_frac(const std::vector<Vec3>& current, const std::vector<Vec3>& clean,
                                double s);
// (Y_1 - Y_s) / (1-s)
Vec3 cond_vel_linear(const Vec3& current, const Vec3& clean, double s);

// Masked sites: softmax(logits)/(1-t) over the real categories.
RateVector param_rate(const AtomTypeState& current, const Eigen::MatrixXd& logits, double t);
// log_{F_s}(F_pred mod 1) / (1-s)
std::vector<Vec3> param_vel_frac(const std::vector<Vec3>& current, const Eigen::MatrixXd& pred,
                                 double s);
Vec3 param_vel_linear(const Vec3& current, const Vec3& pred, double s);

// sum u log(u/v) - sum u + sum v, with 0 log 0 = 0 and v floored at 1e-12
// inside the log.
double generalized_kl(const Eigen::Ref<const Eigen::RowVectorXd>& u,
                      const Eigen::Ref<const Eigen::RowVectorXd>& v);

// Raw network predictions for one crystal.
struct HeadOutputs {
  Eigen::MatrixXd logits;  // N x K
  Eigen::MatrixXd frac;    // N x 3, unprojected
  Vec3 lengths = Vec3::Zero();
  Vec3 angles = Vec3::Zero();

  static HeadOutputs zeros(int num_atoms);
};

// Noisy state at (t, s) together with the clean endpoint it came from.
struct FlowSample {
  AtomTypeState atoms_t, atoms_1;
  std::vector<Vec3> frac_s, frac_1;
  Vec3 lengths_s, lengths_1;
  Vec3 angles_s, angles_1;
  JointTime time;

  int num_atoms() const { return static_cast<int>(atoms_t.size()); }
};

struct ConditionalTargets {
  RateVector atoms;
  std::vector<Vec3> frac;
  Vec3 lengths, angles;
};

ConditionalTargets conditional_targets(const FlowSample& sample);

struct LossWeights {
  double atoms = 0.5;
  double frac = 2.0;
  double lengths = 1.0;
  double angles = 1.0;
};

struct LossTerms {
  double total = 0, atoms = 0, frac = 0, lengths = 0, angles = 0;

  LossTerms& operator+=(const LossTerms& o);
  LossTerms& operator*=(double k);
};

struct LossResult {
  LossTerms terms;
  HeadOutputs grad;  // d total / d predictions
};

// Weighted divergence between parameterized and conditional targets for one
// crystal. Per-site terms are averaged over the crystal's sites; lattice
// terms are counted once. The rate divergence is GKL(target, predicted).
LossResult flow_matching_loss(const HeadOutputs& pred, const FlowSample& sample,
                              const ConditionalTargets& targets, const LossWeights& weights);

} // namespace mcflow
#endif
