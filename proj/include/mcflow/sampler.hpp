// Any-to-any inference: de novo generation (DNG), structure prediction from a
// composition (CSP) and atom-type generation for a fixed structure (ATG).
// Unobserved modalities start from the base distribution and are integrated
// along a straight trajectory in (t, s) with K uniform Euler steps.
#ifndef MCFLOW_SAMPLER_HPP_
#define MCFLOW_SAMPLER_HPP_

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcflow/crystal.hpp"
#include "mcflow/flow.hpp"
#include "mcflow/model.hpp"

namespace mcflow {

enum class TaskKind { DNG, CSP, ATG };

std::string to_string(TaskKind kind);
// "dng" / "csp" / "atg", case-insensitive. Throws UsageError.
TaskKind parse_task(const std::string& name);

struct Task {
  TaskKind kind = TaskKind::DNG;
  std::vector<int> composition;  // CSP: atomic numbers, canonical order
  Crystal structure;             // ATG: atom types ignored

  static Task dng() { return {}; }
  // Sorts the composition with canonical_atom_order.
  static Task csp(std::vector<int> atomic_numbers);
  static Task atg(Crystal structure);
};

// lambda -> (t, s): DNG (l, l), CSP (1, l), ATG (l, 1).
JointTime trajectory(TaskKind kind, double lambda);

enum class AtgGuidanceMode { Rate, Logit };

struct GuidanceConfig {
  bool enabled = false;
  double scale = 2.0;   // omega
  double noise = 0.1;   // sigma
  AtgGuidanceMode atg_mode = AtgGuidanceMode::Rate;
};

void validate_guidance(const GuidanceConfig& g);

// Everything inference needs besides the weights.
struct SamplerContext {
  const ModelParams* params = nullptr;
  LogNormalPrior length_prior;
  std::map<int, double> num_atoms_freq;  // empirical site-count distribution
};

int sample_num_atoms(const std::map<int, double>& counts, std::mt19937_64& rng);

// Per masked site: jump with probability min(1, dt * sum(rate)), landing on
// category j with probability rate_j / sum(rate). Negative rates count as
// zero. On the final step every masked site jumps; a site whose rates are
// all zero then draws uniformly and `warnings` is incremented.
AtomTypeState ctmc_step(const AtomTypeState& atoms, const RateVector& rate, double dt,
                        std::mt19937_64& rng, bool is_final, int* warnings = nullptr);

struct StructureState {
  std::vector<Vec3> frac;
  Vec3 lengths = Vec3::Ones();
  Vec3 angles = Vec3::Constant(90);
};

struct StructureVelocity {
  std::vector<Vec3> frac;
  Vec3 lengths = Vec3::Zero();
  Vec3 angles = Vec3::Zero();
};

// Euler step: coordinates through torus_exp, lengths and angles additively.
// Lengths are floored at 1e-3, angles clamped to [60, 120].
StructureState ode_step(const StructureState& x, const StructureVelocity& vel, double ds);

// Per-step record of the model evaluation times (first network call).
struct SampleTrace {
  std::vector<JointTime> times;
  int ctmc_warnings = 0;
};

// Algorithm without guidance. Throws NumericFailure annotated with the step.
Crystal generate(const Task& task, const SamplerContext& ctx, int steps, std::mt19937_64& rng,
                 SampleTrace* trace = nullptr);

// Noisy guidance for CSP and ATG. A fresh corrupted condition is drawn every
// step from a stream split off `rng` without advancing it, so scale 1
// reproduces generate() bit for bit.
Crystal guided_generate(const Task& task, const SamplerContext& ctx, int steps,
                        const GuidanceConfig& guidance, std::mt19937_64& rng,
                        SampleTrace* trace = nullptr);

} // namespace mcflow
#endif
