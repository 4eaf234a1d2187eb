#include "mcflow/sampler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mcflow/errors.hpp"
#include "mcflow/symmetry.hpp"
#include "mcflow/torus.hpp"

namespace mcflow {

namespace {

constexpr double kMinSampledLength = 1e-3;

HeadOutputs predict(const SamplerContext& ctx, const AtomTypeState& atoms,
                    const StructureState& x, JointTime time) {
  ModelInput in;
  in.atoms = atoms;
  in.frac = x.frac;
  in.lengths = x.lengths;
  in.angles = x.angles;
  in.time = time;
  return forward(*ctx.params, in).out;
}

StructureVelocity structure_velocity(const StructureState& x, const HeadOutputs& h, double s) {
  StructureVelocity v;
  v.frac = param_vel_frac(x.frac, h.frac, s);
  v.lengths = param_vel_linear(x.lengths, h.lengths, s);
  v.angles = param_vel_linear(x.angles, h.angles, s);
  return v;
}

StructureVelocity mix(const StructureVelocity& a, const StructureVelocity& b, double w) {
  StructureVelocity out;
  out.frac.resize(a.frac.size());
  for (size_t i = 0; i < a.frac.size(); ++i)
    out.frac[i] = (1 - w) * a.frac[i] + w * b.frac[i];
  out.lengths = (1 - w) * a.lengths + w * b.lengths;
  out.angles = (1 - w) * a.angles + w * b.angles;
  return out;
}

struct Initial {
  AtomTypeState atoms;
  StructureState x;
};

Initial initialize(const Task& task, const SamplerContext& ctx, std::mt19937_64& rng) {
  if (ctx.params == nullptr)
    throw UsageError("sampler: no model parameters");
  Initial init;
  switch (task.kind) {
  case TaskKind::DNG: {
    int n = sample_num_atoms(ctx.num_atoms_freq, rng);
    BaseSample b = sample_base(n, ctx.length_prior, rng);
    init.atoms = b.atoms;
    init.x = {b.frac_coords, b.lengths, b.angles};
    break;
  }
  case TaskKind::CSP: {
    if (task.composition.empty())
      throw UsageError("CSP task needs a nonempty composition");
    BaseSample b = sample_base(static_cast<int>(task.composition.size()), ctx.length_prior, rng);
    init.atoms = to_categories(task.composition);
    init.x = {b.frac_coords, b.lengths, b.angles};
    break;
  }
  case TaskKind::ATG: {
    const Crystal& c = task.structure;
    if (c.frac_coords.empty())
      throw UsageError("ATG task needs a structure");
    validate_lattice(c.lattice);
    init.atoms.assign(c.frac_coords.size(), kMaskToken);
    init.x = {c.frac_coords, c.lattice.lengths, c.lattice.angles};
    break;
  }
  }
  return init;
}

Crystal finish(const Task& task, const AtomTypeState& atoms, const StructureState& x) {
  Crystal c;
  if (task.kind == TaskKind::CSP)
    c.atom_types = task.composition;
  else
    c.atom_types = to_atomic_numbers(atoms);
  if (task.kind == TaskKind::ATG) {
    c.frac_coords = task.structure.frac_coords;
    c.lattice = task.structure.lattice;
  } else {
    c.frac_coords = x.frac;
    c.lattice = {x.lengths, x.angles};
  }
  return c;
}

[[noreturn]] void rethrow_at_step(const NumericFailure& e, int step) {
  throw NumericFailure(std::string(e.what()) + " at sampling step " + std::to_string(step),
                       e.layer);
}

RateVector mix_rates(const RateVector& corrupt, const RateVector& cond, double w) {
  return ((1 - w) * corrupt + w * cond).cwiseMax(0.0);
}

} // namespace

std::string to_string(TaskKind kind) {
  switch (kind) {
  case TaskKind::DNG: return "dng";
  case TaskKind::CSP: return "csp";
  case TaskKind::ATG: return "atg";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "dng")
    return TaskKind::DNG;
  if (s == "csp")
    return TaskKind::CSP;
  if (s == "atg")
    return TaskKind::ATG;
  throw UsageError("unknown task '" + name + "' (expected dng, csp or atg)");
}

Task Task::csp(std::vector<int> atomic_numbers) {
  Task t;
  t.kind = TaskKind::CSP;
  t.composition = canonical_atom_order(std::move(atomic_numbers));
  return t;
}

Task Task::atg(Crystal structure) {
  Task t;
  t.kind = TaskKind::ATG;
  t.structure = std::move(structure);
  return t;
}

JointTime trajectory(TaskKind kind, double lambda) {
  switch (kind) {
  case TaskKind::DNG: return {lambda, lambda};
  case TaskKind::CSP: return {1.0, lambda};
  case TaskKind::ATG: return {lambda, 1.0};
  }
  return {lambda, lambda};
}

void validate_guidance(const GuidanceConfig& g) {
  if (!(g.scale >= 0))
    throw UsageError("guidance scale must be >= 0");
  if (!(g.noise >= 0 && g.noise <= 1))
    throw UsageError("guidance noise level must lie in [0, 1]");
}

int sample_num_atoms(const std::map<int, double>& counts, std::mt19937_64& rng) {
  if (counts.empty())
    throw InvalidData("empty atom-count distribution");
  std::vector<int> values;
  std::vector<double> weights;
  for (auto [n, w] : counts) {
    if (n < 1 || !(w >= 0))
      throw InvalidData("invalid atom-count distribution entry");
    values.push_back(n);
    weights.push_back(w);
  }
  std::discrete_distribution<size_t> dist(weights.begin(), weights.end());
  return values[dist(rng)];
}

AtomTypeState ctmc_step(const AtomTypeState& atoms, const RateVector& rate, double dt,
                        std::mt19937_64& rng, bool is_final, int* warnings) {
  if (!(dt > 0))
    throw InvalidData("ctmc_step: dt must be positive");
  if (rate.rows() != static_cast<Eigen::Index>(atoms.size()))
    throw InvalidData("ctmc_step: rate rows do not match site count");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  AtomTypeState out = atoms;
  const int k = static_cast<int>(rate.cols());
  for (size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i] != kMaskToken)
      continue;
    Eigen::RowVectorXd r = rate.row(i).cwiseMax(0.0);
    double total = r.sum();
    double u = unif(rng);
    bool jump = is_final || u < std::min(1.0, dt * total);
    if (!jump)
      continue;
    if (total > 0) {
      std::discrete_distribution<int> dest(r.data(), r.data() + k);
      out[i] = dest(rng);
    } else {
      std::uniform_int_distribution<int> dest(0, k - 1);
      out[i] = dest(rng);
      if (warnings)
        ++*warnings;
    }
  }
  return out;
}

StructureState ode_step(const StructureState& x, const StructureVelocity& vel, double ds) {
  if (!(ds > 0))
    throw InvalidData("ode_step: ds must be positive");
  if (vel.frac.size() != x.frac.size())
    throw InvalidData("ode_step: velocity size mismatch");
  StructureState out;
  out.frac.resize(x.frac.size());
  for (size_t i = 0; i < x.frac.size(); ++i)
    for (int c = 0; c < 3; ++c)
      out.frac[i][c] = torus_exp(x.frac[i][c], ds * vel.frac[i][c]);
  out.lengths = (x.lengths + ds * vel.lengths).cwiseMax(kMinSampledLength);
  out.angles = (x.angles + ds * vel.angles).cwiseMax(kMinAngle).cwiseMin(kMaxAngle);
  return out;
}

Crystal generate(const Task& task, const SamplerContext& ctx, int steps, std::mt19937_64& rng,
                 SampleTrace* trace) {
  if (steps < 1)
    throw UsageError("sampling needs at least one step");
  Initial init = initialize(task, ctx, rng);
  AtomTypeState atoms = std::move(init.atoms);
  StructureState x = std::move(init.x);
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    JointTime time = trajectory(task.kind, static_cast<double>(k) / steps);
    if (trace)
      trace->times.push_back(time);
    HeadOutputs out;
    try {
      out = predict(ctx, atoms, x, time);
    } catch (const NumericFailure& e) {
      rethrow_at_step(e, k);
    }
    if (task.kind != TaskKind::CSP)
      atoms = ctmc_step(atoms, param_rate(atoms, out.logits, time.t), h, rng, k == steps - 1,
                        trace ? &trace->ctmc_warnings : nullptr);
    if (task.kind != TaskKind::ATG)
      x = ode_step(x, structure_velocity(x, out, time.s), h);
  }
  return finish(task, atoms, x);
}

Crystal guided_generate(const Task& task, const SamplerContext& ctx, int steps,
                        const GuidanceConfig& guidance, std::mt19937_64& rng, SampleTrace* trace) {
  if (task.kind == TaskKind::DNG)
    throw UsageError("noisy guidance needs a CSP or ATG condition");
  validate_guidance(guidance);
  if (steps < 1)
    throw UsageError("sampling needs at least one step");

  std::mt19937_64 peek = rng;
  std::seed_seq split{peek(), static_cast<std::uint64_t>(0x6e6f697379)};
  std::mt19937_64 noise_rng(split);

  Initial init = initialize(task, ctx, rng);
  AtomTypeState atoms = std::move(init.atoms);
  StructureState x = std::move(init.x);
  const double h = 1.0 / steps;
  const double w = guidance.scale;
  const double sigma = guidance.noise;
  for (int k = 0; k < steps; ++k) {
    JointTime time = trajectory(task.kind, static_cast<double>(k) / steps);
    if (trace)
      trace->times.push_back(time);
    try {
      if (task.kind == TaskKind::CSP) {
        AtomTypeState corrupt = interpolate_discrete(atoms, sigma, noise_rng);
        HeadOutputs out_c = predict(ctx, corrupt, x, {sigma, time.s});
        HeadOutputs out_f = predict(ctx, atoms, x, time);
        StructureVelocity v = mix(structure_velocity(x, out_c, time.s),
                                  structure_velocity(x, out_f, time.s), w);
        x = ode_step(x, v, h);
      } else {
        int n = static_cast<int>(x.frac.size());
        BaseSample base = sample_base(n, ctx.length_prior, noise_rng);
        StructureState xc;
        xc.frac = interpolate_frac(base.frac_coords, x.frac, sigma);
        xc.lengths = interpolate_linear(base.lengths, x.lengths, sigma);
        xc.angles = interpolate_linear(base.angles, x.angles, sigma);
        HeadOutputs out_c = predict(ctx, atoms, xc, {time.t, sigma});
        HeadOutputs out_f = predict(ctx, atoms, x, time);
        RateVector rate;
        if (guidance.atg_mode == AtgGuidanceMode::Rate) {
          rate = mix_rates(param_rate(atoms, out_c.logits, time.t),
                           param_rate(atoms, out_f.logits, time.t), w);
        } else {
          Eigen::MatrixXd logits = (1 - w) * out_c.logits + w * out_f.logits;
          rate = param_rate(atoms, logits, time.t);
        }
        atoms = ctmc_step(atoms, rate, h, rng, k == steps - 1,
                          trace ? &trace->ctmc_warnings : nullptr);
      }
    } catch (const NumericFailure& e) {
      rethrow_at_step(e, k);
    }
  }
  return finish(task, atoms, x);
}

} // namespace mcflow
