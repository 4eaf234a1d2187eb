#include "mcflow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcflow/errors.hpp"
#include "mcflow/metrics.hpp"

namespace mcflow {

namespace {

constexpr double kMinLengthScale = 0.5;
constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kValidationStream = 0x76616c69;

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0))
    throw UsageError("learning_rate must be positive");
  if (!(c.weight_decay >= 0))
    throw UsageError("weight_decay must be >= 0");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1) || !(c.adam_eps > 0))
    throw UsageError("invalid Adam hyperparameters");
  if (c.batch_size < 1 || c.max_epochs < 1 || c.max_steps < 0)
    throw UsageError("batch_size and max_epochs must be positive");
  if (!(c.grad_clip > 0))
    throw UsageError("grad_clip must be positive");
  if (!(c.ema_decay > 0 && c.ema_decay < 1))
    throw UsageError("ema_decay must lie in (0, 1)");
  if (!(c.time_clip > 0 && c.time_clip <= 1))
    throw UsageError("time_clip must lie in (0, 1]");
  const LossWeights& w = c.loss_weights;
  if (!(w.atoms >= 0 && w.frac >= 0 && w.lengths >= 0 && w.angles >= 0))
    throw UsageError("loss weights must be >= 0");
  if (c.validate_every < 0 || c.validation_samples < 1 || c.validation_steps < 1 ||
      c.checkpoint_every < 0 || c.max_skipped_steps < 1)
    throw UsageError("invalid validation or checkpoint cadence");
}

TrainState init_train_state(const ModelConfig& model, std::uint64_t seed) {
  TrainState s;
  s.rng.seed(seed);
  s.params = ModelParams(model);
  initialize_params(s.params, s.rng);
  s.ema = s.params;
  s.adam_m.assign(s.params.num_parameters(), 0.0);
  s.adam_v.assign(s.params.num_parameters(), 0.0);
  return s;
}

DataStats compute_data_stats(const std::vector<OrderedCrystal>& data) {
  if (data.empty())
    throw InvalidData("empty training set");
  DataStats st;
  std::vector<Vec3> lengths;
  for (const OrderedCrystal& c : data) {
    lengths.push_back(c.crystal.lattice.lengths);
    st.num_atoms_freq[c.crystal.num_atoms()] += 1.0;
  }
  for (auto& [n, f] : st.num_atoms_freq)
    f /= static_cast<double>(data.size());
  st.length_prior = fit_lognormal(lengths);
  return st;
}

ModelConfig fit_model_config(ModelConfig config, const std::vector<OrderedCrystal>& data) {
  if (data.empty())
    throw InvalidData("empty training set");
  double sum = 0, sum2 = 0;
  int count = 0, max_n = 0;
  for (const OrderedCrystal& c : data) {
    for (int k = 0; k < 3; ++k) {
      double l = c.crystal.lattice.lengths[k];
      sum += l;
      sum2 += l * l;
      ++count;
    }
    max_n = std::max(max_n, c.crystal.num_atoms());
  }
  double mean = sum / count;
  double var = std::max(0.0, sum2 / count - mean * mean);
  config.length_offset = mean;
  config.length_scale = std::max(std::sqrt(var), kMinLengthScale);
  if (max_n > config.max_atoms)
    throw SequenceLength("training set has a crystal with " + std::to_string(max_n) +
                         " sites, above max_atoms " + std::to_string(config.max_atoms));
  return config;
}

FlowSample make_flow_sample(const OrderedCrystal& crystal, const LogNormalPrior& prior,
                            double time_clip, std::mt19937_64& rng) {
  Crystal aug = augment(crystal.structure, crystal.crystal, rng, true);
  const int n = aug.num_atoms();
  BaseSample base = sample_base(n, prior, rng);
  FlowSample fs;
  fs.time = sample_time(rng, time_clip);
  fs.atoms_1 = to_categories(aug.atom_types);
  fs.atoms_t = interpolate_discrete(fs.atoms_1, fs.time.t, rng);
  fs.frac_1 = aug.frac_coords;
  fs.frac_s = interpolate_frac(base.frac_coords, fs.frac_1, fs.time.s);
  fs.lengths_1 = aug.lattice.lengths;
  fs.lengths_s = interpolate_linear(base.lengths, fs.lengths_1, fs.time.s);
  fs.angles_1 = aug.lattice.angles;
  fs.angles_s = interpolate_linear(base.angles, fs.angles_1, fs.time.s);
  return fs;
}

std::mt19937_64 sample_rng(std::uint64_t seed, long step, int index) {
  std::seed_seq seq{seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(index)};
  return std::mt19937_64(seq);
}

GradientResult compute_gradients(const ModelParams& params, const std::vector<OrderedCrystal>& batch,
                                 const TrainConfig& config, const LogNormalPrior& prior, long step) {
  if (batch.empty())
    throw InvalidData("empty batch");
  GradientResult r;
  r.grads.assign(params.num_parameters(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    std::mt19937_64 rng = sample_rng(config.seed, step, static_cast<int>(i));
    FlowSample fs = make_flow_sample(batch[i], prior, config.time_clip, rng);
    ModelInput in;
    in.atoms = fs.atoms_t;
    in.frac = fs.frac_s;
    in.lengths = fs.lengths_s;
    in.angles = fs.angles_s;
    in.time = fs.time;
    ForwardPass fp;
    try {
      fp = forward(params, in);
    } catch (const NumericFailure&) {
      r.finite = false;
      return r;
    }
    LossResult lr = flow_matching_loss(fp.out, fs, conditional_targets(fs), config.loss_weights);
    if (!std::isfinite(lr.terms.total)) {
      r.finite = false;
      return r;
    }
    HeadOutputs adj = lr.grad;
    adj.logits *= inv_b;
    adj.frac *= inv_b;
    adj.lengths *= inv_b;
    adj.angles *= inv_b;
    backward(params, in, fp, adj, r.grads);
    lr.terms *= inv_b;
    r.loss += lr.terms;
  }
  r.finite = std::isfinite(r.loss.total) && all_finite(r.grads);
  return r;
}

StepReport training_step(TrainState& state, const std::vector<OrderedCrystal>& batch,
                         const TrainConfig& config, const LogNormalPrior& prior) {
  StepReport rep;
  GradientResult g = compute_gradients(state.params, batch, config, prior, state.step);
  rep.loss = g.loss;
  ++state.step;
  if (!g.finite) {
    rep.skipped = true;
    return rep;
  }
  rep.grad_norm = clip_gradients(g.grads, config.grad_clip);
  adamw_update(state.params.values(), g.grads, state.adam_m, state.adam_v, state.step,
               config.learning_rate, config.beta1, config.beta2, config.adam_eps,
               config.weight_decay);
  ema_update(state.ema.values(), state.params.values(), config.ema_decay);
  return rep;
}

void adamw_update(std::vector<double>& params, const std::vector<double>& grads,
                  std::vector<double>& m, std::vector<double>& v, long step, double lr,
                  double beta1, double beta2, double eps, double weight_decay) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
    throw InvalidData("adamw_update: shape mismatch");
  if (step < 1)
    throw InvalidData("adamw_update: step counts from 1");
  const double bc1 = 1 - std::pow(beta1, static_cast<double>(step));
  const double bc2 = 1 - std::pow(beta2, static_cast<double>(step));
  for (size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * weight_decay * params[i];
    m[i] = beta1 * m[i] + (1 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1 - beta2) * grads[i] * grads[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void ema_update(std::vector<double>& ema, const std::vector<double>& params, double decay) {
  if (ema.size() != params.size())
    throw InvalidData("ema_update: shape mismatch");
  for (size_t i = 0; i < ema.size(); ++i)
    ema[i] = decay * ema[i] + (1 - decay) * params[i];
}

double clip_gradients(std::vector<double>& grads, double max_norm) {
  if (!(max_norm > 0))
    throw InvalidData("clip_gradients: max_norm must be positive");
  double sq = 0;
  for (double g : grads)
    sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm) {
    double k = max_norm / norm;
    for (double& g : grads)
      g *= k;
  }
  return norm;
}

std::vector<std::vector<int>> epoch_batches(int num_items, int batch_size, std::uint64_t seed,
                                            long epoch) {
  if (batch_size < 1)
    throw InvalidData("batch_size must be positive");
  std::vector<int> order(num_items);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{seed, static_cast<std::uint64_t>(epoch), kShuffleStream};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < num_items; i += batch_size)
    out.emplace_back(order.begin() + i, order.begin() + std::min(num_items, i + batch_size));
  return out;
}

int select_checkpoint(const std::vector<ValidationRecord>& records) {
  if (records.empty())
    return -1;
  std::vector<int> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (records[a].validity != records[b].validity)
      return records[a].validity > records[b].validity;
    return records[a].step > records[b].step;
  });
  idx.resize(std::min<size_t>(3, idx.size()));
  return *std::max_element(idx.begin(), idx.end(),
                           [&](int a, int b) { return records[a].step < records[b].step; });
}

ValidationRecord validate_model(const ModelParams& params, const DataStats& stats, int samples,
                                int steps, std::uint64_t seed) {
  SamplerContext ctx{&params, stats.length_prior, stats.num_atoms_freq};
  int structural = 0, compositional = 0, both = 0;
  for (int i = 0; i < samples; ++i) {
    std::seed_seq seq{seed, kValidationStream, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    try {
      Crystal c = generate(Task::dng(), ctx, steps, rng);
      bool s = structural_validity(c);
      bool k = compositional_validity(composition(c));
      structural += s;
      compositional += k;
      both += s && k;
    } catch (const Error&) {
    }
  }
  ValidationRecord r;
  r.structural = static_cast<double>(structural) / samples;
  r.compositional = static_cast<double>(compositional) / samples;
  r.validity = static_cast<double>(both) / samples;
  return r;
}

TrainResult train(const std::vector<OrderedCrystal>& data, const TrainConfig& config,
                  const ModelConfig& model, const TrainHooks& hooks,
                  std::optional<TrainState> resume) {
  validate_train_config(config);
  if (data.empty())
    throw InvalidData("empty training set");
  TrainResult result;
  result.stats = compute_data_stats(data);
  result.state = resume ? std::move(*resume) : init_train_state(model, config.seed);
  TrainState& state = result.state;
  if (!(state.params.config() == model))
    throw UsageError("resumed state does not match the model configuration");

  const int n = static_cast<int>(data.size());
  const long per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long total_steps = config.max_steps > 0
                               ? std::min<long>(config.max_steps, per_epoch * config.max_epochs)
                               : per_epoch * config.max_epochs;

  std::vector<ModelParams> snapshots;
  auto sampling_params = [&]() -> const ModelParams& {
    return config.validate_with_ema ? state.ema : state.params;
  };
  auto run_validation = [&](long epoch) {
    ValidationRecord v = validate_model(sampling_params(), result.stats, config.validation_samples,
                                        config.validation_steps, config.seed + state.step);
    v.epoch = epoch;
    v.step = state.step;
    result.validations.push_back(v);
    snapshots.push_back(sampling_params());
    if (hooks.on_validation)
      hooks.on_validation(v);
  };

  int consecutive_skips = 0;
  TrainState last_good = state;
  while (state.step < total_steps) {
    const long epoch = state.step / per_epoch;
    const auto batches = epoch_batches(n, config.batch_size, config.seed, epoch);
    for (long b = state.step % per_epoch; b < per_epoch && state.step < total_steps; ++b) {
      std::vector<OrderedCrystal> batch;
      for (int i : batches[b])
        batch.push_back(data[i]);
      StepReport rep = training_step(state, batch, config, result.stats.length_prior);
      LogRow row{state.step, epoch, rep.loss, rep.grad_norm, rep.skipped};
      result.log.push_back(row);
      if (hooks.on_step)
        hooks.on_step(row);
      if (rep.skipped) {
        if (++consecutive_skips >= config.max_skipped_steps) {
          if (hooks.on_checkpoint)
            hooks.on_checkpoint(last_good, epoch);
          throw NumericFailure("training aborted after " + std::to_string(consecutive_skips) +
                                   " consecutive non-finite steps at step " +
                                   std::to_string(state.step),
                               -1);
        }
      } else {
        consecutive_skips = 0;
        last_good = state;
      }
    }
    const bool epoch_done = state.step % per_epoch == 0;
    const long finished = epoch + 1;
    const bool last = state.step >= total_steps;
    if (epoch_done && config.validate_every > 0 && finished % config.validate_every == 0)
      run_validation(finished);
    else if (last && config.validate_every > 0)
      run_validation(finished);
    if (hooks.on_checkpoint &&
        (last || (epoch_done && config.checkpoint_every > 0 && finished % config.checkpoint_every == 0)))
      hooks.on_checkpoint(state, finished);
  }

  result.selected = select_checkpoint(result.validations);
  result.selected_params = result.selected >= 0 ? snapshots[result.selected] : sampling_params();
  return result;
}

} // namespace mcflow
