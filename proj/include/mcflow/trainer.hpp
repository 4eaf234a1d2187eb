// Training loop: hierarchical augmentation, flow interpolation, loss and
// gradients, AdamW with global-norm clipping, EMA, periodic validation
// sampling and checkpoint selection.
#ifndef MCFLOW_TRAINER_HPP_
#define MCFLOW_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "mcflow/flow.hpp"
#include "mcflow/model.hpp"
#include "mcflow/sampler.hpp"
#include "mcflow/symmetry.hpp"

namespace mcflow {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 32;
  int max_epochs = 1000;
  long max_steps = 0;  // 0: epochs only
  double grad_clip = 10.0;
  double ema_decay = 0.9999;
  double time_clip = 0.9;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  int validate_every = 50;       // epochs; 0 disables
  int validation_samples = 32;
  int validation_steps = 100;
  bool validate_with_ema = true;
  int checkpoint_every = 50;     // epochs; 0 disables
  int max_skipped_steps = 20;    // consecutive non-finite steps before giving up
};

void validate_train_config(const TrainConfig& c);

struct TrainState {
  ModelParams params;
  ModelParams ema;
  std::vector<double> adam_m, adam_v;
  long step = 0;
  std::mt19937_64 rng;
};

// Fresh state: initialized weights, EMA = weights, zero moments.
TrainState init_train_state(const ModelConfig& model, std::uint64_t seed);

// Empirical quantities the sampler needs.
struct DataStats {
  LogNormalPrior length_prior;
  std::map<int, double> num_atoms_freq;
};

DataStats compute_data_stats(const std::vector<OrderedCrystal>& data);

// Length normalization taken from the data: offset = mean length,
// scale = max(std, 0.5). Also checks max_atoms against the largest crystal.
ModelConfig fit_model_config(ModelConfig config, const std::vector<OrderedCrystal>& data);

// Per-crystal training sample: augmentation, base draw, times and
// interpolation, all from one rng.
FlowSample make_flow_sample(const OrderedCrystal& crystal, const LogNormalPrior& prior,
                            double time_clip, std::mt19937_64& rng);

// rng stream of crystal `index` within the batch at `step`.
std::mt19937_64 sample_rng(std::uint64_t seed, long step, int index);

struct GradientResult {
  LossTerms loss;  // batch means
  std::vector<double> grads;
  bool finite = true;
};

// Batch-mean loss and its gradient at `params`; no state changes.
GradientResult compute_gradients(const ModelParams& params, const std::vector<OrderedCrystal>& batch,
                                 const TrainConfig& config, const LogNormalPrior& prior, long step);

struct StepReport {
  LossTerms loss;
  double grad_norm = 0;
  bool skipped = false;
};

// One optimizer step. A non-finite loss or gradient leaves everything but
// the step counter untouched and sets `skipped`.
StepReport training_step(TrainState& state, const std::vector<OrderedCrystal>& batch,
                         const TrainConfig& config, const LogNormalPrior& prior);

// Decoupled weight decay Adam with bias correction; `step` counts from 1.
void adamw_update(std::vector<double>& params, const std::vector<double>& grads,
                  std::vector<double>& m, std::vector<double>& v, long step, double lr,
                  double beta1, double beta2, double eps, double weight_decay);

void ema_update(std::vector<double>& ema, const std::vector<double>& params, double decay);

// Rescales to max_norm when the global L2 norm exceeds it. Returns the norm
// before clipping.
double clip_gradients(std::vector<double>& grads, double max_norm);

// Shuffled index batches of one epoch; the last batch may be partial.
std::vector<std::vector<int>> epoch_batches(int num_items, int batch_size, std::uint64_t seed,
                                            long epoch);

struct LogRow {
  long step = 0;
  long epoch = 0;
  LossTerms loss;
  double grad_norm = 0;
  bool skipped = false;
};

struct ValidationRecord {
  long epoch = 0;
  long step = 0;
  double structural = 0;
  double compositional = 0;
  double validity = 0;  // both tests passed
};

// Latest among the three best validity scores (ties favour later records).
// -1 for an empty list.
int select_checkpoint(const std::vector<ValidationRecord>& records);

// Fraction of DNG samples passing structural / compositional / both tests.
ValidationRecord validate_model(const ModelParams& params, const DataStats& stats, int samples,
                                int steps, std::uint64_t seed);

struct TrainHooks {
  std::function<void(const LogRow&)> on_step;
  std::function<void(const ValidationRecord&)> on_validation;
  // Called at the checkpoint cadence, at the end, and with the last good
  // state before a numeric abort.
  std::function<void(const TrainState&, long epoch)> on_checkpoint;
};

struct TrainResult {
  TrainState state;
  DataStats stats;
  std::vector<LogRow> log;
  std::vector<ValidationRecord> validations;
  int selected = -1;        // index into validations
  ModelParams selected_params;  // weights of the selected record, else final sampling weights
};

// Resumes from `resume` when given (its step decides the epoch position).
TrainResult train(const std::vector<OrderedCrystal>& data, const TrainConfig& config,
                  const ModelConfig& model, const TrainHooks& hooks = {},
                  std::optional<TrainState> resume = std::nullopt);

} // namespace mcflow
#endif
