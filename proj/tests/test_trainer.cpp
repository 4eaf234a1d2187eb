#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "mcflow/errors.hpp"
#include "mcflow/records.hpp"
#include "mcflow/toy.hpp"
#include "mcflow/trainer.hpp"

using namespace mcflow;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.mlp_ratio = 2;
  c.max_atoms = 6;
  c.time_features = 8;
  return c;
}

const std::vector<OrderedCrystal>& toy_data() {
  static const std::vector<OrderedCrystal> data =
      preprocess_dataset(make_toy_dataset(10, 3), kToyOrbitTolerance);
  return data;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 4;
  c.max_steps = 6;
  c.validate_every = 0;
  c.checkpoint_every = 0;
  c.ema_decay = 0.9;
  c.seed = 17;
  return c;
}

double norm_of(const ModelParams& p, const std::vector<double>& g, int id) {
  const TensorInfo& t = p.layout().info(id);
  double s = 0;
  for (size_t i = 0; i < t.size(); ++i)
    s += g[t.offset + i] * g[t.offset + i];
  return std::sqrt(s);
}

} // namespace

TEST_CASE("AdamW") {
  SUBCASE("single scalar step with unit gradient moves by about lr") {
    std::vector<double> p{0.0}, g{1.0}, m{0.0}, v{0.0};
    adamw_update(p, g, m, v, 1, 0.01, 0.9, 0.999, 1e-8, 0.0);
    CHECK(p[0] == doctest::Approx(-0.01 / (1 + 1e-8)).epsilon(1e-12));
    CHECK(m[0] == doctest::Approx(0.1));
    CHECK(v[0] == doctest::Approx(0.001));
  }
  SUBCASE("zero gradient without decay leaves params alone") {
    std::vector<double> p{0.3, -2.0}, g{0, 0}, m{0, 0}, v{0, 0};
    adamw_update(p, g, m, v, 1, 0.01, 0.9, 0.999, 1e-8, 0.0);
    CHECK(p == std::vector<double>{0.3, -2.0});
  }
  SUBCASE("decay is decoupled from the gradient") {
    std::vector<double> p{2.0}, g{0.0}, m{0.0}, v{0.0};
    adamw_update(p, g, m, v, 1, 0.1, 0.9, 0.999, 1e-8, 0.5);
    CHECK(p[0] == doctest::Approx(2.0 * (1 - 0.1 * 0.5)));
  }
}

TEST_CASE("EMA and clipping") {
  std::vector<double> ema{1.0};
  ema_update(ema, {0.0}, 0.9);
  CHECK(ema[0] == doctest::Approx(0.9));
  ema_update(ema, {5.0}, 1.0);
  CHECK(ema[0] == doctest::Approx(0.9));

  std::vector<double> g{3, 4};
  CHECK(clip_gradients(g, 10) == doctest::Approx(5));
  CHECK(g == std::vector<double>{3, 4});
  g = {12, 16};
  CHECK(clip_gradients(g, 10) == doctest::Approx(20));
  CHECK(g[0] == doctest::Approx(6));
  CHECK(g[1] == doctest::Approx(8));
}

TEST_CASE("epoch batches") {
  auto b = epoch_batches(10, 4, 1, 0);
  REQUIRE(b.size() == 3);
  CHECK(b[0].size() == 4);
  CHECK(b[2].size() == 2);
  std::set<int> all;
  for (auto& batch : b)
    all.insert(batch.begin(), batch.end());
  CHECK(all.size() == 10);
  CHECK(epoch_batches(10, 4, 1, 0) == b);
  CHECK(epoch_batches(10, 4, 1, 1) != b);
}

TEST_CASE("checkpoint selection") {
  CHECK(select_checkpoint({}) == -1);
  auto rec = [](long step, double v) { return ValidationRecord{step, step, v, v, v}; };
  // best three: 0.9 (1), 0.8 (3), 0.8 (4) -> latest is index 4
  std::vector<ValidationRecord> r = {rec(1, 0.5), rec(2, 0.9), rec(3, 0.1), rec(4, 0.8),
                                     rec(5, 0.8), rec(6, 0.7)};
  CHECK(select_checkpoint(r) == 4);
  // ties at the cut favour later records
  r = {rec(1, 0.9), rec(2, 0.5), rec(3, 0.5), rec(4, 0.5), rec(5, 0.2)};
  CHECK(select_checkpoint(r) == 3);
  CHECK(select_checkpoint({rec(1, 0.3)}) == 0);
}

TEST_CASE("data statistics and model fitting") {
  DataStats s = compute_data_stats(toy_data());
  CHECK(s.num_atoms_freq.size() == 2);
  CHECK(s.num_atoms_freq.at(2) == doctest::Approx(0.5));
  CHECK(s.num_atoms_freq.at(5) == doctest::Approx(0.5));
  ModelConfig m = fit_model_config(tiny_model(), toy_data());
  CHECK(m.length_offset == doctest::Approx(3.95).epsilon(0.02));
  CHECK(m.length_scale == 0.5);
  ModelConfig small = tiny_model();
  small.max_atoms = 4;
  CHECK_THROWS(fit_model_config(small, toy_data()));
}

TEST_CASE("flow samples are reproducible per stream") {
  DataStats s = compute_data_stats(toy_data());
  auto r1 = sample_rng(5, 3, 1), r2 = sample_rng(5, 3, 1), r3 = sample_rng(5, 3, 2);
  FlowSample a = make_flow_sample(toy_data()[1], s.length_prior, 0.9, r1);
  FlowSample b = make_flow_sample(toy_data()[1], s.length_prior, 0.9, r2);
  FlowSample c = make_flow_sample(toy_data()[1], s.length_prior, 0.9, r3);
  CHECK(a.frac_s == b.frac_s);
  CHECK(a.time.t == b.time.t);
  CHECK(a.frac_s != c.frac_s);
  CHECK(a.time.t <= 0.9);
  CHECK(a.num_atoms() == 5);
}

TEST_CASE("loss weights gate the head gradients") {
  ModelParams p(tiny_model());
  std::mt19937_64 rng(2);
  randomize_params(p, rng, 0.2);
  DataStats s = compute_data_stats(toy_data());
  std::vector<OrderedCrystal> batch(toy_data().begin(), toy_data().begin() + 4);
  TrainConfig c = quick_config();
  c.loss_weights = {0, 0, 1, 0};
  GradientResult g = compute_gradients(p, batch, c, s.length_prior, 1);
  REQUIRE(g.finite);
  const ParamIds& id = p.ids();
  CHECK(norm_of(p, g.grads, id.head_atom_w) == 0);
  CHECK(norm_of(p, g.grads, id.head_frac_w) == 0);
  CHECK(norm_of(p, g.grads, id.head_ang_w) == 0);
  CHECK(norm_of(p, g.grads, id.head_len_w) > 0);
  CHECK(g.loss.total == doctest::Approx(g.loss.lengths));
  CHECK(g.loss.atoms > 0);
}

TEST_CASE("training steps") {
  DataStats s = compute_data_stats(toy_data());
  std::vector<OrderedCrystal> batch(toy_data().begin(), toy_data().begin() + 4);
  TrainConfig c = quick_config();

  SUBCASE("identical seeds give identical trajectories") {
    TrainState a = init_train_state(tiny_model(), 4), b = init_train_state(tiny_model(), 4);
    for (int i = 0; i < 3; ++i) {
      StepReport ra = training_step(a, batch, c, s.length_prior);
      StepReport rb = training_step(b, batch, c, s.length_prior);
      CHECK(ra.loss.total == rb.loss.total);
      CHECK_FALSE(ra.skipped);
    }
    CHECK(a.params.values() == b.params.values());
    CHECK(a.ema.values() == b.ema.values());
    CHECK(a.step == 3);
    CHECK(a.params.values() != a.ema.values());
  }
  SUBCASE("non-finite step is skipped") {
    TrainState st = init_train_state(tiny_model(), 4);
    st.params.tensor(st.params.ids().head_len_b)(0, 0) = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> before = st.adam_m;
    StepReport r = training_step(st, batch, c, s.length_prior);
    CHECK(r.skipped);
    CHECK(st.step == 1);
    CHECK(st.adam_m == before);
  }
}

TEST_CASE("train loop") {
  TrainConfig c = quick_config();
  ModelConfig m = fit_model_config(tiny_model(), toy_data());
  TrainResult full = train(toy_data(), c, m);
  CHECK(full.state.step == 6);
  CHECK(full.log.size() == 6);
  CHECK(full.log.back().epoch == 1);
  CHECK(full.selected == -1);
  CHECK(full.selected_params.values() == full.state.ema.values());

  SUBCASE("resume reproduces the uninterrupted run") {
    TrainConfig half = c;
    half.max_steps = 4;
    TrainResult first = train(toy_data(), half, m);
    TrainResult second = train(toy_data(), c, m, {}, first.state);
    CHECK(second.state.step == 6);
    CHECK(second.state.params.values() == full.state.params.values());
    CHECK(second.state.ema.values() == full.state.ema.values());
    CHECK(second.log.back().loss.total == full.log.back().loss.total);
  }
  SUBCASE("resuming with another model shape is refused") {
    TrainConfig half = c;
    half.max_steps = 2;
    TrainResult first = train(toy_data(), half, m);
    ModelConfig other = m;
    other.d_model = 16;
    CHECK_THROWS_AS(train(toy_data(), c, other, {}, first.state), UsageError);
  }
  SUBCASE("validation runs and selects a record") {
    TrainConfig v = c;
    v.validate_every = 1;
    v.validation_samples = 4;
    v.validation_steps = 5;
    int seen = 0;
    TrainHooks hooks;
    hooks.on_validation = [&](const ValidationRecord&) { ++seen; };
    TrainResult r = train(toy_data(), v, m, hooks);
    CHECK(seen == 2);
    CHECK(r.validations.size() == 2);
    CHECK(r.selected >= 0);
    for (const ValidationRecord& rec : r.validations) {
      CHECK(rec.validity <= rec.structural);
      CHECK(rec.validity <= rec.compositional);
    }
  }
  SUBCASE("repeated numeric failure aborts with the last good state") {
    TrainConfig bad = c;
    bad.max_skipped_steps = 2;
    TrainState st = init_train_state(m, c.seed);
    st.params.tensor(st.params.ids().head_len_b)(0, 0) = std::numeric_limits<double>::infinity();
    bool saved = false;
    TrainHooks hooks;
    hooks.on_checkpoint = [&](const TrainState&, long) { saved = true; };
    CHECK_THROWS_AS(train(toy_data(), bad, m, hooks, st), NumericFailure);
    CHECK(saved);
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(validate_train_config(c));
  c.batch_size = 0;
  CHECK_THROWS(validate_train_config(c));
  c = TrainConfig{};
  c.ema_decay = 1.5;
  CHECK_THROWS(validate_train_config(c));
}
