#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mcflow/errors.hpp"
#include "mcflow/model.hpp"

using namespace mcflow;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.mlp_ratio = 2;
  c.max_atoms = 6;
  c.time_features = 8;
  return c;
}

ModelInput random_input(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> cat(0, 20);
  ModelInput in;
  for (int i = 0; i < n; ++i) {
    in.atoms.push_back(i % 2 ? kMaskToken : cat(rng));
    in.frac.push_back(Vec3(u(rng), u(rng), u(rng)));
  }
  in.lengths = Vec3(3 + u(rng), 4 + u(rng), 5 + u(rng));
  in.angles = Vec3(80 + 20 * u(rng), 90, 100);
  in.time = {0.8 * u(rng), 0.8 * u(rng)};
  return in;
}

double scalar_loss(const HeadOutputs& h, const HeadOutputs& w) {
  return (h.logits.array() * w.logits.array()).sum() + (h.frac.array() * w.frac.array()).sum() +
         h.lengths.dot(w.lengths) + h.angles.dot(w.angles);
}

} // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(validate_model_config(ModelConfig{}));
  ModelConfig c = tiny_config();
  c.n_heads = 3;
  CHECK_THROWS_AS(validate_model_config(c), InvalidData);
  c = tiny_config();
  c.time_features = 7;
  CHECK_THROWS_AS(validate_model_config(c), InvalidData);
}

TEST_CASE("time features") {
  ModelConfig c = tiny_config();
  Eigen::RowVectorXd f0 = time_features(0.0, c);
  REQUIRE(f0.size() == 8);
  CHECK(f0.head(4).sum() == 4);
  CHECK(f0.tail(4).norm() == 0);
  Eigen::RowVectorXd f = time_features(0.3, c);
  CHECK(f[0] == doctest::Approx(std::cos(300.0)));
  CHECK(f[4] == doctest::Approx(std::sin(300.0)));
  CHECK(f[1] == doctest::Approx(std::cos(300.0 * std::pow(10000.0, -0.25))));
}

TEST_CASE("fresh parameters give zero logits and coordinates, current lattice") {
  ModelParams p(tiny_config());
  std::mt19937_64 rng(1);
  initialize_params(p, rng);
  ModelInput in = random_input(4, rng);
  ForwardPass f = forward(p, in);
  CHECK(f.out.logits.rows() == 4);
  CHECK(f.out.logits.norm() == 0);
  CHECK(f.out.frac.norm() == 0);
  CHECK((f.out.lengths - in.lengths).norm() < 1e-12);
  CHECK((f.out.angles - in.angles).norm() < 1e-12);
  for (double v : p.values())
    CHECK(std::abs(v) <= 0.04);
  CHECK(p.layout().find("embed.atom") >= 0);
  CHECK(p.layout().find("nope") == -1);
}

TEST_CASE("network time is clamped to the clip") {
  ModelParams p(tiny_config());
  std::mt19937_64 rng(2);
  randomize_params(p, rng, 0.3);
  ModelInput in = random_input(3, rng);
  in.time = {0.9, 0.95};
  ForwardPass a = forward(p, in);
  in.time = {0.99, 0.9};
  ForwardPass b = forward(p, in);
  CHECK((a.out.logits - b.out.logits).norm() == 0);
  in.time = {0.5, 0.9};
  ForwardPass c = forward(p, in);
  CHECK((a.out.logits - c.out.logits).norm() > 0);
}

TEST_CASE("errors") {
  ModelParams p(tiny_config());
  std::mt19937_64 rng(3);
  randomize_params(p, rng, 0.3);
  CHECK_THROWS_AS(forward(p, random_input(7, rng)), SequenceLength);
  p.tensor(p.ids().atom_emb)(0, 0) = std::numeric_limits<double>::quiet_NaN();
  ModelInput in = random_input(2, rng);
  in.atoms[0] = 0;
  try {
    forward(p, in);
    FAIL("expected NumericFailure");
  } catch (const NumericFailure& e) {
    CHECK(e.layer == -1);
  }
}

TEST_CASE("padding does not change real-site outputs or gradients") {
  ModelParams p(tiny_config());
  std::mt19937_64 rng(4);
  randomize_params(p, rng, 0.3);
  std::vector<ModelInput> inputs = {random_input(2, rng), random_input(5, rng),
                                    random_input(3, rng)};
  BatchInput batch = make_batch(inputs);
  CHECK(batch.max_atoms() == 5);
  CHECK(batch.mask[0] == std::vector<bool>{true, true, false, false, false});
  CHECK(batch.atoms[0][3] == kPadToken);
  BatchOutput out = forward(batch, p);

  std::vector<HeadOutputs> adj;
  std::vector<double> expected(p.num_parameters(), 0.0);
  for (size_t b = 0; b < inputs.size(); ++b) {
    ModelInput entry = batch_entry(batch, static_cast<int>(b));
    CHECK(entry.atoms == inputs[b].atoms);
    ForwardPass single = forward(p, inputs[b]);
    int n = inputs[b].num_atoms();
    CHECK((out.heads[b].logits.topRows(n) - single.out.logits).norm() < 1e-12);
    CHECK((out.heads[b].frac.topRows(n) - single.out.frac).norm() < 1e-12);
    CHECK(out.heads[b].logits.bottomRows(5 - n).norm() == 0);
    CHECK((out.heads[b].lengths - single.out.lengths).norm() < 1e-12);

    HeadOutputs a = HeadOutputs::zeros(5);
    a.logits.setRandom();
    a.frac.setRandom();
    a.lengths.setRandom();
    a.angles.setRandom();
    HeadOutputs real = HeadOutputs::zeros(n);
    real.logits = a.logits.topRows(n);
    real.frac = a.frac.topRows(n);
    real.lengths = a.lengths;
    real.angles = a.angles;
    backward(p, inputs[b], single, real, expected);
    adj.push_back(a);
  }
  std::vector<double> got = backward(batch, p, adj);
  REQUIRE(got.size() == expected.size());
  double diff = 0, norm = 0;
  for (size_t i = 0; i < got.size(); ++i) {
    diff = std::max(diff, std::abs(got[i] - expected[i]));
    norm = std::max(norm, std::abs(expected[i]));
  }
  CHECK(norm > 0);
  CHECK(diff <= 1e-12 * std::max(1.0, norm));
}

TEST_CASE("backward agrees with finite differences on sampled entries") {
  ModelParams p(tiny_config());
  std::mt19937_64 rng(5);
  randomize_params(p, rng, 0.3);
  ModelInput in = random_input(4, rng);
  ForwardPass f = forward(p, in);
  HeadOutputs w = HeadOutputs::zeros(4);
  w.logits.setRandom();
  w.frac.setRandom();
  w.lengths.setRandom();
  w.angles.setRandom();
  std::vector<double> grads(p.num_parameters(), 0.0);
  backward(p, in, f, w, grads);

  std::uniform_int_distribution<size_t> pick(0, p.num_parameters() - 1);
  const double h = 1e-5;
  for (int trial = 0; trial < 60; ++trial) {
    size_t i = pick(rng);
    double keep = p.values()[i];
    p.values()[i] = keep + h;
    double up = scalar_loss(forward(p, in).out, w);
    p.values()[i] = keep - h;
    double down = scalar_loss(forward(p, in).out, w);
    p.values()[i] = keep;
    double fd = (up - down) / (2 * h);
    CHECK(grads[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-7));
  }
}
