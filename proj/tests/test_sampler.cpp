#include <doctest.h>

#include <cmath>
#include <random>

#include "mcflow/elements.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/sampler.hpp"
#include "mcflow/symmetry.hpp"
#include "mcflow/torus.hpp"

using namespace mcflow;

namespace {

struct TinyModel {
  ModelParams params;
  SamplerContext ctx;

  TinyModel() {
    ModelConfig c;
    c.d_model = 8;
    c.n_layers = 1;
    c.n_heads = 2;
    c.mlp_ratio = 2;
    c.max_atoms = 6;
    c.time_features = 8;
    params = ModelParams(c);
    std::mt19937_64 rng(11);
    randomize_params(params, rng, 0.3);
    ctx.params = &params;
    ctx.length_prior = {Vec3::Constant(1.4), Vec3::Constant(0.1)};
    ctx.num_atoms_freq = {{2, 0.5}, {4, 0.5}};
  }
};

Crystal square_structure() {
  Crystal c;
  c.atom_types = {0, 0, 0};
  c.frac_coords = {Vec3(0.1, 0.2, 0.3), Vec3(0.6, 0.2, 0.3), Vec3(0.5, 0.5, 0.9)};
  c.lattice = {Vec3(4, 4.5, 5), Vec3(90, 95, 100)};
  return c;
}

} // namespace

TEST_CASE("task parsing and construction") {
  CHECK(parse_task("CSP") == TaskKind::CSP);
  CHECK(parse_task("dng") == TaskKind::DNG);
  CHECK(to_string(TaskKind::ATG) == "atg");
  CHECK_THROWS_AS(parse_task("foo"), UsageError);
  CHECK(Task::csp({8, 22, 8, 38, 8}).composition == std::vector<int>{38, 22, 8, 8, 8});
  CHECK(Task::atg(square_structure()).kind == TaskKind::ATG);
}

TEST_CASE("trajectories") {
  CHECK(trajectory(TaskKind::DNG, 0.3).t == 0.3);
  CHECK(trajectory(TaskKind::DNG, 0.3).s == 0.3);
  CHECK(trajectory(TaskKind::CSP, 0.3).t == 1.0);
  CHECK(trajectory(TaskKind::CSP, 0.3).s == 0.3);
  CHECK(trajectory(TaskKind::ATG, 0.3).t == 0.3);
  CHECK(trajectory(TaskKind::ATG, 0.3).s == 1.0);
}

TEST_CASE("guidance configuration") {
  GuidanceConfig g;
  CHECK(g.scale == 2.0);
  CHECK(g.noise == 0.1);
  CHECK_NOTHROW(validate_guidance(g));
  g.noise = 1.5;
  CHECK_THROWS(validate_guidance(g));
}

TEST_CASE("site count sampling") {
  std::mt19937_64 rng(1);
  CHECK(sample_num_atoms({{2, 1.0}}, rng) == 2);
  int twos = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    twos += sample_num_atoms({{2, 0.5}, {5, 0.5}}, rng) == 2;
  CHECK(twos / double(n) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("CTMC step") {
  std::mt19937_64 rng(2);
  RateVector rate = RateVector::Zero(1, kNumElements);
  rate(0, 7) = 2.0;
  int jumps = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    AtomTypeState next = ctmc_step({kMaskToken}, rate, 0.25, rng, false);
    if (next[0] != kMaskToken) {
      CHECK(next[0] == 7);
      ++jumps;
    }
  }
  CHECK(jumps / double(n) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(ctmc_step({kMaskToken}, rate, 0.6, rng, false)[0] == 7);

  SUBCASE("unmasked sites never move") {
    CHECK(ctmc_step({3}, rate, 1.0, rng, true)[0] == 3);
  }
  SUBCASE("negative rates count as zero") {
    RateVector r = rate;
    r(0, 9) = -5.0;
    for (int i = 0; i < 100; ++i)
      CHECK(ctmc_step({kMaskToken}, r, 1.0, rng, false)[0] == 7);
  }
  SUBCASE("final step with zero rates draws uniformly and warns") {
    int warnings = 0;
    AtomTypeState out = ctmc_step({kMaskToken, kMaskToken}, RateVector::Zero(2, kNumElements),
                                  0.01, rng, true, &warnings);
    CHECK(warnings == 2);
    CHECK(out[0] >= 0);
    CHECK(out[0] < kNumElements);
  }
}

TEST_CASE("ODE step") {
  StructureState x{{Vec3(0.95, 0.5, 0.1)}, Vec3(4, 4, 4), Vec3(90, 90, 90)};
  StructureVelocity zero{{Vec3::Zero()}, Vec3::Zero(), Vec3::Zero()};
  StructureState same = ode_step(x, zero, 0.1);
  CHECK(same.frac == x.frac);
  CHECK(same.lengths == x.lengths);
  StructureVelocity v{{Vec3(1, 0, 0)}, Vec3(-100, 0, 0), Vec3(500, -500, 0)};
  StructureState y = ode_step(x, v, 0.1);
  CHECK(y.frac[0][0] == doctest::Approx(0.05));
  CHECK(y.lengths[0] == 1e-3);
  CHECK(y.angles[0] == 120);
  CHECK(y.angles[1] == 60);
}

TEST_CASE("generation honours the condition") {
  TinyModel m;
  SUBCASE("DNG returns a valid-shaped crystal") {
    std::mt19937_64 rng(3);
    SampleTrace trace;
    Crystal c = generate(Task::dng(), m.ctx, 20, rng, &trace);
    CHECK((c.num_atoms() == 2 || c.num_atoms() == 4));
    CHECK(trace.times.size() == 20);
    CHECK(trace.times[0].t == 0.0);
    CHECK(trace.times[19].s == doctest::Approx(0.95));
    for (int z : c.atom_types)
      CHECK(is_supported_element(z));
    for (const Vec3& f : c.frac_coords)
      CHECK((f.minCoeff() >= 0 && f.maxCoeff() < 1));
  }
  SUBCASE("CSP keeps the composition") {
    for (int seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(seed);
      Task task = Task::csp({8, 22, 38, 8, 8});
      Crystal c = generate(task, m.ctx, 10, rng);
      CHECK(c.atom_types == task.composition);
    }
  }
  SUBCASE("ATG keeps the structure") {
    Crystal s = square_structure();
    for (int seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(seed);
      Crystal c = generate(Task::atg(s), m.ctx, 10, rng);
      CHECK(c.frac_coords == s.frac_coords);
      CHECK(c.lattice == s.lattice);
      CHECK(c.num_atoms() == 3);
    }
  }
  SUBCASE("same seed, same crystal") {
    std::mt19937_64 r1(9), r2(9);
    CHECK(generate(Task::dng(), m.ctx, 15, r1) == generate(Task::dng(), m.ctx, 15, r2));
  }
}

TEST_CASE("guidance at scale one is the unguided sampler") {
  TinyModel m;
  GuidanceConfig g;
  g.enabled = true;
  g.scale = 1.0;
  for (int seed = 0; seed < 3; ++seed) {
    std::mt19937_64 r1(seed), r2(seed);
    Task csp = Task::csp({11, 17, 11, 17});
    CHECK(guided_generate(csp, m.ctx, 12, g, r1) == generate(csp, m.ctx, 12, r2));
    std::mt19937_64 r3(seed), r4(seed);
    Task atg = Task::atg(square_structure());
    CHECK(guided_generate(atg, m.ctx, 12, g, r3) == generate(atg, m.ctx, 12, r4));
  }
  SUBCASE("other scales differ but keep the condition") {
    g.scale = 2.0;
    std::mt19937_64 r1(1), r2(1);
    Task csp = Task::csp({11, 17, 11, 17});
    Crystal a = guided_generate(csp, m.ctx, 12, g, r1);
    Crystal b = generate(csp, m.ctx, 12, r2);
    CHECK(a.atom_types == b.atom_types);
    CHECK(a.frac_coords != b.frac_coords);
  }
}
