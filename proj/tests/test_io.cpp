#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcflow/checkpoint.hpp"
#include "mcflow/commands.hpp"
#include "mcflow/config.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/records.hpp"
#include "mcflow/toy.hpp"

using namespace mcflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "mcflow_unit";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

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

} // namespace

TEST_CASE("dataset records") {
  DatasetRecord r = perovskite_prototype();
  r.crystal.frac_coords[1] = Vec3(0.1 + 0.2, 1.0 / 3.0, 0.7);
  SUBCASE("round trip is field-identical") {
    DatasetRecord back = parse_record(format_record(r));
    CHECK(back == r);
  }
  SUBCASE("coordinate 1.0 names the site") {
    DatasetRecord bad = r;
    bad.crystal.frac_coords[2][0] = 1.0;
    try {
      validate_record(bad, Validation::Strict);
      FAIL("expected InvalidData");
    } catch (const InvalidData& e) {
      CHECK(std::string(e.what()).find("site 2") != std::string::npos);
    }
  }
  SUBCASE("malformed json") {
    CHECK_THROWS_AS(parse_record("{not json"), ParseError);
    CHECK_THROWS_AS(parse_record("{\"id\": 3}"), ParseError);
  }
  SUBCASE("relaxed mode accepts bare structures") {
    DatasetRecord bare;
    bare.id = "x";
    bare.crystal = r.crystal;
    bare.crystal.atom_types = {0, 0, 0, 0, 0};
    CHECK_THROWS(validate_record(bare, Validation::Strict));
    CHECK_NOTHROW(validate_record(bare, Validation::Relaxed));
  }
  SUBCASE("load and fingerprint") {
    std::vector<DatasetRecord> two = {rock_salt_prototype(), perovskite_prototype()};
    fs::path p = scratch("two.jsonl");
    write_dataset(p.string(), two);
    LoadReport rep = load_dataset(p.string());
    CHECK(rep.records.size() == 2);
    CHECK(rep.failures.empty());
    CHECK(rep.records == two);
    CHECK(dataset_fingerprint(rep.records) == dataset_fingerprint(two));
    std::vector<DatasetRecord> swapped = {two[1], two[0]};
    CHECK(dataset_fingerprint(swapped) != dataset_fingerprint(two));
  }
  SUBCASE("too many bad lines abort the load") {
    fs::path p = scratch("bad.jsonl");
    {
      std::ofstream out(p);
      out << format_record(rock_salt_prototype()) << "\n{broken\n";
    }
    CHECK_THROWS_AS(load_dataset(p.string()), InvalidData);
  }
}

TEST_CASE("config text") {
  RunConfig c;
  apply_config_text(c, "# comment\nlearning_rate = 0.002\nd_model=32\n\ntask = csp\n");
  CHECK(c.train.learning_rate == 0.002);
  CHECK(c.model.d_model == 32);
  CHECK(c.sample.task == TaskKind::CSP);
  CHECK_THROWS_AS(apply_config_entry(c, "no_such_key", "1"), UsageError);
  CHECK_THROWS_AS(apply_config_entry(c, "batch_size", "many"), UsageError);
  CHECK_THROWS_AS(parse_config_text("line without equals"), ParseError);

  SUBCASE("defaults") {
    RunConfig d;
    CHECK(d.guidance.scale == 2.0);
    CHECK(d.guidance.noise == 0.1);
    CHECK(d.train.time_clip == 0.9);
    CHECK(d.train.loss_weights.frac == 2.0);
  }
  SUBCASE("format then parse reproduces the config") {
    c.train.ema_decay = 0.1 + 0.2;
    c.guidance.atg_mode = AtgGuidanceMode::Logit;
    RunConfig back;
    apply_config_text(back, format_config(c));
    CHECK(format_config(back) == format_config(c));
    CHECK(back.train.ema_decay == c.train.ema_decay);
    CHECK(back.guidance.atg_mode == AtgGuidanceMode::Logit);
    CHECK(config_keys().size() == parse_config_text(format_config(c)).size());
  }
}

TEST_CASE("checkpoints") {
  SUBCASE("container round trip") {
    Checkpoint c;
    c.add_tensor("w", {2, 2}, {1.0, -0.5, 1e-300, 3.0});
    c.add_text("note", "hello");
    Checkpoint back = decode_checkpoint(encode_checkpoint(c));
    CHECK(back.get("w").values == c.get("w").values);
    CHECK(back.get("note").text == "hello");
    CHECK_FALSE(back.has("missing"));
    CHECK_THROWS_AS(back.get("missing"), InvalidData);
    std::string bytes = encode_checkpoint(c);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ParseError);
    CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), ParseError);
  }
  SUBCASE("save, load, save is byte-identical") {
    RunConfig rc;
    rc.model = tiny_model();
    TrainingSnapshot snap;
    snap.config = rc;
    snap.state = init_train_state(rc.model, 3);
    snap.state.step = 7;
    snap.state.rng.discard(5);
    snap.stats.length_prior = {Vec3(1, 1.1, 1.2), Vec3(0.1, 0.2, 0.3)};
    snap.stats.num_atoms_freq = {{2, 0.25}, {5, 0.75}};
    snap.dataset_fingerprint = 0xdeadbeefcafe;
    snap.selected = snap.state.ema;
    fs::path a = scratch("a.ckpt"), b = scratch("b.ckpt");
    save_checkpoint(a.string(), pack_snapshot(snap));
    TrainingSnapshot back = unpack_snapshot(load_checkpoint(a.string()));
    save_checkpoint(b.string(), pack_snapshot(back));
    CHECK(slurp(a) == slurp(b));
    CHECK(back.state.step == 7);
    CHECK(back.state.rng == snap.state.rng);
    CHECK(back.state.params.values() == snap.state.params.values());
    CHECK(back.stats.num_atoms_freq == snap.stats.num_atoms_freq);
    CHECK(back.dataset_fingerprint == snap.dataset_fingerprint);
    REQUIRE(back.selected);
  }
  SUBCASE("shape mismatch is a usage error") {
    RunConfig rc;
    rc.model = tiny_model();
    TrainingSnapshot snap;
    snap.config = rc;
    snap.state = init_train_state(rc.model, 3);
    Checkpoint ck = pack_snapshot(snap);
    RunConfig other = rc;
    other.model.d_model = 16;
    Checkpoint bad;
    for (const CheckpointEntry& e : ck.entries()) {
      if (e.is_text)
        bad.add_text(e.name, e.name == "config" ? format_config(other) : e.text);
      else
        bad.add_tensor(e.name, e.dims, e.values);
    }
    CHECK_THROWS_AS(unpack_snapshot(bad), UsageError);
  }
}

TEST_CASE("commands") {
  SUBCASE("csp sampling without a condition file") {
    RunConfig rc;
    rc.sample.task = TaskKind::CSP;
    std::ostringstream log;
    CHECK_THROWS_AS(run_sample(rc, {"unused.ckpt", std::nullopt, "out.jsonl"}, log), UsageError);
  }
  SUBCASE("evaluating targets against themselves") {
    std::vector<DatasetRecord> t = {rock_salt_prototype(), perovskite_prototype()};
    t[0].id = "NaCl";
    t[1].id = "SrTiO3";
    std::vector<DatasetRecord> p = t;
    p[0].id = "NaCl/0";
    p[1].id = "SrTiO3/0";
    std::vector<std::string> verdicts;
    auto rows = evaluate_records(TaskKind::CSP, p, t, &verdicts);
    std::map<std::string, double> m;
    for (const ReportRow& r : rows)
      m[r.metric] = r.value;
    CHECK(m.at("match_rate") == 100.0);
    CHECK(m.at("rmse") == doctest::Approx(0).scale(1e-9));
    CHECK(verdicts.size() == 2);
    CHECK(verdicts[0].find("\"matched\":true") != std::string::npos);

    auto dng = evaluate_records(TaskKind::DNG, p, t);
    for (const ReportRow& r : dng) {
      if (r.metric == "structural_validity" || r.metric == "compositional_validity")
        CHECK(r.value == 100.0);
      if (r.metric == "d_elem")
        CHECK(r.value == 0.0);
    }
  }
  SUBCASE("inspect") {
    auto rows = inspect_records({perovskite_prototype()}, kDefaultOrbitTolerance);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].num_sites == 5);
    CHECK(rows[0].ordering == "Sr Ti O O O");
    CHECK(rows[0].orbits == "Sr:a[1] Ti:b[1] O:c[3]");
    CHECK(rows[0].log10_full == doctest::Approx(std::log10(120.0)));
    CHECK(rows[0].log10_reduced == doctest::Approx(std::log10(6.0)));
    std::ostringstream csv;
    write_inspect_csv(csv, rows);
    CHECK(csv.str().rfind("id,num_sites,log10_full,log10_reduced,ordering,orbits\n", 0) == 0);
  }
}
