// mcflow command-line entry point.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcflow/commands.hpp"
#include "mcflow/errors.hpp"

using namespace mcflow;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> task;
  std::optional<int> steps;
  std::optional<int> num_samples;
  std::optional<double> guidance_scale;
  std::optional<double> noise_level;
  std::optional<double> orbit_tol;
  std::optional<int> count;
  std::vector<std::string> set;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--set", f.set, "config override key=value (repeatable)");
}

// defaults < config file < --set < dedicated flags
RunConfig resolve(const Flags& f) {
  RunConfig c;
  if (!f.config.empty())
    c = load_config_file(f.config, c);
  for (const std::string& kv : f.set) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw UsageError("--set expects key=value, got '" + kv + "'");
    apply_config_entry(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed)
    c.train.seed = *f.seed;
  if (f.task)
    c.sample.task = parse_task(*f.task);
  if (f.steps)
    c.sample.steps = *f.steps;
  if (f.num_samples)
    c.sample.num_samples = *f.num_samples;
  if (f.guidance_scale) {
    c.guidance.scale = *f.guidance_scale;
    c.guidance.enabled = true;
  }
  if (f.noise_level) {
    c.guidance.noise = *f.noise_level;
    c.guidance.enabled = true;
  }
  if (f.orbit_tol)
    c.orbit_tol = *f.orbit_tol;
  if (f.count)
    c.toy_count = *f.count;
  return c;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal flow matching for periodic crystals"};
  app.require_subcommand(1);
  Flags f;
  std::string out, data, checkpoint, predictions, targets;
  std::optional<std::string> condition_file, resume, inspect_out;

  CLI::App* toy = app.add_subcommand("make-toy-dataset", "write the synthetic two-prototype corpus");
  add_common(toy, f);
  toy->add_option("--count", f.count, "number of crystals (default 400)");
  toy->add_option("--out", out, "output dataset")->required();

  CLI::App* tr = app.add_subcommand("train", "train a model");
  add_common(tr, f);
  tr->add_option("--data", data, "training dataset")->required();
  tr->add_option("--out", out, "output directory")->required();
  tr->add_option("--resume", resume, "checkpoint to resume from");
  tr->add_option("--orbit-tol", f.orbit_tol, "orbit matching tolerance");

  CLI::App* sm = app.add_subcommand("sample", "generate crystals");
  add_common(sm, f);
  sm->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  sm->add_option("--task", f.task, "dng, csp or atg");
  sm->add_option("--steps", f.steps, "integration steps (default 500)");
  sm->add_option("--num-samples", f.num_samples, "samples per condition");
  sm->add_option("--guidance-scale", f.guidance_scale, "noisy guidance scale (enables guidance)");
  sm->add_option("--noise-level", f.noise_level, "noisy guidance noise level (enables guidance)");
  sm->add_option("--condition-file", condition_file, "CSP/ATG conditions");
  sm->add_option("--out", out, "output records")->required();

  CLI::App* ev = app.add_subcommand("evaluate", "score generated crystals");
  add_common(ev, f);
  ev->add_option("--task", f.task, "dng, csp or atg");
  ev->add_option("--predictions", predictions, "generated records")->required();
  ev->add_option("--targets", targets, "targets (CSP/ATG) or reference set (DNG)")->required();
  ev->add_option("--out", out, "report CSV")->required();

  CLI::App* in = app.add_subcommand("inspect", "orbit structure and permutation-space sizes");
  add_common(in, f);
  in->add_option("--data", data, "dataset")->required();
  in->add_option("--orbit-tol", f.orbit_tol, "orbit matching tolerance");
  in->add_option("--out", inspect_out, "CSV output (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = resolve(f);
    if (*toy)
      return run_make_toy_dataset(config, out);
    if (*tr)
      return run_train(config, {data, out, resume}, std::cerr);
    if (*sm)
      return run_sample(config, {checkpoint, condition_file, out}, std::cerr);
    if (*ev)
      return run_evaluate(config, {predictions, targets, out}, std::cerr);
    if (*in)
      return run_inspect(config, data, inspect_out, std::cerr);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
