// Run configuration: `key = value` text with `#` comments. Precedence is
// defaults < config file < command-line flags.
#ifndef MCFLOW_CONFIG_HPP_
#define MCFLOW_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

#include "mcflow/model.hpp"
#include "mcflow/sampler.hpp"
#include "mcflow/trainer.hpp"

namespace mcflow {

struct SampleConfig {
  TaskKind task = TaskKind::DNG;
  int steps = 500;
  int num_samples = 1;
  bool use_ema = true;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  GuidanceConfig guidance;
  SampleConfig sample;
  double orbit_tol = kDefaultOrbitTolerance;
  int toy_count = 400;
};

// Ordered key -> value pairs. Throws ParseError with the line number.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

// Throws UsageError for unknown keys or unparsable values.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);
void apply_config_text(RunConfig& config, const std::string& text);
RunConfig load_config_file(const std::string& path, RunConfig base = {});

// Every key, one per line, in a fixed order; doubles with 17 significant
// digits so that parsing the text reproduces the config exactly.
std::string format_config(const RunConfig& config);
std::vector<std::string> config_keys();

} // namespace mcflow
#endif
