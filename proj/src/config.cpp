#include "mcflow/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "mcflow/errors.hpp"

namespace mcflow {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw UsageError("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw UsageError("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1")
    return true;
  if (v == "false" || v == "0")
    return false;
  throw UsageError("config key '" + key + "': '" + v + "' is not a boolean");
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename Getter>
Key real_key(std::string name, Getter ref) {
  std::string n = name;
  return {name, [ref](RunConfig c) { return fmt_double(ref(c)); },
          [ref, n](RunConfig& c, const std::string& v) { ref(c) = to_double(n, v); }};
}

template <typename Int, typename Getter>
Key int_key(std::string name, Getter ref) {
  std::string n = name;
  return {name, [ref](RunConfig c) { return std::to_string(ref(c)); },
          [ref, n](RunConfig& c, const std::string& v) { ref(c) = to_int<Int>(n, v); }};
}

template <typename Getter>
Key bool_key(std::string name, Getter ref) {
  std::string n = name;
  return {name, [ref](RunConfig c) -> std::string {
            return ref(c) ? "true" : "false";
          },
          [ref, n](RunConfig& c, const std::string& v) { ref(c) = to_bool(n, v); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(int_key<int>("d_model", [](RunConfig& c) -> int& { return c.model.d_model; }));
    k.push_back(int_key<int>("n_layers", [](RunConfig& c) -> int& { return c.model.n_layers; }));
    k.push_back(int_key<int>("n_heads", [](RunConfig& c) -> int& { return c.model.n_heads; }));
    k.push_back(int_key<int>("mlp_ratio", [](RunConfig& c) -> int& { return c.model.mlp_ratio; }));
    k.push_back(int_key<int>("max_atoms", [](RunConfig& c) -> int& { return c.model.max_atoms; }));
    k.push_back(int_key<int>("time_features", [](RunConfig& c) -> int& { return c.model.time_features; }));
    k.push_back({"time_clip", [](const RunConfig& c) { return fmt_double(c.train.time_clip); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.time_clip = c.model.time_clip = to_double("time_clip", v);
                 }});
    k.push_back(real_key("time_scale", [](RunConfig& c) -> double& { return c.model.time_scale; }));
    k.push_back(real_key("length_offset", [](RunConfig& c) -> double& { return c.model.length_offset; }));
    k.push_back(real_key("length_scale", [](RunConfig& c) -> double& { return c.model.length_scale; }));
    k.push_back(real_key("learning_rate", [](RunConfig& c) -> double& { return c.train.learning_rate; }));
    k.push_back(real_key("weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; }));
    k.push_back(real_key("beta1", [](RunConfig& c) -> double& { return c.train.beta1; }));
    k.push_back(real_key("beta2", [](RunConfig& c) -> double& { return c.train.beta2; }));
    k.push_back(real_key("adam_eps", [](RunConfig& c) -> double& { return c.train.adam_eps; }));
    k.push_back(int_key<int>("batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; }));
    k.push_back(int_key<int>("max_epochs", [](RunConfig& c) -> int& { return c.train.max_epochs; }));
    k.push_back(int_key<long>("max_steps", [](RunConfig& c) -> long& { return c.train.max_steps; }));
    k.push_back(real_key("grad_clip", [](RunConfig& c) -> double& { return c.train.grad_clip; }));
    k.push_back(real_key("ema_decay", [](RunConfig& c) -> double& { return c.train.ema_decay; }));
    k.push_back(real_key("loss_weight_atoms", [](RunConfig& c) -> double& { return c.train.loss_weights.atoms; }));
    k.push_back(real_key("loss_weight_frac", [](RunConfig& c) -> double& { return c.train.loss_weights.frac; }));
    k.push_back(real_key("loss_weight_lengths", [](RunConfig& c) -> double& { return c.train.loss_weights.lengths; }));
    k.push_back(real_key("loss_weight_angles", [](RunConfig& c) -> double& { return c.train.loss_weights.angles; }));
    k.push_back(int_key<std::uint64_t>("seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }));
    k.push_back(int_key<int>("validate_every", [](RunConfig& c) -> int& { return c.train.validate_every; }));
    k.push_back(int_key<int>("validation_samples", [](RunConfig& c) -> int& { return c.train.validation_samples; }));
    k.push_back(int_key<int>("validation_steps", [](RunConfig& c) -> int& { return c.train.validation_steps; }));
    k.push_back(bool_key("validate_with_ema", [](RunConfig& c) -> bool& { return c.train.validate_with_ema; }));
    k.push_back(int_key<int>("checkpoint_every", [](RunConfig& c) -> int& { return c.train.checkpoint_every; }));
    k.push_back(int_key<int>("max_skipped_steps", [](RunConfig& c) -> int& { return c.train.max_skipped_steps; }));
    k.push_back(bool_key("guidance_enabled", [](RunConfig& c) -> bool& { return c.guidance.enabled; }));
    k.push_back(real_key("guidance_scale", [](RunConfig& c) -> double& { return c.guidance.scale; }));
    k.push_back(real_key("noise_level", [](RunConfig& c) -> double& { return c.guidance.noise; }));
    k.push_back({"atg_guidance_mode",
                 [](const RunConfig& c) -> std::string {
                   return c.guidance.atg_mode == AtgGuidanceMode::Rate ? "rate" : "logit";
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "rate")
                     c.guidance.atg_mode = AtgGuidanceMode::Rate;
                   else if (v == "logit")
                     c.guidance.atg_mode = AtgGuidanceMode::Logit;
                   else
                     throw UsageError("atg_guidance_mode must be 'rate' or 'logit'");
                 }});
    k.push_back({"task", [](const RunConfig& c) { return to_string(c.sample.task); },
                 [](RunConfig& c, const std::string& v) { c.sample.task = parse_task(v); }});
    k.push_back(int_key<int>("steps", [](RunConfig& c) -> int& { return c.sample.steps; }));
    k.push_back(int_key<int>("num_samples", [](RunConfig& c) -> int& { return c.sample.num_samples; }));
    k.push_back(bool_key("sample_with_ema", [](RunConfig& c) -> bool& { return c.sample.use_ema; }));
    k.push_back(real_key("orbit_tol", [](RunConfig& c) -> double& { return c.orbit_tol; }));
    k.push_back(int_key<int>("toy_count", [](RunConfig& c) -> int& { return c.toy_count; }));
    return k;
  }();
  return table;
}

} // namespace

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty())
      continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError("config line " + std::to_string(lineno) + ": empty key or value");
    out.emplace_back(key, value);
  }
  return out;
}

void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Key& k : keys())
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  throw UsageError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& config, const std::string& text) {
  for (const auto& [k, v] : parse_config_text(text))
    apply_config_entry(config, k, v);
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in)
    throw UsageError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str());
  return base;
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const Key& k : keys())
    out += k.name + " = " + k.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key& k : keys())
    out.push_back(k.name);
  return out;
}

} // namespace mcflow
