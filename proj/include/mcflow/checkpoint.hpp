// Binary checkpoint container. Layout, all integers little-endian:
//   "MCFL" | u32 version | u32 entry count | entries
//   entry: u32 name length | name | u32 kind (0 tensor, 1 text) | payload
//   tensor payload: u32 rank | u32 dims[rank] | f64 values (row-major)
//   text payload:   u32 byte length | bytes
#ifndef MCFLOW_CHECKPOINT_HPP_
#define MCFLOW_CHECKPOINT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcflow/config.hpp"
#include "mcflow/trainer.hpp"

namespace mcflow {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  bool is_text = false;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
  std::string text;
};

class Checkpoint {
public:
  void add_tensor(std::string name, std::vector<std::uint32_t> dims, std::vector<double> values);
  void add_text(std::string name, std::string text);
  bool has(const std::string& name) const;
  // Throws InvalidData when absent.
  const CheckpointEntry& get(const std::string& name) const;
  const std::vector<CheckpointEntry>& entries() const { return entries_; }

private:
  std::vector<CheckpointEntry> entries_;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws ParseError on a truncated or foreign file.
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Everything needed to resume training or to sample.
struct TrainingSnapshot {
  RunConfig config;
  TrainState state;
  DataStats stats;
  std::uint64_t dataset_fingerprint = 0;
  // Weights picked by checkpoint selection, when present.
  std::optional<ModelParams> selected;
};

Checkpoint pack_snapshot(const TrainingSnapshot& snap);
// Rebuilds the model from the stored config and checks every tensor shape.
TrainingSnapshot unpack_snapshot(const Checkpoint& ckpt);

std::string format_data_stats(const DataStats& stats);
DataStats parse_data_stats(const std::string& text);

} // namespace mcflow
#endif
