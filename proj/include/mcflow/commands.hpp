// Command implementations behind the `mcflow` executable. Each returns a
// process exit status; usage problems surface as UsageError.
#ifndef MCFLOW_COMMANDS_HPP_
#define MCFLOW_COMMANDS_HPP_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcflow/checkpoint.hpp"
#include "mcflow/config.hpp"
#include "mcflow/metrics.hpp"
#include "mcflow/records.hpp"

namespace mcflow {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

int run_make_toy_dataset(const RunConfig& config, const std::string& out_path);

struct TrainPaths {
  std::string dataset;
  std::string out_dir;
  std::optional<std::string> resume;
};

// Writes <out>/last.ckpt at the checkpoint cadence, <out>/final.ckpt with the
// selected weights, <out>/metrics.csv and <out>/validation.csv.
int run_train(const RunConfig& config, const TrainPaths& paths, std::ostream& log);

struct SamplePaths {
  std::string checkpoint;
  std::optional<std::string> condition_file;
  std::string out;
};

// Generated crystals as records with empty symmetry fields; ids are
// "<condition id>/<k>" (or "dng/<k>").
int run_sample(const RunConfig& config, const SamplePaths& paths, std::ostream& log);

// Inference weights stored in a snapshot: the selected record when present,
// otherwise EMA or raw weights per `use_ema`.
const ModelParams& sampling_params(const TrainingSnapshot& snap, bool use_ema);

struct EvaluatePaths {
  std::string predictions;
  std::string targets;  // CSP/ATG targets or DNG reference set
  std::string out;      // report CSV; verdicts go to <out>.jsonl
};

struct ReportRow {
  std::string metric;
  double value;
};

// Candidates are grouped onto targets by the id prefix before '/'.
std::vector<ReportRow> evaluate_records(TaskKind task, const std::vector<DatasetRecord>& predictions,
                                        const std::vector<DatasetRecord>& targets,
                                        std::vector<std::string>* verdicts = nullptr,
                                        const MatchTolerances& tol = {});

int run_evaluate(const RunConfig& config, const EvaluatePaths& paths, std::ostream& log);

struct InspectRow {
  std::string id;
  int num_sites = 0;
  std::string ordering;   // element symbols in canonical order
  std::string orbits;     // e.g. "Na:a[1] Cl:b[1]"
  double log10_full = 0;
  double log10_reduced = 0;
};

std::vector<InspectRow> inspect_records(const std::vector<DatasetRecord>& records, double orbit_tol);
// CSV: id,num_sites,log10_full,log10_reduced,ordering,orbits
void write_inspect_csv(std::ostream& out, const std::vector<InspectRow>& rows);

int run_inspect(const RunConfig& config, const std::string& dataset,
                const std::optional<std::string>& out, std::ostream& log);

} // namespace mcflow
#endif
