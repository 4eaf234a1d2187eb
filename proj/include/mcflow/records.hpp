// Line-delimited JSON dataset records: one crystal per line with its
// symmetry labels.
#ifndef MCFLOW_RECORDS_HPP_
#define MCFLOW_RECORDS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mcflow/crystal.hpp"
#include "mcflow/symmetry.hpp"

namespace mcflow {

struct DatasetRecord {
  std::string id;
  Crystal crystal;
  int spacegroup_number = 1;
  std::vector<SymmetryOp> symmetry_ops;
  std::vector<char> wyckoff_letters;

  bool operator==(const DatasetRecord&) const = default;
};

// Strict: full training record. Relaxed: symmetry fields may be empty (then
// the space group is not checked) and atomic number 0 is accepted as a
// placeholder for ATG conditions.
enum class Validation { Strict, Relaxed };

// Throws InvalidData / InvalidLattice / UnsupportedElement naming the field.
void validate_record(const DatasetRecord& r, Validation mode);

// Throws ParseError for malformed JSON or missing / mistyped fields.
DatasetRecord parse_record(const std::string& line);
std::string format_record(const DatasetRecord& r);

inline constexpr double kMaxFailureFraction = 0.01;

struct LoadReport {
  std::vector<DatasetRecord> records;
  std::vector<std::string> failures;  // "line N: message"
};

// Skips and reports invalid lines; throws InvalidData listing them when more
// than 1% of the records fail. Blank lines are ignored.
LoadReport load_dataset(const std::string& path, Validation mode = Validation::Strict);
void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records);

// FNV-1a over the serialized records.
std::uint64_t dataset_fingerprint(const std::vector<DatasetRecord>& records);

// Orbit partition (record symmetry labels) and canonical site order.
OrderedCrystal preprocess_record(const DatasetRecord& r, double orbit_tol);
std::vector<OrderedCrystal> preprocess_dataset(const std::vector<DatasetRecord>& records,
                                               double orbit_tol);

} // namespace mcflow
#endif
