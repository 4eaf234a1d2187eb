#include "mcflow/records.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mcflow/errors.hpp"

namespace mcflow {

using nlohmann::json;

namespace {

constexpr int kNumSpaceGroups = 230;

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end())
    throw ParseError(std::string("missing field '") + name + "'");
  return *it;
}

} // namespace

void validate_record(const DatasetRecord& r, Validation mode) {
  const Crystal& c = r.crystal;
  const bool relaxed = mode == Validation::Relaxed;
  if (c.atom_types.empty())
    throw InvalidData("record has no sites");
  if (c.atom_types.size() != c.frac_coords.size())
    throw InvalidData("atomic_numbers and frac_coords differ in length");
  Crystal check = c;
  if (relaxed)
    for (int& z : check.atom_types)
      if (z == 0)
        z = 1;
  validate_crystal(check);
  const bool has_symmetry = !r.symmetry_ops.empty() || !r.wyckoff_letters.empty();
  if (!relaxed || has_symmetry) {
    if (r.spacegroup_number < 1 || r.spacegroup_number > kNumSpaceGroups)
      throw InvalidData("spacegroup_number " + std::to_string(r.spacegroup_number) +
                        " outside 1..230");
    if (r.wyckoff_letters.size() != c.atom_types.size())
      throw InvalidData("wyckoff_letters must have one entry per site");
    for (size_t i = 0; i < r.wyckoff_letters.size(); ++i)
      if (r.wyckoff_letters[i] < 'a' || r.wyckoff_letters[i] > 'z')
        throw InvalidData("site " + std::to_string(i) + ": Wyckoff letter must be a-z");
    bool identity = false;
    for (const SymmetryOp& op : r.symmetry_ops) {
      if (std::abs(op.rotation.cast<double>().determinant()) != 1.0)
        throw InvalidData("symmetry op with non-unimodular rotation");
      if (!op.translation.allFinite())
        throw InvalidData("symmetry op with non-finite translation");
      identity = identity || op.is_identity();
    }
    if (!identity)
      throw InvalidData("symmetry_ops must include the identity");
  }
}

DatasetRecord parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ParseError("record must be a JSON object");
  DatasetRecord r;
  try {
    r.id = field(j, "id").get<std::string>();
    r.crystal.atom_types = field(j, "atomic_numbers").get<std::vector<int>>();
    for (const json& f : field(j, "frac_coords"))
      r.crystal.frac_coords.push_back(vec_from(f));
    const json& lat = field(j, "lattice");
    r.crystal.lattice.lengths = {field(lat, "a").get<double>(), field(lat, "b").get<double>(),
                                 field(lat, "c").get<double>()};
    r.crystal.lattice.angles = {field(lat, "alpha").get<double>(),
                                field(lat, "beta").get<double>(),
                                field(lat, "gamma").get<double>()};
    r.spacegroup_number = field(j, "spacegroup_number").get<int>();
    for (const json& op : field(j, "symmetry_ops")) {
      SymmetryOp s;
      const json& rot = field(op, "rotation");
      if (!rot.is_array() || rot.size() != 3)
        throw ParseError("rotation must be 3x3");
      for (int a = 0; a < 3; ++a) {
        if (!rot[a].is_array() || rot[a].size() != 3)
          throw ParseError("rotation must be 3x3");
        for (int b = 0; b < 3; ++b)
          s.rotation(a, b) = rot[a][b].get<int>();
      }
      s.translation = vec_from(field(op, "translation"));
      r.symmetry_ops.push_back(s);
    }
    for (const json& w : field(j, "wyckoff_letters")) {
      std::string letter = w.get<std::string>();
      if (letter.size() != 1)
        throw ParseError("Wyckoff letters must be single characters");
      r.wyckoff_letters.push_back(letter[0]);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad field type: ") + e.what());
  }
  return r;
}

std::string format_record(const DatasetRecord& r) {
  json j;
  j["id"] = r.id;
  j["atomic_numbers"] = r.crystal.atom_types;
  json frac = json::array();
  for (const Vec3& f : r.crystal.frac_coords)
    frac.push_back(vec_json(f));
  j["frac_coords"] = frac;
  const LatticeParams& p = r.crystal.lattice;
  j["lattice"] = {{"a", p.lengths[0]},     {"b", p.lengths[1]},    {"c", p.lengths[2]},
                  {"alpha", p.angles[0]}, {"beta", p.angles[1]}, {"gamma", p.angles[2]}};
  j["spacegroup_number"] = r.spacegroup_number;
  json ops = json::array();
  for (const SymmetryOp& op : r.symmetry_ops) {
    json rot = json::array();
    for (int a = 0; a < 3; ++a)
      rot.push_back({op.rotation(a, 0), op.rotation(a, 1), op.rotation(a, 2)});
    ops.push_back({{"rotation", rot}, {"translation", vec_json(op.translation)}});
  }
  j["symmetry_ops"] = ops;
  json letters = json::array();
  for (char c : r.wyckoff_letters)
    letters.push_back(std::string(1, c));
  j["wyckoff_letters"] = letters;
  return j.dump();
}

LoadReport load_dataset(const std::string& path, Validation mode) {
  std::ifstream in(path);
  if (!in)
    throw UsageError("cannot open dataset '" + path + "'");
  LoadReport rep;
  std::string line;
  int lineno = 0, total = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    ++total;
    try {
      DatasetRecord r = parse_record(line);
      validate_record(r, mode);
      rep.records.push_back(std::move(r));
    } catch (const Error& e) {
      rep.failures.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (total > 0 && rep.failures.size() > kMaxFailureFraction * total) {
    std::ostringstream msg;
    msg << path << ": " << rep.failures.size() << " of " << total << " records invalid";
    for (const std::string& f : rep.failures)
      msg << "\n  " << f;
    throw InvalidData(msg.str());
  }
  return rep;
}

void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path);
  if (!out)
    throw UsageError("cannot write '" + path + "'");
  for (const DatasetRecord& r : records)
    out << format_record(r) << '\n';
  if (!out)
    throw Error("write to '" + path + "' failed");
}

std::uint64_t dataset_fingerprint(const std::vector<DatasetRecord>& records) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const DatasetRecord& r : records) {
    for (unsigned char ch : format_record(r) + "\n") {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

OrderedCrystal preprocess_record(const DatasetRecord& r, double orbit_tol) {
  try {
    OrbitStructure s = partition_orbits(r.crystal, r.symmetry_ops, r.wyckoff_letters, orbit_tol);
    return canonical_order(r.crystal, s);
  } catch (const Error& e) {
    throw InconsistentSymmetry("record '" + r.id + "': " + e.what());
  }
}

std::vector<OrderedCrystal> preprocess_dataset(const std::vector<DatasetRecord>& records,
                                               double orbit_tol) {
  std::vector<OrderedCrystal> out;
  out.reserve(records.size());
  for (const DatasetRecord& r : records)
    out.push_back(preprocess_record(r, orbit_tol));
  return out;
}

} // namespace mcflow
