#include "mcflow/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mcflow/errors.hpp"

namespace mcflow {

namespace {

constexpr char kMagic[4] = {'M', 'C', 'F', 'L'};
constexpr std::uint32_t kTensor = 0;
constexpr std::uint32_t kText = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) {
    if (buf.size() - pos < n)
      throw ParseError("checkpoint truncated at byte " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void add_params(Checkpoint& ckpt, const std::string& prefix, const ModelParams& p) {
  for (const TensorInfo& t : p.layout().tensors()) {
    std::vector<double> v(p.values().begin() + t.offset, p.values().begin() + t.offset + t.size());
    ckpt.add_tensor(prefix + t.name, {static_cast<std::uint32_t>(t.rows), static_cast<std::uint32_t>(t.cols)},
                    std::move(v));
  }
}

void add_flat(Checkpoint& ckpt, const std::string& prefix, const ModelParams& layout_of,
              const std::vector<double>& flat) {
  for (const TensorInfo& t : layout_of.layout().tensors()) {
    std::vector<double> v(flat.begin() + t.offset, flat.begin() + t.offset + t.size());
    ckpt.add_tensor(prefix + t.name, {static_cast<std::uint32_t>(t.rows), static_cast<std::uint32_t>(t.cols)},
                    std::move(v));
  }
}

void read_flat(const Checkpoint& ckpt, const std::string& prefix, const ModelParams& layout_of,
               std::vector<double>& flat) {
  flat.assign(layout_of.num_parameters(), 0.0);
  for (const TensorInfo& t : layout_of.layout().tensors()) {
    const CheckpointEntry& e = ckpt.get(prefix + t.name);
    if (e.is_text || e.dims.size() != 2 || e.dims[0] != static_cast<std::uint32_t>(t.rows) ||
        e.dims[1] != static_cast<std::uint32_t>(t.cols))
      throw UsageError("checkpoint tensor '" + prefix + t.name +
                       "' does not match the configured model shape");
    std::copy(e.values.begin(), e.values.end(), flat.begin() + t.offset);
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

void Checkpoint::add_tensor(std::string name, std::vector<std::uint32_t> dims, std::vector<double> values) {
  size_t n = 1;
  for (auto d : dims)
    n *= d;
  if (n != values.size())
    throw InvalidData("checkpoint tensor '" + name + "': dims do not match value count");
  if (has(name))
    throw InvalidData("duplicate checkpoint entry '" + name + "'");
  entries_.push_back({std::move(name), false, std::move(dims), std::move(values), {}});
}

void Checkpoint::add_text(std::string name, std::string text) {
  if (has(name))
    throw InvalidData("duplicate checkpoint entry '" + name + "'");
  entries_.push_back({std::move(name), true, {}, {}, std::move(text)});
}

bool Checkpoint::has(const std::string& name) const {
  for (const CheckpointEntry& e : entries_)
    if (e.name == name)
      return true;
  return false;
}

const CheckpointEntry& Checkpoint::get(const std::string& name) const {
  for (const CheckpointEntry& e : entries_)
    if (e.name == name)
      return e;
  throw InvalidData("checkpoint has no entry '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.entries().size()));
  for (const CheckpointEntry& e : ckpt.entries()) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    if (e.is_text) {
      put_u32(out, kText);
      put_u32(out, static_cast<std::uint32_t>(e.text.size()));
      out += e.text;
    } else {
      put_u32(out, kTensor);
      put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
      for (auto d : e.dims)
        put_u32(out, d);
      for (double v : e.values)
        put_f64(out, v);
    }
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r{bytes};
  if (r.bytes(4) != std::string(kMagic, 4))
    throw ParseError("not a checkpoint file (bad magic)");
  std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  std::uint32_t count = r.u32();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32());
    std::uint32_t kind = r.u32();
    if (kind == kText) {
      ckpt.add_text(name, r.bytes(r.u32()));
    } else if (kind == kTensor) {
      std::vector<std::uint32_t> dims(r.u32());
      size_t n = 1;
      for (auto& d : dims) {
        d = r.u32();
        n *= d;
      }
      r.need(8 * n);
      std::vector<double> values(n);
      for (double& v : values)
        v = r.f64();
      ckpt.add_tensor(name, std::move(dims), std::move(values));
    } else {
      throw ParseError("unknown checkpoint entry kind " + std::to_string(kind));
    }
  }
  if (r.pos != bytes.size())
    throw ParseError("trailing bytes after checkpoint entries");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out)
      throw UsageError("cannot write checkpoint '" + path + "'");
    std::string bytes = encode_checkpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw Error("checkpoint write failed: '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot move checkpoint into place: '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw UsageError("cannot open checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

std::string format_data_stats(const DataStats& s) {
  std::string out;
  for (int k = 0; k < 3; ++k)
    out += "mu" + std::to_string(k) + " " + fmt(s.length_prior.mu[k]) + "\n";
  for (int k = 0; k < 3; ++k)
    out += "sigma" + std::to_string(k) + " " + fmt(s.length_prior.sigma[k]) + "\n";
  for (auto [n, f] : s.num_atoms_freq)
    out += "natoms " + std::to_string(n) + " " + fmt(f) + "\n";
  return out;
}

DataStats parse_data_stats(const std::string& text) {
  DataStats s;
  std::istringstream in(text);
  std::string key;
  while (in >> key) {
    if (key.rfind("mu", 0) == 0 || key.rfind("sigma", 0) == 0) {
      bool mu = key[0] == 'm';
      int k = key.back() - '0';
      if (k < 0 || k > 2)
        throw ParseError("bad data-stats key '" + key + "'");
      std::string v;
      in >> v;
      (mu ? s.length_prior.mu : s.length_prior.sigma)[k] = std::stod(v);
    } else if (key == "natoms") {
      int n;
      std::string v;
      in >> n >> v;
      s.num_atoms_freq[n] = std::stod(v);
    } else {
      throw ParseError("bad data-stats key '" + key + "'");
    }
  }
  if (!in.eof())
    throw ParseError("malformed data-stats entry");
  return s;
}

Checkpoint pack_snapshot(const TrainingSnapshot& snap) {
  Checkpoint c;
  c.add_text("config", format_config(snap.config));
  std::ostringstream rng;
  rng << snap.state.rng;
  c.add_text("rng", rng.str());
  c.add_text("step", std::to_string(snap.state.step));
  c.add_text("dataset_fingerprint", std::to_string(snap.dataset_fingerprint));
  c.add_text("data_stats", format_data_stats(snap.stats));
  add_params(c, "params/", snap.state.params);
  add_params(c, "ema/", snap.state.ema);
  add_flat(c, "adam_m/", snap.state.params, snap.state.adam_m);
  add_flat(c, "adam_v/", snap.state.params, snap.state.adam_v);
  if (snap.selected)
    add_params(c, "selected/", *snap.selected);
  return c;
}

TrainingSnapshot unpack_snapshot(const Checkpoint& ckpt) {
  TrainingSnapshot s;
  apply_config_text(s.config, ckpt.get("config").text);
  validate_model_config(s.config.model);
  std::istringstream rng(ckpt.get("rng").text);
  rng >> s.state.rng;
  if (!rng)
    throw ParseError("checkpoint rng state is malformed");
  s.state.step = std::stol(ckpt.get("step").text);
  s.dataset_fingerprint = std::stoull(ckpt.get("dataset_fingerprint").text);
  s.stats = parse_data_stats(ckpt.get("data_stats").text);
  s.state.params = ModelParams(s.config.model);
  s.state.ema = ModelParams(s.config.model);
  read_flat(ckpt, "params/", s.state.params, s.state.params.values());
  read_flat(ckpt, "ema/", s.state.params, s.state.ema.values());
  read_flat(ckpt, "adam_m/", s.state.params, s.state.adam_m);
  read_flat(ckpt, "adam_v/", s.state.params, s.state.adam_v);
  if (ckpt.has("selected/" + s.state.params.layout().tensors().front().name)) {
    ModelParams sel(s.config.model);
    read_flat(ckpt, "selected/", s.state.params, sel.values());
    s.selected = std::move(sel);
  }
  return s;
}

} // namespace mcflow
