#include "mcflow/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include <json.hpp>

#include "mcflow/checkpoint.hpp"
#include "mcflow/errors.hpp"
#include "mcflow/sampler.hpp"
#include "mcflow/toy.hpp"

namespace mcflow {

namespace {

std::string group_key(const std::string& id) { return id.substr(0, id.find('/')); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw UsageError("cannot write '" + path + "'");
  return out;
}

std::string symbols(const std::vector<int>& zs) {
  std::string s;
  for (size_t i = 0; i < zs.size(); ++i) {
    if (i)
      s += ' ';
    s += element(zs[i]).symbol;
  }
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

int run_make_toy_dataset(const RunConfig& config, const std::string& out_path) {
  write_dataset(out_path, make_toy_dataset(config.toy_count, config.train.seed));
  return kExitOk;
}

int run_train(const RunConfig& config, const TrainPaths& paths, std::ostream& log) {
  LoadReport data = load_dataset(paths.dataset, Validation::Strict);
  for (const std::string& f : data.failures)
    log << "skipped " << f << '\n';
  std::vector<OrderedCrystal> ordered = preprocess_dataset(data.records, config.orbit_tol);
  const std::uint64_t fingerprint = dataset_fingerprint(data.records);

  RunConfig run = config;
  std::optional<TrainState> resume;
  if (paths.resume) {
    TrainingSnapshot snap = unpack_snapshot(load_checkpoint(*paths.resume));
    if (snap.dataset_fingerprint != fingerprint)
      log << "warning: resuming on a dataset that differs from the checkpoint's\n";
    run.model = snap.config.model;
    resume = std::move(snap.state);
  } else {
    run.model = fit_model_config(run.model, ordered);
  }

  std::filesystem::create_directories(paths.out_dir);
  const std::filesystem::path dir(paths.out_dir);
  std::ofstream metrics = open_out((dir / "metrics.csv").string());
  metrics << "step,epoch,total,atoms,frac,lengths,angles,grad_norm,skipped\n";
  std::ofstream validation = open_out((dir / "validation.csv").string());
  validation << "epoch,step,structural,compositional,validity\n";
  DataStats stats = compute_data_stats(ordered);

  TrainHooks hooks;
  hooks.on_step = [&](const LogRow& r) {
    metrics << r.step << ',' << r.epoch << ',' << fmt(r.loss.total) << ',' << fmt(r.loss.atoms)
            << ',' << fmt(r.loss.frac) << ',' << fmt(r.loss.lengths) << ',' << fmt(r.loss.angles)
            << ',' << fmt(r.grad_norm) << ',' << (r.skipped ? 1 : 0) << '\n';
    if (r.step % 100 == 0)
      log << "step " << r.step << " loss " << r.loss.total << '\n';
  };
  hooks.on_validation = [&](const ValidationRecord& v) {
    validation << v.epoch << ',' << v.step << ',' << fmt(v.structural) << ','
               << fmt(v.compositional) << ',' << fmt(v.validity) << '\n';
    log << "validation epoch " << v.epoch << ": validity " << v.validity << '\n';
  };
  hooks.on_checkpoint = [&](const TrainState& s, long) {
    save_checkpoint((dir / "last.ckpt").string(),
                    pack_snapshot({run, s, stats, fingerprint, std::nullopt}));
  };

  TrainResult result;
  try {
    result = train(ordered, run.train, run.model, hooks, std::move(resume));
  } catch (const NumericFailure& e) {
    log << "error: " << e.what() << "; last good state saved to " << (dir / "last.ckpt").string()
        << '\n';
    return kExitNumeric;
  }
  save_checkpoint((dir / "final.ckpt").string(),
                  pack_snapshot({run, result.state, result.stats, fingerprint, result.selected_params}));
  if (result.selected >= 0)
    log << "selected validation record " << result.selected << " (step "
        << result.validations[result.selected].step << ")\n";
  return kExitOk;
}

const ModelParams& sampling_params(const TrainingSnapshot& snap, bool use_ema) {
  if (snap.selected)
    return *snap.selected;
  return use_ema ? snap.state.ema : snap.state.params;
}

int run_sample(const RunConfig& config, const SamplePaths& paths, std::ostream& log) {
  const TaskKind task = config.sample.task;
  if (task != TaskKind::DNG && !paths.condition_file)
    throw UsageError("--task " + to_string(task) + " needs --condition-file");
  if (config.sample.num_samples < 1)
    throw UsageError("--num-samples must be positive");
  validate_guidance(config.guidance);
  TrainingSnapshot snap = unpack_snapshot(load_checkpoint(paths.checkpoint));
  SamplerContext ctx{&sampling_params(snap, config.sample.use_ema), snap.stats.length_prior,
                     snap.stats.num_atoms_freq};

  std::vector<DatasetRecord> conditions;
  if (task == TaskKind::DNG) {
    DatasetRecord dummy;
    dummy.id = "dng";
    conditions.push_back(dummy);
  } else {
    LoadReport rep = load_dataset(*paths.condition_file, Validation::Relaxed);
    for (const std::string& f : rep.failures)
      log << "skipped condition " << f << '\n';
    conditions = std::move(rep.records);
  }

  std::vector<DatasetRecord> out;
  int warnings = 0;
  for (size_t ci = 0; ci < conditions.size(); ++ci) {
    const DatasetRecord& cond = conditions[ci];
    Task t = task == TaskKind::DNG   ? Task::dng()
             : task == TaskKind::CSP ? Task::csp(cond.crystal.atom_types)
                                     : Task::atg(cond.crystal);
    for (int k = 0; k < config.sample.num_samples; ++k) {
      std::seed_seq seq{config.train.seed, static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(k)};
      std::mt19937_64 rng(seq);
      SampleTrace trace;
      Crystal c = config.guidance.enabled && task != TaskKind::DNG
                      ? guided_generate(t, ctx, config.sample.steps, config.guidance, rng, &trace)
                      : generate(t, ctx, config.sample.steps, rng, &trace);
      warnings += trace.ctmc_warnings;
      DatasetRecord r;
      r.id = cond.id + "/" + std::to_string(k);
      r.crystal = std::move(c);
      out.push_back(std::move(r));
    }
  }
  if (warnings)
    log << "warning: " << warnings << " sites had all-zero rates at the final step\n";
  write_dataset(paths.out, out);
  return kExitOk;
}

std::vector<ReportRow> evaluate_records(TaskKind task, const std::vector<DatasetRecord>& predictions,
                                        const std::vector<DatasetRecord>& targets,
                                        std::vector<std::string>* verdicts,
                                        const MatchTolerances& tol) {
  using nlohmann::json;
  std::vector<ReportRow> rows;
  std::vector<Crystal> gen;
  int structural = 0, compositional = 0, both = 0;
  std::vector<json> per_sample;
  for (const DatasetRecord& p : predictions) {
    bool s = false, k = false;
    try {
      s = structural_validity(p.crystal);
    } catch (const Error&) {
    }
    try {
      k = compositional_validity(composition(p.crystal));
    } catch (const Error&) {
    }
    structural += s;
    compositional += k;
    both += s && k;
    gen.push_back(p.crystal);
    per_sample.push_back({{"id", p.id}, {"structural_valid", s}, {"compositional_valid", k}});
  }
  const double n = predictions.empty() ? 1.0 : static_cast<double>(predictions.size());
  auto add_validity = [&](bool with_structural) {
    if (with_structural)
      rows.push_back({"structural_validity", 100.0 * structural / n});
    rows.push_back({"compositional_validity", 100.0 * compositional / n});
    if (with_structural)
      rows.push_back({"overall_validity", 100.0 * both / n});
  };

  if (task == TaskKind::DNG) {
    add_validity(true);
    std::vector<Crystal> ref;
    for (const DatasetRecord& r : targets)
      ref.push_back(r.crystal);
    if (!gen.empty() && !ref.empty()) {
      PropertyDistances d = property_distances(gen, ref);
      rows.push_back({"d_rho", d.d_rho});
      rows.push_back({"d_elem", d.d_elem});
    }
  } else {
    std::map<std::string, int> target_index;
    for (size_t i = 0; i < targets.size(); ++i)
      target_index[targets[i].id] = static_cast<int>(i);
    std::vector<std::vector<Crystal>> cands(targets.size());
    std::vector<int> owner(predictions.size(), -1);
    for (size_t i = 0; i < predictions.size(); ++i) {
      auto it = target_index.find(group_key(predictions[i].id));
      if (it == target_index.end())
        it = target_index.find(predictions[i].id);
      if (it != target_index.end()) {
        owner[i] = it->second;
        cands[it->second].push_back(predictions[i].crystal);
      }
    }
    std::vector<Crystal> tgt;
    for (const DatasetRecord& r : targets)
      tgt.push_back(r.crystal);
    MatchSummary m = match_rate_rmse(cands, tgt, tol);
    if (task == TaskKind::ATG)
      add_validity(false);
    rows.push_back({"match_rate", m.match_rate});
    rows.push_back({"rmse", m.mean_rmse});
    for (size_t i = 0; i < predictions.size(); ++i) {
      if (owner[i] < 0)
        continue;
      std::optional<double> r;
      try {
        r = structure_match(predictions[i].crystal, targets[owner[i]].crystal, tol);
      } catch (const Error&) {
      }
      per_sample[i]["matched"] = r.has_value();
      if (r)
        per_sample[i]["rmse"] = *r;
    }
  }
  if (verdicts)
    for (const json& j : per_sample)
      verdicts->push_back(j.dump());
  return rows;
}

int run_evaluate(const RunConfig& config, const EvaluatePaths& paths, std::ostream& log) {
  LoadReport pred = load_dataset(paths.predictions, Validation::Relaxed);
  LoadReport tgt = load_dataset(paths.targets, Validation::Relaxed);
  for (const std::string& f : pred.failures)
    log << "skipped prediction " << f << '\n';
  std::vector<std::string> verdicts;
  std::vector<ReportRow> rows =
      evaluate_records(config.sample.task, pred.records, tgt.records, &verdicts);
  std::ofstream out = open_out(paths.out);
  out << "metric,value\n";
  for (const ReportRow& r : rows) {
    out << r.metric << ',' << fmt(r.value) << '\n';
    log << std::left << std::setw(24) << r.metric << std::fixed << std::setprecision(4) << r.value
        << '\n';
  }
  std::ofstream v = open_out(paths.out + ".jsonl");
  for (const std::string& line : verdicts)
    v << line << '\n';
  return kExitOk;
}

std::vector<InspectRow> inspect_records(const std::vector<DatasetRecord>& records, double orbit_tol) {
  std::vector<InspectRow> rows;
  for (const DatasetRecord& r : records) {
    OrderedCrystal oc = preprocess_record(r, orbit_tol);
    InspectRow row;
    row.id = r.id;
    row.num_sites = oc.crystal.num_atoms();
    row.ordering = symbols(oc.crystal.atom_types);
    for (const WyckoffGroup& g : oc.structure.groups) {
      if (!row.orbits.empty())
        row.orbits += ' ';
      row.orbits += std::string(element(g.element).symbol) + ":" + g.wyckoff_letter + "[";
      for (size_t j = 0; j < g.orbits.size(); ++j)
        row.orbits += (j ? "," : "") + std::to_string(g.orbits[j].site_indices.size());
      row.orbits += "]";
    }
    row.log10_full = log10_factorial(row.num_sites);
    row.log10_reduced = reduced_perm_space_log10(oc.structure);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_inspect_csv(std::ostream& out, const std::vector<InspectRow>& rows) {
  out << "id,num_sites,log10_full,log10_reduced,ordering,orbits\n";
  for (const InspectRow& r : rows) {
    char full[32], reduced[32];
    std::snprintf(full, sizeof full, "%.2f", r.log10_full);
    std::snprintf(reduced, sizeof reduced, "%.2f", r.log10_reduced);
    out << r.id << ',' << r.num_sites << ',' << full << ',' << reduced << ",\"" << r.ordering
        << "\",\"" << r.orbits << "\"\n";
  }
}

int run_inspect(const RunConfig& config, const std::string& dataset,
                const std::optional<std::string>& out, std::ostream& log) {
  LoadReport rep = load_dataset(dataset, Validation::Strict);
  for (const std::string& f : rep.failures)
    log << "skipped " << f << '\n';
  std::vector<InspectRow> rows = inspect_records(rep.records, config.orbit_tol);
  if (out) {
    std::ofstream f = open_out(*out);
    write_inspect_csv(f, rows);
  } else {
    write_inspect_csv(std::cout, rows);
  }
  return kExitOk;
}

} // namespace mcflow
