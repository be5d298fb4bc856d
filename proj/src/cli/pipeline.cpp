#include "gfmlab/cli/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "gfmlab/errors.hpp"
#include "gfmlab/graphcore/graph_io.hpp"
#include "gfmlab/graphcore/text.hpp"

namespace gfmlab {

namespace fs = std::filesystem;

namespace {

Rng stage_rng(const RunConfig& cfg, std::string_view stage) { return Rng(cfg.seed).derive(stage); }

std::size_t total_nodes(std::span<const Graph> graphs) {
  std::size_t n = 0;
  for (const Graph& g : graphs) n += g.num_nodes();
  return n;
}

}  // namespace

Dataset synthesize_dataset(const RunConfig& cfg) {
  Rng rng = stage_rng(cfg, "data");
  std::vector<Graph> graphs = gen_sbm(cfg.data.sbm, rng);
  const std::size_t held =
      cfg.data.heldout < 0 ? graphs.size() - 1 : static_cast<std::size_t>(cfg.data.heldout);
  Dataset d;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (i == held) d.downstream = std::move(graphs[i]);
    else d.pretrain.push_back(std::move(graphs[i]));
  }
  return d;
}

Dataset load_dataset_dirs(const RunConfig& cfg) {
  Dataset d;
  for (const auto& dir : cfg.data.pretrain_dirs) d.pretrain.push_back(load_graph(dir));
  d.downstream = load_graph(cfg.data.downstream_dir);
  return d;
}

PretrainResult run_pretrain(const RunConfig& cfg, std::span<const Graph> graphs) {
  if (graphs.empty()) throw ContractError("pretrain: no pre-training graphs");
  Rng init = stage_rng(cfg, "encoder-init");
  const EncoderParams enc0 = init_encoder(graphs.front().feature_dim(), cfg.hidden_dim, cfg.out_dim, init);
  Rng rng = stage_rng(cfg, "pretrain");
  return pretrain_contrastive(graphs, enc0, cfg.pretrain, rng);
}

PrototypeSet run_prototypes(const RunConfig& cfg, const EncoderParams& enc, std::span<const Graph> graphs) {
  const std::size_t k = cfg.prototype_k ? cfg.prototype_k : default_prototype_count(total_nodes(graphs));
  Rng rng = stage_rng(cfg, "prototypes");
  return build_prototype_set(enc, graphs, k, rng, cfg.pretrain.ego);
}

SensitivityReport run_sensitivity(const RunConfig& cfg, const EncoderParams& enc, std::span<const Graph> graphs) {
  Rng rng = stage_rng(cfg, "sensitivity");
  const auto mixed = mixed_set_from_egos(graphs, cfg.pretrain.ego, cfg.perturb, rng);
  return encoder_sensitivity(enc, mixed, cfg.perturb, cfg.pretrain, rng);
}

Tensor attack_targets(const RunConfig& cfg, const PrototypeSet& prototypes) {
  if (!cfg.attack.random_targets) return prototypes.embeddings;
  Rng rng = stage_rng(cfg, "random-targets");
  return random_targets(prototypes.size(), prototypes.embeddings.cols(), rng);
}

bool needs_persistence(const RunConfig& cfg) { return cfg.attack.beta > 0.0 && !cfg.attack.disable_persistence; }

AttackResult run_attack(const RunConfig& cfg, const EncoderParams& enc, std::span<const Graph> graphs,
                        const Tensor& targets, const SensitivityReport* sensitivity) {
  Rng init = stage_rng(cfg, "generator-init");
  const TriggerGenerator gen0 = cfg.attack.static_trigger ? init_static_trigger(enc.in_dim(), init)
                                                          : init_generator(enc.in_dim(), enc.out_dim(), init);
  std::optional<PersistenceContext> ctx;
  if (needs_persistence(cfg)) {
    if (sensitivity == nullptr) throw ContractError("attack: sensitivity report required when beta > 0");
    ctx = PersistenceContext{*sensitivity, cfg.perturb};
  }
  AttackConfig acfg = cfg.attack;
  acfg.ego = cfg.pretrain.ego;
  Rng rng = stage_rng(cfg, "attack");
  return train_attack(gen0, enc, graphs, targets, ctx ? &*ctx : nullptr, acfg, rng);
}

Downstream prepare_downstream(const RunConfig& cfg, const EncoderParams& enc, const Graph& g) {
  if (!g.has_labels() || g.num_classes < 1) throw ContractError("downstream graph needs labels");
  if (g.feature_dim() != enc.in_dim()) throw ContractError("downstream feature dim does not match the encoder");
  Rng rng = stage_rng(cfg, "split");
  std::vector<std::size_t> order(g.num_nodes());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  if (cfg.eval.probes >= order.size()) throw ConfigError("eval.probes leaves no test nodes");

  Downstream d;
  d.num_classes = g.num_classes;
  std::vector<bool> used(g.num_nodes(), false);
  std::vector<std::size_t> probe_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.eval.probes));
  std::sort(probe_ids.begin(), probe_ids.end());
  for (std::size_t v : probe_ids) used[v] = true;
  d.probes = make_eval_nodes(g, probe_ids, cfg.pretrain.ego);

  std::vector<EvalNode> all;
  std::vector<int> labels(g.num_nodes());
  Tensor emb(g.num_nodes(), enc.out_dim());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    all.push_back(make_eval_node(g, v, cfg.pretrain.ego));
    labels[v] = used[v] ? kUnlabeled : g.labels[v];
    const Tensor e = node_embedding(enc, all[v].ego, all[v].target);
    for (std::size_t k = 0; k < e.cols(); ++k) emb(v, k) = e(0, k);
  }
  const HeadFit fit = train_head(emb, labels, g.num_classes, cfg.eval.shots, rng, cfg.head);
  d.head = fit.head;
  for (std::size_t v : fit.chosen) {
    used[v] = true;
    d.train.push_back(to_sample(all[v]));
  }
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    if (!used[v] && g.labels[v] != kUnlabeled) d.test.push_back(std::move(all[v]));
  }
  if (d.test.empty()) throw ConfigError("downstream split leaves no test nodes");
  return d;
}

std::size_t query_budget(const RunConfig& cfg, std::size_t k) {
  return cfg.eval.query_budget ? cfg.eval.query_budget : k * cfg.eval.probes;
}

EvalOutcome run_eval(const RunConfig& cfg, const EncoderParams& enc, const Downstream& down,
                     const TriggerGenerator& gen, const Tensor& targets, EvalParts parts) {
  EvalOutcome out;
  EvalReport& r = out.report;
  r.seed = cfg.seed;
  r.alpha = cfg.attack.alpha;
  r.beta = cfg.attack.beta;
  r.config_digest = config_digest(cfg);
  r.scenario.kind = cfg.eval.scenario;
  r.scenario.query_budget = query_budget(cfg, targets.rows());

  out.clean_predictions = clean_predictions(enc, down.head, down.test);
  r.acc = clean_accuracy(enc, down.head, down.test);

  if (cfg.eval.scenario == ScenarioKind::Controlled) {
    r.scenario.target_class = cfg.eval.target_class;
    validate(r.scenario, down.num_classes);
    const auto q = trial_query_select(enc, down.head, gen, targets, cfg.eval.target_class, down.probes,
                                      r.scenario.query_budget);
    r.queries = q.queries;
    r.aligned = q.prototype.has_value();
    r.scenario.prototype = q.prototype.value_or(0);
  } else {
    if (cfg.eval.prototype >= targets.rows()) {
      throw ConfigError("eval.prototype " + std::to_string(cfg.eval.prototype) + " out of range for " +
                        std::to_string(targets.rows()) + " targets");
    }
    r.scenario.prototype = cfg.eval.prototype;
  }

  const Tensor e_j = targets.row_copy(r.scenario.prototype);
  out.triggered_predictions = triggered_predictions(enc, down.head, gen, down.test, e_j);
  r.class_histogram = class_histogram(out.triggered_predictions, down.num_classes);
  r.mean_trigger_cosine = mean_trigger_cosine(gen, down.test, e_j);
  if (!r.aligned) return out;  // the attacker has no trigger to inject; every rate stays 0

  r.asr = asr_from_predictions(out.triggered_predictions, r.scenario, down.num_classes);
  if (parts.purify) r.asr_purified = asr(enc, down.head, gen, down.test, targets, r.scenario, cfg.eval.tau);
  if (parts.persist) {
    auto p = persistence_eval(enc, down.head, gen, down.train, down.test, targets, r.scenario, cfg.finetune);
    r.asr_after_finetune = p.asr_after;
    out.tuned = std::move(p.tuned);
  }
  return out;
}

std::size_t reachable_classes(const EncoderParams& enc, const Downstream& down, const TriggerGenerator& gen,
                              const Tensor& targets, std::size_t budget) {
  std::size_t reached = 0;
  for (int y = 0; y < down.num_classes; ++y) {
    if (trial_query_select(enc, down.head, gen, targets, y, down.probes, budget).prototype) ++reached;
  }
  return reached;
}

// ---------------------------------------------------------------------------

namespace {

const char* const kEncoder = "encoder.ckpt";
const char* const kPretrainTrace = "pretrain_loss.csv";
const char* const kPrototypes = "prototypes.csv";
const char* const kSensitivity = "sensitivity.csv";
const char* const kGenerator = "generator.ckpt";
const char* const kTargets = "targets.ckpt";
const char* const kAttackTrace = "attack_trace.csv";

struct Run {
  const RunConfig& cfg;
  fs::path dir;
  Manifest manifest;
  std::ostream& log;
  std::vector<std::string> written;

  void record(const std::string& rel, const std::string& stage) {
    record_artifact(manifest, dir, rel, stage);
    written.push_back(rel);
  }
  fs::path need(const std::string& rel, const std::string& stage) const {
    return require_artifact(manifest, dir, rel, stage);
  }
  void finish() {
    manifest.seed = cfg.seed;
    manifest.config_digest = config_digest(cfg);
    save_manifest(dir, manifest);
  }
};

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError("cannot write " + p.string());
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string graph_dir_name(std::size_t i) { return "data/pretrain_" + std::to_string(i); }

void save_graph_artifacts(Run& run, const Graph& g, const std::string& rel) {
  save_graph(g, run.dir / rel);
  for (const char* f : {"meta", "nodes.csv", "edges.csv"}) run.record(rel + "/" + f, "gen-data");
}

Graph load_graph_artifact(const Run& run, const std::string& rel) {
  for (const char* f : {"meta", "nodes.csv", "edges.csv"}) run.need(rel + "/" + f, "gen-data");
  return load_graph(run.dir / rel);
}

Dataset stage_dataset(const Run& run) {
  if (run.cfg.data.source == DataSource::Directory) return load_dataset_dirs(run.cfg);
  Dataset d;
  d.downstream = load_graph_artifact(run, "data/downstream");
  for (std::size_t i = 0; run.manifest.artifacts.count(graph_dir_name(i) + "/meta"); ++i) {
    d.pretrain.push_back(load_graph_artifact(run, graph_dir_name(i)));
  }
  return d;
}

EncoderParams stage_encoder(const Run& run) {
  return EncoderParams::from_param_set(ad::load_checkpoint(run.need(kEncoder, "pretrain")));
}

PrototypeSet stage_prototypes(const Run& run) { return load_prototypes(run.need(kPrototypes, "prototypes")); }

std::optional<SensitivityReport> stage_sensitivity(const Run& run, const RunConfig& cfg) {
  if (!needs_persistence(cfg)) return std::nullopt;
  const fs::path p = run.need(kSensitivity, "sensitivity-report");
  std::ifstream in(p);
  return read_sensitivity_csv(in, p.string());
}

void save_attack(Run& run, const AttackResult& a, const std::string& prefix, const std::string& stage) {
  ad::save_checkpoint(run.dir / (prefix + kGenerator), a.generator.to_param_set());
  ad::ParamSet t;
  t.add("targets", a.targets);
  ad::save_checkpoint(run.dir / (prefix + kTargets), t);
  write_attack_trace(run.dir / (prefix + kAttackTrace), a.trace);
  for (const char* f : {kGenerator, kTargets, kAttackTrace}) run.record(prefix + f, stage);
}

std::string csv_block(const std::vector<EvalReport>& reports) {
  std::string out = std::string(kReportCsvHeader) + "\n";
  for (const auto& r : reports) out += report_csv_row(r) + "\n";
  return out;
}

void stage_gen_data(Run& run) {
  if (run.cfg.data.source != DataSource::Synthetic) {
    throw ConfigError("gen-data needs data.source = synthetic");
  }
  const Dataset d = synthesize_dataset(run.cfg);
  for (std::size_t i = 0; i < d.pretrain.size(); ++i) save_graph_artifacts(run, d.pretrain[i], graph_dir_name(i));
  save_graph_artifacts(run, d.downstream, "data/downstream");
  run.log << "gen-data: " << d.pretrain.size() << " pre-training graphs, downstream "
          << d.downstream.num_nodes() << " nodes\n";
}

void stage_pretrain(Run& run) {
  const Dataset d = stage_dataset(run);
  const PretrainResult r = run_pretrain(run.cfg, d.pretrain);
  ad::save_checkpoint(run.dir / kEncoder, r.params.to_param_set());
  write_loss_trace(run.dir / kPretrainTrace, r.loss_trace);
  run.record(kEncoder, "pretrain");
  run.record(kPretrainTrace, "pretrain");
  run.log << "pretrain: " << r.loss_trace.size() << " epochs, final loss "
          << (r.loss_trace.empty() ? 0.0 : r.loss_trace.back()) << "\n";
}

void stage_prototypes_run(Run& run) {
  const Dataset d = stage_dataset(run);
  const PrototypeSet p = run_prototypes(run.cfg, stage_encoder(run), d.pretrain);
  save_prototypes(run.dir / kPrototypes, p);
  run.record(kPrototypes, "prototypes");
  run.log << "prototypes: k = " << p.size() << "\n";
}

void stage_sensitivity_run(Run& run) {
  const Dataset d = stage_dataset(run);
  const SensitivityReport r = run_sensitivity(run.cfg, stage_encoder(run), d.pretrain);
  std::ofstream out(run.dir / kSensitivity);
  write_sensitivity_csv(out, r);
  out.close();
  run.record(kSensitivity, "sensitivity-report");
  run.log << "sensitivity-report: " << r.selected.size() << " of " << r.theta.size() << " parameters selected\n";
}

void stage_attack(Run& run) {
  const Dataset d = stage_dataset(run);
  const EncoderParams enc = stage_encoder(run);
  const Tensor targets = attack_targets(run.cfg, stage_prototypes(run));
  const auto sens = stage_sensitivity(run, run.cfg);
  const AttackResult a = run_attack(run.cfg, enc, d.pretrain, targets, sens ? &*sens : nullptr);
  save_attack(run, a, "", "attack");
  const auto& last = a.trace.empty() ? EpochLosses{} : a.trace.back();
  run.log << "attack: " << a.trace.size() << " epochs, final l_eff " << last.l_eff << "\n";
}

struct Attacked {
  TriggerGenerator gen;
  Tensor targets;
};

Attacked stage_attacked(const Run& run) {
  Attacked a;
  a.gen = TriggerGenerator::from_param_set(ad::load_checkpoint(run.need(kGenerator, "attack")));
  a.targets = ad::load_checkpoint(run.need(kTargets, "attack")).get("targets");
  return a;
}

void stage_eval(Run& run, const std::string& stage) {
  const Dataset d = stage_dataset(run);
  const EncoderParams enc = stage_encoder(run);
  const Attacked a = stage_attacked(run);
  const Downstream down = prepare_downstream(run.cfg, enc, d.downstream);
  EvalParts parts;
  parts.purify = stage != "persist-eval";
  parts.persist = stage != "purify-eval";
  const EvalOutcome o = run_eval(run.cfg, enc, down, a.gen, a.targets, parts);
  if (stage == "eval") {
    write_text(run.dir / "report.json", report_json(o.report));
    write_text(run.dir / "report_row.csv", csv_block({o.report}));
    run.record("report.json", stage);
    run.record("report_row.csv", stage);
  } else if (stage == "purify-eval") {
    write_text(run.dir / "purify.json", report_json(o.report));
    run.record("purify.json", stage);
  } else {
    write_text(run.dir / "persist.json", report_json(o.report));
    run.record("persist.json", stage);
    if (o.tuned) {
      const auto h = update_magnitude_histogram(enc, o.tuned->params, run.cfg.eval.histogram_bins);
      std::ostringstream csv;
      csv << "bin_lo,bin_hi,count\n";
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        csv << ad::format_double(h.bin_width * static_cast<double>(b)) << ','
            << ad::format_double(h.bin_width * static_cast<double>(b + 1)) << ',' << h.counts[b] << '\n';
      }
      write_text(run.dir / "update_histogram.csv", csv.str());
      run.record("update_histogram.csv", stage);
      run.log << "persist-eval: " << small_update_fraction(enc, o.tuned->params, 0.1)
              << " of coordinates moved less than 10% of the largest update\n";
    }
  }
  const EvalReport& r = o.report;
  run.log << stage << ": asr " << r.asr << ", acc " << r.acc << ", asr_purified " << r.asr_purified
          << ", asr_after_ft " << r.asr_after_finetune << ", mean_trigger_cosine " << r.mean_trigger_cosine
          << (r.aligned ? "" : " (no aligned prototype)") << "\n";
}

int stage_fps_verify(Run& run) {
  Rng rng = stage_rng(run.cfg, "fps-verify");
  const auto& f = run.cfg.fps;
  const CoverageEstimate est = verify_fps_separation_monotonicity(f.mixture, f.lambdas, f.k, f.r, f.trials, rng, f.delta);
  std::ostringstream csv;
  write_coverage_csv(csv, est);
  write_text(run.dir / "coverage.csv", csv.str());
  run.record("coverage.csv", "fps-verify");
  for (std::size_t i = 0; i < est.lambdas.size(); ++i) {
    run.log << "lambda " << est.lambdas[i] << ": p_hat " << est.p_hat(i) << "\n";
  }
  run.log << "fps-verify: " << (est.monotone ? "monotone" : "NOT monotone") << " (slack " << est.slack << ")\n";
  return est.monotone ? 0 : 3;
}

std::string cell_dir(std::size_t i, std::size_t j) {
  return "grid/a" + std::to_string(i) + "_b" + std::to_string(j) + "/";
}

void stage_grid(Run& run, std::size_t jobs) {
  const Dataset d = stage_dataset(run);
  const EncoderParams enc = stage_encoder(run);
  const PrototypeSet protos = stage_prototypes(run);
  const Downstream down = prepare_downstream(run.cfg, enc, d.downstream);

  struct Cell {
    RunConfig cfg;
    std::size_t i = 0, j = 0;
    std::optional<AttackResult> attack;
    std::optional<EvalReport> report;
  };
  std::vector<Cell> cells;
  bool any_persistence = false;
  for (std::size_t i = 0; i < run.cfg.grid_alphas.size(); ++i) {
    for (std::size_t j = 0; j < run.cfg.grid_betas.size(); ++j) {
      Cell c{run.cfg, i, j, {}, {}};
      c.cfg.attack.alpha = run.cfg.grid_alphas[i];
      c.cfg.attack.beta = run.cfg.grid_betas[j];
      any_persistence = any_persistence || needs_persistence(c.cfg);
      cells.push_back(std::move(c));
    }
  }
  std::optional<SensitivityReport> sens;
  if (any_persistence) {
    const fs::path p = run.need(kSensitivity, "sensitivity-report");
    std::ifstream in(p);
    sens = read_sensitivity_csv(in, p.string());
  }

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      try {
        Cell& cell = cells[c];
        const Tensor targets = attack_targets(cell.cfg, protos);
        cell.attack = run_attack(cell.cfg, enc, d.pretrain, targets, sens ? &*sens : nullptr);
        cell.report = run_eval(cell.cfg, enc, down, cell.attack->generator, targets).report;
        std::lock_guard<std::mutex> lock(mu);
        run.log << "grid: alpha " << cell.cfg.attack.alpha << " beta " << cell.cfg.attack.beta << " asr "
                << cell.report->asr << "\n";
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::max<std::size_t>(1, std::min(jobs, cells.size())); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<EvalReport> rows;
  for (const Cell& c : cells) {
    const std::string prefix = cell_dir(c.i, c.j);
    fs::create_directories(run.dir / prefix);
    save_attack(run, *c.attack, prefix, "grid");
    write_text(run.dir / (prefix + "report.json"), report_json(*c.report));
    run.record(prefix + "report.json", "grid");
    rows.push_back(*c.report);
  }
  write_text(run.dir / "grid.csv", csv_block(rows));
  run.record("grid.csv", "grid");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"gen-data", "pretrain", "prototypes", "attack", "eval",
                                                 "purify-eval", "persist-eval", "fps-verify",
                                                 "sensitivity-report", "grid"};
  return names;
}

StageResult run_stage(const std::string& stage, const RunConfig& cfg, const fs::path& out_dir, std::size_t jobs,
                      std::ostream& log) {
  validate(cfg);
  fs::create_directories(out_dir);
  Run run{cfg, out_dir, load_manifest(out_dir), log, {}};
  StageResult result;
  if (stage == "gen-data") stage_gen_data(run);
  else if (stage == "pretrain") stage_pretrain(run);
  else if (stage == "prototypes") stage_prototypes_run(run);
  else if (stage == "sensitivity-report") stage_sensitivity_run(run);
  else if (stage == "attack") stage_attack(run);
  else if (stage == "eval" || stage == "purify-eval" || stage == "persist-eval") stage_eval(run, stage);
  else if (stage == "fps-verify") result.exit_code = stage_fps_verify(run);
  else if (stage == "grid") stage_grid(run, jobs);
  else throw ConfigError("unknown stage '" + stage + "'");
  run.finish();
  result.artifacts = run.written;
  return result;
}

StageResult emit_report(const fs::path& run_dir, std::ostream& log) {
  std::vector<fs::path> files;
  if (fs::is_directory(run_dir)) {
    for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
      if (e.is_regular_file() && e.path().filename() == "report.json") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw MissingArtifactError("no report.json found under " + run_dir.string());

  std::vector<EvalReport> reports;
  for (const auto& f : files) reports.push_back(parse_report_json(read_text(f), f.string()));

  std::map<std::pair<double, double>, std::vector<const EvalReport*>> groups;
  for (const auto& r : reports) groups[{r.alpha, r.beta}].push_back(&r);
  std::ostringstream summary;
  summary << "alpha,beta,runs,median_asr,median_acc,median_asr_purified,median_asr_after_ft\n";
  for (const auto& [key, rs] : groups) {
    auto col = [&rs](double EvalReport::*m) {
      std::vector<double> v;
      for (const auto* r : rs) v.push_back(r->*m);
      return format_shortest(median(v));
    };
    summary << format_shortest(key.first) << ',' << format_shortest(key.second) << ',' << rs.size() << ','
            << col(&EvalReport::asr) << ',' << col(&EvalReport::acc) << ',' << col(&EvalReport::asr_purified)
            << ',' << col(&EvalReport::asr_after_finetune) << '\n';
  }
  write_text(run_dir / "report.csv", csv_block(reports));
  write_text(run_dir / "summary.txt", summary.str());
  log << "report: " << reports.size() << " reports, " << groups.size() << " (alpha, beta) groups\n";
  return {0, {"report.csv", "summary.txt"}};
}

}  // namespace gfmlab
