// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gfmlab/autodiff/grad_check.hpp"
#include "gfmlab/cli/pipeline.hpp"
#include "gfmlab/errors.hpp"
#include "gfmlab/persistence/persistence.hpp"
#include "gfmlab/prototypes/prototypes.hpp"
#include "support/fps_oracle.hpp"
#include "support/random_expr.hpp"

namespace {

using namespace gfmlab;
using gfmlab::testing::random_tensor;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // 0: no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s + "]";
}

Graph random_graph(Rng& rng, std::size_t n, std::size_t d, double p = 0.4) {
  Graph g;
  g.x = random_tensor(rng, n, d);
  g.a = Tensor(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) g.a(i, j) = g.a(j, i) = 1.0;
  return g;
}

// ---- 1 ----
Outcome autodiff_soundness() {
  Rng rng(9101);
  double worst = 0.0;
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto expr = gfmlab::testing::make_random_expr(rng);
    const Tensor x = random_tensor(rng, expr.rows, expr.cols);
    const double err = ad::grad_check([&](ad::Tape& t, ad::Var v) { return expr.build(t, v); }, x, 1e-5);
    worst = std::max(worst, err);
    if (!(err < 1e-4)) ++bad;
  }
  return {bad == 0, "100 expressions, worst relative error " + fmt(worst)};
}

// ---- 2 ----
Outcome fps_equivalence() {
  Rng rng(9202);
  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(64), d = 1 + rng.index(8);
    const Tensor pts = random_tensor(rng, n, d, -5.0, 5.0);
    const std::size_t k = 1 + rng.index(n), seed = rng.index(n);
    if (fps(pts, k, seed) != gfmlab::testing::brute_force_fps(pts, k, seed)) ++bad;
  }
  return {bad == 0, "200 instances, " + std::to_string(bad) + " mismatches"};
}

// ---- 3 ----
Outcome coverage_monotonicity() {
  const std::vector<double> lambdas = {1, 2, 4, 8};
  MixtureSpec spec{4, 1.0, 1.0, 25, 2};
  Rng rng(9303);
  const auto est = verify_fps_separation_monotonicity(spec, lambdas, 4, 4, 2000, rng, 0.05);
  MixtureSpec quiet = spec;
  quiet.noise_sigma = 0.0;
  Rng rng0(9304);
  const auto ctl = verify_fps_separation_monotonicity(quiet, lambdas, 4, 4, 2000, rng0, 0.05);
  bool control_exact = true;
  std::vector<double> p, p0;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    p.push_back(est.p_hat(i));
    p0.push_back(ctl.p_hat(i));
    control_exact = control_exact && ctl.p_hat(i) == 1.0;
  }
  return {est.monotone && control_exact,
          "p_hat " + join(p) + " slack " + fmt(est.slack) + ", zero-noise " + join(p0)};
}

// ---- 4 ----
GradientFn quadratic_gradient(const Tensor& q) {
  return [q](std::span<const double> th) {
    std::vector<double> g(th.size(), 0.0);
    for (std::size_t i = 0; i < th.size(); ++i)
      for (std::size_t j = 0; j < th.size(); ++j) g[i] += q(i, j) * th[j];
    return g;
  };
}

Outcome sensitivity_oracles() {
  const std::vector<double> one = {2.0};
  const auto r1 = sensitivity_scores(one, quadratic_gradient(Tensor::from_rows({{1.0}})), 1.0, 1e-4);
  const std::vector<double> two = {2.0, 1.0};
  const auto r2 = sensitivity_scores(two, quadratic_gradient(Tensor::identity(2)), 0.5, 1e-4);
  const double e1 = std::abs(r1.score[0] - 4.0);
  const double e2 = std::max(std::abs(r2.score[0] - 4.0), std::abs(r2.score[1] - 0.25));
  const bool analytic = e1 < 1e-10 && e2 < 1e-10 && r2.selected == std::vector<std::size_t>{0};

  Rng rng(9404);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.index(20);
    Tensor q = random_tensor(rng, n, n);
    q = q + q.transposed();
    std::vector<double> theta(n), v(n);
    for (double& x : theta) x = rng.uniform(-2.0, 2.0);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    const auto fd = finite_difference_hvp(quadratic_gradient(q), theta, v, 1e-4);
    const auto exact = quadratic_gradient(q)(v);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += (fd[i] - exact[i]) * (fd[i] - exact[i]);
      den += exact[i] * exact[i];
    }
    worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-300));
  }
  return {analytic && worst < 1e-4,
          "analytic error " + fmt(std::max(e1, e2)) + ", worst HVP relative error " + fmt(worst)};
}

// ---- 5 ----
Outcome mixup_identities() {
  Rng rng(9505);
  bool exact = true;
  double row_err = 0.0, asym = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.index(5);
    const Graph gi = random_graph(rng, 1 + rng.index(12), d), gj = random_graph(rng, 1 + rng.index(12), d);
    const Graph same = mixup(gi, gj, 1.0);
    exact = exact && same.x == gi.x && same.a == gi.a;
    const Tensor m = align_matrix(propagate2(gi), propagate2(gj));
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double s = 0.0;
      for (double v : m.row_span(r)) s += v;
      row_err = std::max(row_err, std::abs(s - 1.0));
    }
    const Graph mixed = mixup(gi, gj, rng.uniform(0.0, 1.0));
    for (std::size_t r = 0; r < mixed.num_nodes(); ++r)
      for (std::size_t c = 0; c < mixed.num_nodes(); ++c) asym = std::max(asym, std::abs(mixed.a(r, c) - mixed.a(c, r)));
  }
  return {exact && row_err < 1e-9 && asym < 1e-12,
          std::string("lambda=1 exact ") + (exact ? "yes" : "no") + ", row-sum error " + fmt(row_err) +
              ", asymmetry " + fmt(asym)};
}

// ---- 6 ----
Outcome insensitivity_probe() {
  Rng rng(9606);
  int null_ok = 0, with_row_space = 0, control_ok = 0;
  std::vector<double> ctl_exps;
  for (int probe = 0; probe < 10; ++probe) {
    const Graph g = random_graph(rng, 3, 2, 0.7);
    const EncoderParams p = init_encoder(2, 2, 1, rng);
    const auto theta = p.flatten();
    const std::size_t k = rng.index(theta.size());
    Rng dir_rng = rng.derive("probe", static_cast<std::uint64_t>(probe));
    const auto r = check_first_order_insensitivity(gcn_sensitivity_map(p, g, k), theta, dir_rng);
    if (r.has_null_direction && r.verdict) ++null_ok;
    // a locally constant map has an empty row space and no control direction
    if (r.exp_control.empty()) continue;
    ++with_row_space;
    bool ctl = true;
    for (double e : r.exp_control) {
      ctl_exps.push_back(e);
      ctl = ctl && std::abs(e - 1.0) <= 0.2;
    }
    if (ctl) ++control_ok;
  }
  return {null_ok >= 8 && with_row_space > 0 && control_ok == with_row_space,
          "null-direction verdicts " + std::to_string(null_ok) + "/10, control within 1 +- 0.2 on " +
              std::to_string(control_ok) + " of " + std::to_string(with_row_space) +
              " probes with a nonzero Jacobian, control exponents " + join(ctl_exps)};
}

// ---- 7-10: desk-scale synthetic runs ----
struct VariantRun {
  EvalReport report;
  std::size_t reachable = 0;
  double small_fraction = 0.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  bool clean_identical = false;
  bool encoder_untouched = false;
  VariantRun main, no_persistence, static_trigger, random_targets;
};

RunConfig desk_config() { return load_config(fs::path(GFMLAB_SOURCE_DIR) / "configs" / "desk.conf"); }

VariantRun run_variant(const RunConfig& cfg, const EncoderParams& enc, const Dataset& data,
                       const PrototypeSet& protos, const SensitivityReport& sens, const Downstream& down) {
  const Tensor targets = attack_targets(cfg, protos);
  const AttackResult a = run_attack(cfg, enc, data.pretrain, targets, needs_persistence(cfg) ? &sens : nullptr);
  const EvalOutcome o = run_eval(cfg, enc, down, a.generator, a.targets);
  VariantRun v;
  v.report = o.report;
  v.reachable = reachable_classes(enc, down, a.generator, a.targets, 3 * a.targets.rows());
  if (o.tuned) v.small_fraction = small_update_fraction(enc, o.tuned->params, 0.1);
  return v;
}

const std::vector<SeedRun>& desk_runs() {
  static const std::vector<SeedRun> runs = [] {
    std::vector<SeedRun> out;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      RunConfig cfg = desk_config();
      cfg.seed = seed;
      validate(cfg);
      const Dataset data = synthesize_dataset(cfg);
      const EncoderParams enc = run_pretrain(cfg, data.pretrain).params;
      const EncoderParams snapshot = enc;
      const Downstream clean = prepare_downstream(cfg, enc, data.downstream);
      const auto clean_preds = clean_predictions(enc, clean.head, clean.test);
      const PrototypeSet protos = run_prototypes(cfg, enc, data.pretrain);
      const SensitivityReport sens = run_sensitivity(cfg, enc, data.pretrain);

      SeedRun s;
      s.seed = seed;
      const Tensor targets = attack_targets(cfg, protos);
      const AttackResult a = run_attack(cfg, enc, data.pretrain, targets, &sens);
      s.encoder_untouched = enc == snapshot;
      const Downstream down = prepare_downstream(cfg, enc, data.downstream);
      const EvalOutcome o = run_eval(cfg, enc, down, a.generator, a.targets);
      s.clean_identical = o.clean_predictions == clean_preds && down.head == clean.head;
      s.main.report = o.report;
      s.main.reachable = reachable_classes(enc, down, a.generator, a.targets, 3 * a.targets.rows());
      if (o.tuned) s.main.small_fraction = small_update_fraction(enc, o.tuned->params, 0.1);

      RunConfig beta0 = cfg;
      beta0.attack.beta = 0.0;
      s.no_persistence = run_variant(beta0, enc, data, protos, sens, down);
      RunConfig fixed = cfg;
      fixed.attack.static_trigger = true;
      s.static_trigger = run_variant(fixed, enc, data, protos, sens, down);
      RunConfig random = cfg;
      random.attack.random_targets = true;
      s.random_targets = run_variant(random, enc, data, protos, sens, down);

      std::cout << "  seed " << seed << ": asr " << s.main.report.asr << " acc " << s.main.report.acc
                << " reachable " << s.main.reachable << " | after-ft beta=0.1 " << s.main.report.asr_after_finetune
                << " beta=0 " << s.no_persistence.report.asr_after_finetune << " | purified adaptive "
                << s.main.report.asr_purified << " static " << s.static_trigger.report.asr_purified
                << " | reachable random " << s.random_targets.reachable << " | small-update fraction "
                << s.main.small_fraction << "\n";
      out.push_back(std::move(s));
    }
    return out;
  }();
  return runs;
}

template <typename F>
std::vector<double> per_seed(F f) {
  std::vector<double> v;
  for (const auto& s : desk_runs()) v.push_back(f(s));
  return v;
}

Outcome end_to_end_attack() {
  const auto asr = per_seed([](const SeedRun& s) { return s.main.report.asr; });
  bool identical = true;
  for (const auto& s : desk_runs()) identical = identical && s.clean_identical && s.encoder_untouched;
  const RunConfig cfg = desk_config();
  const std::size_t nodes = static_cast<std::size_t>(cfg.data.sbm.num_domains * cfg.data.sbm.classes_per_domain *
                                                     cfg.data.sbm.nodes_per_class);
  return {median(asr) >= 0.8 && identical && nodes >= 400,
          "median ASR " + fmt(median(asr)) + " over " + join(asr) + ", " + std::to_string(nodes) +
              " nodes, clean predictions identical " + (identical ? "yes" : "no")};
}

Outcome reachability() {
  const auto r = per_seed([](const SeedRun& s) { return static_cast<double>(s.main.reachable); });
  return {median(r) >= 3.0, "median reachable classes " + fmt(median(r)) + " of 4 over " + join(r)};
}

Outcome ablation_directionality() {
  const auto with_beta = per_seed([](const SeedRun& s) { return s.main.report.asr_after_finetune; });
  const auto no_beta = per_seed([](const SeedRun& s) { return s.no_persistence.report.asr_after_finetune; });
  const auto adaptive = per_seed([](const SeedRun& s) { return s.main.report.asr_purified; });
  const auto fixed = per_seed([](const SeedRun& s) { return s.static_trigger.report.asr_purified; });
  const auto fps_r = per_seed([](const SeedRun& s) { return static_cast<double>(s.main.reachable); });
  const auto rnd_r = per_seed([](const SeedRun& s) { return static_cast<double>(s.random_targets.reachable); });
  const bool a = median(with_beta) >= median(no_beta);
  const bool b = median(adaptive) >= median(fixed);
  const bool c = median(fps_r) >= median(rnd_r);
  return {a && b && c, std::string("(a) after-ft ") + fmt(median(with_beta)) + " vs " + fmt(median(no_beta)) +
                           (a ? " ok" : " FAIL") + "; (b) purified " + fmt(median(adaptive)) + " vs " +
                           fmt(median(fixed)) + (b ? " ok" : " FAIL") + "; (c) reachable " + fmt(median(fps_r)) +
                           " vs " + fmt(median(rnd_r)) + (c ? " ok" : " FAIL")};
}

Outcome update_skew() {
  const auto f = per_seed([](const SeedRun& s) { return s.main.small_fraction; });
  const double worst = *std::min_element(f.begin(), f.end());
  return {worst >= 0.7, "fraction of coordinates below 10% of the largest update, per seed " + join(f)};
}

// ---- 11 ----
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  RunConfig cfg = desk_config();
  cfg.grid_alphas = {0.1, 1.0};
  cfg.grid_betas = {0.0, 0.1};
  cfg.fps.trials = 200;
  const fs::path root = fs::temp_directory_path() / "gfmlab_acceptance_rerun";
  fs::remove_all(root);
  std::ostringstream log;
  const std::vector<std::string> stages = {"gen-data", "pretrain", "prototypes", "sensitivity-report", "attack",
                                           "eval", "purify-eval", "persist-eval", "fps-verify", "grid"};
  for (const char* run : {"a", "b"}) {
    const std::size_t jobs = std::string(run) == "a" ? 1 : 3;
    for (const auto& s : stages) run_stage(s, cfg, root / run, jobs, log);
  }
  const std::string ma = slurp(root / "a" / kManifestName);
  bool same = !ma.empty() && ma == slurp(root / "b" / kManifestName);
  const Manifest m = load_manifest(root / "a");
  std::size_t compared = 0;
  for (const auto& [rel, sha] : m.artifacts) {
    same = same && slurp(root / "a" / rel) == slurp(root / "b" / rel);
    ++compared;
  }
  fs::remove_all(root);
  return {same && compared > 0, std::to_string(compared) + " artifacts and the manifest compared byte for byte"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "autodiff soundness", 10.0, autodiff_soundness},
      {2, "fps oracle equivalence", 5.0, fps_equivalence},
      {3, "coverage monotone in separation", 60.0, coverage_monotonicity},
      {4, "sensitivity oracles", 0.0, sensitivity_oracles},
      {5, "mixup identities", 0.0, mixup_identities},
      {6, "first-order insensitivity probe", 0.0, insensitivity_probe},
      {7, "end-to-end synthetic attack", 900.0, end_to_end_attack},
      {8, "controlled-class reachability", 0.0, reachability},
      {9, "ablation directionality", 0.0, ablation_directionality},
      {10, "fine-tuning update skew", 0.0, update_skew},
      {11, "rerun reproducibility", 0.0, reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = o.pass;
    std::string timing = fmt(std::round(secs * 100) / 100) + " s";
    if (c.limit_seconds > 0 && secs >= c.limit_seconds) {
      pass = false;
      timing += " over the " + fmt(c.limit_seconds) + " s limit";
    }
    if (!pass) ++failures;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " (" << timing
              << ")" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
