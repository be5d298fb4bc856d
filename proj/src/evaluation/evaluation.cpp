#include "gfmlab/evaluation/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfmlab/errors.hpp"
#include "gfmlab/graphcore/text.hpp"
#include "json.hpp"

namespace gfmlab {

namespace {

double feature_cosine(std::span<const double> u, std::span<const double> v) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    uv += u[p] * v[p];
    uu += u[p] * u[p];
    vv += v[p] * v[p];
  }
  const double denom = std::sqrt(uu) * std::sqrt(vv);
  return uv / std::max(denom, 1e-12);
}

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw ContractError(std::string(what) + ": empty node set");
}

int predict_on(const EncoderParams& enc, const LinearHead& head, const Graph& g, std::size_t target) {
  return predict(head, node_embedding(enc, g, target));
}

}  // namespace

std::string to_string(ScenarioKind k) { return k == ScenarioKind::Uncontrolled ? "uncontrolled" : "controlled"; }

ScenarioKind parse_scenario(const std::string& s) {
  if (s == "uncontrolled" || s == "1") return ScenarioKind::Uncontrolled;
  if (s == "controlled" || s == "2") return ScenarioKind::Controlled;
  throw ConfigError("unknown scenario '" + s + "' (expected uncontrolled or controlled)");
}

void validate(const ScenarioSpec& s, int num_classes) {
  if (s.query_budget < 1) throw ConfigError("scenario query budget must be >= 1");
  if (s.kind == ScenarioKind::Controlled && (s.target_class < 0 || s.target_class >= num_classes)) {
    throw ConfigError("controlled scenario needs a target class in [0, " + std::to_string(num_classes) + ")");
  }
}

EvalNode make_eval_node(const Graph& g, std::size_t v, const EgoConfig& ego) {
  EgoSubgraph sub = ego_of(g, v, ego);
  const int label = g.has_labels() ? g.labels[v] : kUnlabeled;
  return {std::move(sub.graph), sub.target, label};
}

std::vector<EvalNode> make_eval_nodes(const Graph& g, std::span<const std::size_t> nodes, const EgoConfig& ego) {
  std::vector<EvalNode> out;
  out.reserve(nodes.size());
  for (std::size_t v : nodes) out.push_back(make_eval_node(g, v, ego));
  return out;
}

NodeSample to_sample(const EvalNode& n) { return {make_view(n.ego), n.target, n.label}; }

std::vector<int> clean_predictions(const EncoderParams& enc, const LinearHead& head,
                                   std::span<const EvalNode> nodes) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (const EvalNode& n : nodes) out.push_back(predict_on(enc, head, n.ego, n.target));
  return out;
}

double clean_accuracy(const EncoderParams& enc, const LinearHead& head, std::span<const EvalNode> nodes) {
  require_nonempty(nodes.size(), "clean_accuracy");
  const auto preds = clean_predictions(enc, head, nodes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].label == kUnlabeled) throw ContractError("clean_accuracy: test node without a label");
    hits += preds[i] == nodes[i].label ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

Graph purify(const Graph& g, double tau) {
  Graph out = g;
  const std::size_t n = g.num_nodes();
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t w = u + 1; w < n; ++w) {
      if (g.a(u, w) == 0.0) continue;
      if (feature_cosine(g.x.row_span(u), g.x.row_span(w)) < tau) out.a(u, w) = out.a(w, u) = 0.0;
    }
  }
  return out;
}

TriggeredGraph triggered_input(const TriggerGenerator& gen, const EvalNode& n, const Tensor& e_j,
                               std::size_t prototype) {
  const Tensor x_tri = generate_trigger_feature(gen, n.ego.x.row_copy(n.target), e_j);
  return inject_trigger(n.ego, x_tri, n.target, prototype);
}

std::vector<int> triggered_predictions(const EncoderParams& enc, const LinearHead& head,
                                       const TriggerGenerator& gen, std::span<const EvalNode> nodes,
                                       const Tensor& e_j, std::optional<double> purify_tau) {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (const EvalNode& n : nodes) {
    TriggeredGraph t = triggered_input(gen, n, e_j);
    if (purify_tau) t.graph = purify(t.graph, *purify_tau);
    out.push_back(predict_on(enc, head, t.graph, t.target));
  }
  return out;
}

std::vector<std::size_t> class_histogram(std::span<const int> predictions, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int p : predictions) {
    if (p < 0 || p >= num_classes) throw ContractError("prediction " + std::to_string(p) + " out of class range");
    ++counts[static_cast<std::size_t>(p)];
  }
  return counts;
}

double asr_from_predictions(std::span<const int> predictions, const ScenarioSpec& scenario, int num_classes) {
  require_nonempty(predictions.size(), "asr");
  validate(scenario, num_classes);
  const auto counts = class_histogram(predictions, num_classes);
  const std::size_t hits = scenario.kind == ScenarioKind::Uncontrolled
                               ? *std::max_element(counts.begin(), counts.end())
                               : counts[static_cast<std::size_t>(scenario.target_class)];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double asr(const EncoderParams& enc, const LinearHead& head, const TriggerGenerator& gen,
           std::span<const EvalNode> nodes, const Tensor& targets, const ScenarioSpec& scenario,
           std::optional<double> purify_tau) {
  require_nonempty(nodes.size(), "asr");
  if (scenario.prototype >= targets.rows()) throw ContractError("asr: prototype index out of range");
  const auto preds = triggered_predictions(enc, head, gen, nodes, targets.row_copy(scenario.prototype), purify_tau);
  return asr_from_predictions(preds, scenario, static_cast<int>(head.num_classes()));
}

TrialQueryResult trial_query_select(const EncoderParams& enc, const LinearHead& head,
                                    const TriggerGenerator& gen, const Tensor& targets, int target_class,
                                    std::span<const EvalNode> probes, std::size_t budget) {
  require_nonempty(probes.size(), "trial_query_select");
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= head.num_classes()) {
    throw ContractError("trial_query_select: target class out of range");
  }
  if (budget < 1 || budget > targets.rows() * probes.size()) {
    throw ContractError("trial_query_select: budget must lie in [1, k * probes]");
  }
  TrialQueryResult result;
  for (std::size_t j = 0; j < targets.rows(); ++j) {
    if (result.queries + probes.size() > budget) break;
    const auto preds = triggered_predictions(enc, head, gen, probes, targets.row_copy(j));
    result.queries += probes.size();
    const auto hits = static_cast<std::size_t>(std::count(preds.begin(), preds.end(), target_class));
    if (2 * hits > probes.size()) {
      result.prototype = j;
      break;
    }
  }
  return result;
}

double mean_trigger_cosine(const TriggerGenerator& gen, std::span<const EvalNode> nodes, const Tensor& e_j) {
  require_nonempty(nodes.size(), "mean_trigger_cosine");
  double sum = 0.0;
  for (const EvalNode& n : nodes) {
    const Tensor x_i = n.ego.x.row_copy(n.target);
    sum += feature_cosine(x_i.values(), generate_trigger_feature(gen, x_i, e_j).values());
  }
  return sum / static_cast<double>(nodes.size());
}

PersistenceOutcome persistence_eval(const EncoderParams& enc, const LinearHead& head,
                                    const TriggerGenerator& gen, std::span<const NodeSample> train,
                                    std::span<const EvalNode> test, const Tensor& targets,
                                    const ScenarioSpec& scenario, const FinetuneConfig& ft) {
  PersistenceOutcome out;
  out.asr_before = asr(enc, head, gen, test, targets, scenario);
  out.tuned = finetune(enc, train, head, ft);
  out.asr_after = asr(out.tuned.params, out.tuned.head, gen, test, targets, scenario);
  return out;
}

namespace {

std::vector<double> update_magnitudes(const EncoderParams& before, const EncoderParams& after) {
  if (before.w1.rows() != after.w1.rows() || before.w1.cols() != after.w1.cols() ||
      before.w2.rows() != after.w2.rows() || before.w2.cols() != after.w2.cols()) {
    throw ContractError("update histogram: parameter layouts differ");
  }
  const auto a = before.flatten(), b = after.flatten();
  std::vector<double> m(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) m[k] = std::abs(b[k] - a[k]);
  return m;
}

}  // namespace

UpdateHistogram update_magnitude_histogram(const EncoderParams& before, const EncoderParams& after,
                                           std::size_t num_bins) {
  if (num_bins == 0) throw ContractError("update histogram needs at least one bin");
  const auto m = update_magnitudes(before, after);
  UpdateHistogram h;
  h.counts.assign(num_bins, 0);
  h.max_magnitude = m.empty() ? 0.0 : *std::max_element(m.begin(), m.end());
  h.bin_width = h.max_magnitude / static_cast<double>(num_bins);
  for (double v : m) {
    std::size_t bin = 0;
    if (h.max_magnitude > 0.0) {
      bin = std::min(num_bins - 1, static_cast<std::size_t>(v / h.max_magnitude * static_cast<double>(num_bins)));
    }
    ++h.counts[bin];
  }
  return h;
}

double small_update_fraction(const EncoderParams& before, const EncoderParams& after, double rel) {
  const auto m = update_magnitudes(before, after);
  if (m.empty()) return 1.0;
  const double cut = rel * *std::max_element(m.begin(), m.end());
  const auto below = std::count_if(m.begin(), m.end(), [cut](double v) { return v < cut; });
  return static_cast<double>(below) / static_cast<double>(m.size());
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["alpha"] = r.alpha;
  j["beta"] = r.beta;
  j["scenario"] = to_string(r.scenario.kind);
  if (r.scenario.kind == ScenarioKind::Controlled) j["target_class"] = r.scenario.target_class;
  j["prototype"] = r.scenario.prototype;
  j["query_budget"] = r.scenario.query_budget;
  if (r.queries) j["queries"] = *r.queries;
  j["aligned"] = r.aligned;
  j["asr"] = r.asr;
  j["acc"] = r.acc;
  j["asr_purified"] = r.asr_purified;
  j["asr_after_finetune"] = r.asr_after_finetune;
  j["mean_trigger_cosine"] = r.mean_trigger_cosine;
  j["class_histogram"] = r.class_histogram;
  j["config_digest"] = r.config_digest;
  return j.dump(2) + "\n";
}

EvalReport parse_report_json(const std::string& text, const std::string& source) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.alpha = j.at("alpha").get<double>();
    r.beta = j.at("beta").get<double>();
    r.scenario.kind = parse_scenario(j.at("scenario").get<std::string>());
    if (j.contains("target_class")) r.scenario.target_class = j.at("target_class").get<int>();
    r.scenario.prototype = j.at("prototype").get<std::size_t>();
    r.scenario.query_budget = j.at("query_budget").get<std::size_t>();
    if (j.contains("queries")) r.queries = j.at("queries").get<std::size_t>();
    r.aligned = j.at("aligned").get<bool>();
    r.asr = j.at("asr").get<double>();
    r.acc = j.at("acc").get<double>();
    r.asr_purified = j.at("asr_purified").get<double>();
    r.asr_after_finetune = j.at("asr_after_finetune").get<double>();
    r.mean_trigger_cosine = j.at("mean_trigger_cosine").get<double>();
    r.class_histogram = j.at("class_histogram").get<std::vector<std::size_t>>();
    r.config_digest = j.at("config_digest").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": malformed report: " + e.what());
  }
}

std::string report_csv_row(const EvalReport& r) {
  std::ostringstream out;
  out << r.seed << ',' << format_shortest(r.alpha) << ',' << format_shortest(r.beta) << ','
      << to_string(r.scenario.kind) << ',' << format_shortest(r.asr) << ',' << format_shortest(r.acc) << ','
      << format_shortest(r.asr_purified) << ',' << format_shortest(r.asr_after_finetune);
  return out.str();
}

}  // namespace gfmlab
