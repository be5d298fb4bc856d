#include "gfmlab/persistence/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <istream>
#include <ostream>

#include "gfmlab/errors.hpp"
#include "gfmlab/graphcore/text.hpp"

namespace gfmlab {

void validate(const PerturbationConfig& cfg) {
  if (!(cfg.s > 0.0 && cfg.s <= 1.0)) throw ConfigError("perturb.s must be in (0, 1]");
  if (!(cfg.sigma >= 0.0)) throw ConfigError("perturb.sigma must be >= 0");
  if (cfg.m_perturb < 1) throw ConfigError("perturb.m must be >= 1");
  if (!(cfg.lambda_mix >= 0.0 && cfg.lambda_mix <= 1.0)) {
    throw ConfigError("perturb.lambda_mix must be in [0, 1]");
  }
  if (!(cfg.hvp_eps > 0.0)) throw ConfigError("perturb.hvp_eps must be > 0");
  if (cfg.mix_limit < 1) throw ConfigError("perturb.mix_limit must be >= 1");
  if (cfg.mix_subgraphs < 2) throw ConfigError("perturb.mix_subgraphs must be >= 2");
}

Tensor propagate2(const Graph& g) {
  const Tensor a_hat = sym_normalize(g.a);
  return ad::matmul(a_hat, ad::matmul(a_hat, g.x));
}

Tensor align_matrix(const Tensor& r_i, const Tensor& r_j) {
  if (r_i.cols() != r_j.cols()) throw ContractError("align_matrix: feature dims differ");
  ad::Tape t;
  return ad::row_softmax(ad::pairwise_cosine(t.constant(r_i), t.constant(r_j))).value();
}

Graph mixup(const Graph& g_i, const Graph& g_j, double lambda) {
  if (g_i.feature_dim() != g_j.feature_dim()) {
    throw ContractError("mixup: feature dims " + std::to_string(g_i.feature_dim()) + " and " +
                        std::to_string(g_j.feature_dim()) + " differ");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("mixup: lambda must be in [0, 1]");
  const Tensor m = align_matrix(propagate2(g_i), propagate2(g_j));
  const Tensor mx = ad::matmul(m, g_j.x);
  const Tensor mam = ad::matmul(ad::matmul(m, g_j.a), m.transposed());
  Graph out;
  out.name = g_i.name + "+" + g_j.name;
  out.domain = g_i.domain;
  out.x = lambda * g_i.x + (1.0 - lambda) * mx;
  const std::size_t n = g_i.num_nodes();
  out.a = Tensor(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double w = lambda * g_i.a(a, b) + (1.0 - lambda) * 0.5 * (mam(a, b) + mam(b, a));
      out.a(a, b) = out.a(b, a) = w;
    }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> mix_pairs(std::size_t n, std::size_t limit,
                                                           Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);
  if (pairs.size() > limit) {
    rng.shuffle(pairs);
    pairs.resize(limit);
    std::sort(pairs.begin(), pairs.end());
  }
  return pairs;
}

std::vector<Graph> mixed_set(std::span<const Graph> graphs, double lambda, std::size_t limit,
                             Rng& rng) {
  if (graphs.size() < 2) throw ContractError("mixed_set: needs at least 2 graphs");
  std::vector<Graph> out;
  for (const auto& [i, j] : mix_pairs(graphs.size(), limit, rng)) {
    out.push_back(mixup(graphs[i], graphs[j], lambda));
  }
  return out;
}

std::vector<Graph> mixed_set_from_egos(std::span<const Graph> graphs, const EgoConfig& ego,
                                       const PerturbationConfig& cfg, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> nodes;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi)
    for (std::size_t v = 0; v < graphs[gi].num_nodes(); ++v) nodes.emplace_back(gi, v);
  if (nodes.size() < 2) throw ContractError("mixed_set: needs at least 2 nodes");
  std::vector<Graph> egos;
  for (std::size_t s = 0; s < cfg.mix_subgraphs; ++s) {
    const auto [gi, v] = nodes[rng.index(nodes.size())];
    egos.push_back(ego_of(graphs[gi], v, ego).graph);
  }
  return mixed_set(egos, cfg.lambda_mix, cfg.mix_limit, rng);
}

std::vector<double> finite_difference_hvp(const GradientFn& grad, std::span<const double> theta,
                                          std::span<const double> v, double eps) {
  if (theta.size() != v.size()) throw ContractError("hvp: direction length mismatch");
  if (!(eps > 0.0)) throw ContractError("hvp: eps must be > 0");
  std::vector<double> plus(theta.begin(), theta.end()), minus(plus);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    plus[k] += eps * v[k];
    minus[k] -= eps * v[k];
  }
  const auto gp = grad(plus), gm = grad(minus);
  if (gp.size() != theta.size() || gm.size() != theta.size()) {
    throw ContractError("hvp: gradient length mismatch");
  }
  std::vector<double> out(theta.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = (gp[k] - gm[k]) / (2.0 * eps);
    if (!std::isfinite(out[k])) throw NumericError("hvp: non-finite entry at index " + std::to_string(k));
  }
  return out;
}

bool SensitivityReport::is_selected(std::size_t k) const {
  return std::binary_search(selected.begin(), selected.end(), k);
}

SensitivityReport sensitivity_scores(std::span<const double> theta, const GradientFn& grad,
                                     double s, double hvp_eps, std::vector<std::string> names) {
  if (theta.empty()) throw ContractError("sensitivity_scores: empty parameter vector");
  if (!(s > 0.0 && s <= 1.0)) throw ContractError("sensitivity_scores: s must be in (0, 1]");
  SensitivityReport r;
  r.theta.assign(theta.begin(), theta.end());
  r.g = grad(theta);
  if (r.g.size() != theta.size()) throw ContractError("sensitivity_scores: gradient length mismatch");
  for (std::size_t k = 0; k < r.g.size(); ++k) {
    if (!std::isfinite(r.g[k])) {
      throw NumericError("sensitivity_scores: non-finite gradient at index " + std::to_string(k));
    }
  }
  r.hvp_theta = finite_difference_hvp(grad, theta, theta, hvp_eps);
  r.score.resize(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double v = r.g[k] * theta[k] - 0.5 * theta[k] * r.hvp_theta[k];
    r.score[k] = v * v;
  }
  // The small offset absorbs rounding in s * |theta|.
  const auto count = static_cast<std::size_t>(std::ceil(s * static_cast<double>(theta.size()) - 1e-9));
  std::vector<std::size_t> order(theta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return r.score[a] > r.score[b]; });
  r.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, count)));
  std::sort(r.selected.begin(), r.selected.end());
  if (names.empty()) {
    for (std::size_t k = 0; k < theta.size(); ++k) names.push_back("theta[" + std::to_string(k) + "]");
  }
  if (names.size() != theta.size()) throw ContractError("sensitivity_scores: name count mismatch");
  r.names = std::move(names);
  return r;
}

GradientFn pretrain_gradient(const EncoderParams& layout, std::span<const Graph> mixed,
                             const PretrainConfig& pretrain, Rng& rng) {
  if (mixed.size() < 2) throw ContractError("sensitivity: the mixed set needs at least 2 graphs");
  auto views = std::make_shared<std::vector<ViewPair>>();
  for (const Graph& g : mixed) views->push_back(make_view_pair(g, pretrain, rng));
  const double tau = pretrain.temperature;
  return [layout, views, tau](std::span<const double> theta) {
    const EncoderParams p = layout.unflatten(theta);
    ad::Tape t;
    const EncoderVars enc = bind_encoder(t, p, true);
    ad::Var loss = contrastive_loss(enc, *views, tau);
    t.backward(loss);
    const Tensor g1 = t.grad(enc.w1), g2 = t.grad(enc.w2);
    std::vector<double> g(g1.values().begin(), g1.values().end());
    g.insert(g.end(), g2.values().begin(), g2.values().end());
    return g;
  };
}

SensitivityReport encoder_sensitivity(const EncoderParams& params, std::span<const Graph> mixed,
                                      const PerturbationConfig& cfg,
                                      const PretrainConfig& pretrain, Rng& rng) {
  validate(cfg);
  const GradientFn grad = pretrain_gradient(params, mixed, pretrain, rng);
  const ad::ParamSet layout = params.to_param_set();
  std::vector<std::string> names;
  for (std::size_t k = 0; k < layout.total_size(); ++k) names.push_back(layout.describe_index(k));
  return sensitivity_scores(params.flatten(), grad, cfg.s, cfg.hvp_eps, std::move(names));
}

void write_sensitivity_csv(std::ostream& out, const SensitivityReport& r) {
  out << "param_index,name,theta,g,hvp_theta,score,selected\n";
  for (std::size_t k = 0; k < r.theta.size(); ++k) {
    out << k << ',' << r.names[k] << ',' << ad::format_double(r.theta[k]) << ','
        << ad::format_double(r.g[k]) << ',' << ad::format_double(r.hvp_theta[k]) << ','
        << ad::format_double(r.score[k]) << ',' << (r.is_selected(k) ? 1 : 0) << '\n';
  }
}

SensitivityReport read_sensitivity_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "param_index,name,theta,g,hvp_theta,score,selected") {
    throw FormatError(source + ":1: expected sensitivity header");
  }
  SensitivityReport r;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto f = split_csv(line);
    if (f.size() != 7) throw FormatError(where + ": expected 7 fields");
    if (parse_int(f[0], where) != static_cast<long long>(r.theta.size())) {
      throw FormatError(where + ": parameter indices must be consecutive from 0");
    }
    r.names.push_back(f[1]);
    r.theta.push_back(ad::parse_double(f[2], where));
    r.g.push_back(ad::parse_double(f[3], where));
    r.hvp_theta.push_back(ad::parse_double(f[4], where));
    r.score.push_back(ad::parse_double(f[5], where));
    const long long sel = parse_int(f[6], where);
    if (sel != 0 && sel != 1) throw FormatError(where + ": selected must be 0 or 1");
    if (sel == 1) r.selected.push_back(r.theta.size() - 1);
  }
  return r;
}

std::vector<EncoderParams> perturbed_param_sets(const EncoderParams& params,
                                                const SensitivityReport& report,
                                                const PerturbationConfig& cfg, Rng& rng) {
  validate(cfg);
  const std::vector<double> base = params.flatten();
  if (report.theta.size() != base.size()) {
    throw ContractError("perturbed_param_sets: report covers " + std::to_string(report.theta.size()) +
                        " parameters, encoder has " + std::to_string(base.size()));
  }
  std::vector<EncoderParams> out;
  for (int c = 0; c < cfg.m_perturb; ++c) {
    std::vector<double> theta = base;
    for (std::size_t k : report.selected) theta[k] += rng.normal(0.0, cfg.sigma) * std::abs(theta[k]);
    out.push_back(params.unflatten(theta));
  }
  return out;
}

ad::Var loss_per(std::span<const ad::Var> eff_losses) {
  if (eff_losses.empty()) throw ContractError("loss_per: no effectiveness losses");
  ad::Var all = ad::concat_rows(eff_losses);
  return ad::add(ad::variance(all), ad::mean(all));
}

SensitivityMap gcn_sensitivity_map(const EncoderParams& layout, const Graph& g, std::size_t k) {
  const std::size_t total = layout.flatten().size();
  if (k >= total) throw ContractError("gcn_sensitivity_map: parameter index out of range");
  const Tensor a_hat = sym_normalize(g.a);
  const Tensor x = g.x;
  return [layout, a_hat, x, k](std::span<const double> theta) {
    const EncoderParams p = layout.unflatten(theta);
    std::vector<double> out;
    const std::size_t outputs = x.rows() * p.out_dim();
    for (std::size_t o = 0; o < outputs; ++o) {
      ad::Tape t;
      const EncoderVars enc = bind_encoder(t, p, true);
      ad::Var z = gcn_forward(enc, a_hat, t.constant(x));
      ad::Var pick = ad::gather_rows(ad::transpose(ad::gather_rows(z, {o / p.out_dim()})),
                                     {o % p.out_dim()});
      t.backward(pick);
      const std::size_t n1 = p.w1.size();
      out.push_back(k < n1 ? t.grad(enc.w1)[k] : t.grad(enc.w2)[k - n1]);
    }
    return out;
  };
}

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> curvature_exponents(const SensitivityMap& map, std::span<const double> theta,
                                        std::span<const double> dir, double t0,
                                        std::vector<double>* distances) {
  const std::vector<double> base = map(theta);
  std::vector<double> d;
  for (double t : {t0, t0 / 2.0, t0 / 4.0}) {
    std::vector<double> moved(theta.begin(), theta.end());
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += t * dir[i];
    d.push_back(distance(map(moved), base));
  }
  if (distances) *distances = d;
  return {std::log2(d[0] / d[1]), std::log2(d[1] / d[2])};
}

InsensitivityResult check_first_order_insensitivity(const SensitivityMap& map,
                                                    std::span<const double> theta, Rng& rng,
                                                    const InsensitivityConfig& cfg) {
  const std::size_t p = theta.size();
  const std::vector<double> s0 = map(theta);
  const std::size_t q = s0.size();
  if (q >= p) {
    throw ContractError("insensitivity check needs more parameters (" + std::to_string(p) +
                        ") than sensitivity outputs (" + std::to_string(q) + ")");
  }
  // Jacobian rows: one per output, each of length p.
  std::vector<std::vector<double>> jac(q, std::vector<double>(p));
  for (std::size_t c = 0; c < p; ++c) {
    std::vector<double> plus(theta.begin(), theta.end()), minus(plus);
    plus[c] += cfg.jacobian_eps;
    minus[c] -= cfg.jacobian_eps;
    const auto sp = map(plus), sm = map(minus);
    for (std::size_t r = 0; r < q; ++r) jac[r][c] = (sp[r] - sm[r]) / (2.0 * cfg.jacobian_eps);
  }

  InsensitivityResult res;
  // Orthonormal basis of the row space by modified Gram-Schmidt.
  std::vector<std::vector<double>> basis;
  for (const auto& row : jac) {
    std::vector<double> v = row;
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < p; ++i) dot += v[i] * b[i];
      for (std::size_t i = 0; i < p; ++i) v[i] -= dot * b[i];
    }
    const double nv = l2(v);
    if (nv > 1e-9 * std::max(1.0, l2(row))) {
      for (double& x : v) x /= nv;
      basis.push_back(std::move(v));
    }
  }

  std::vector<double> dir(p);
  for (double& x : dir) x = rng.normal();
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < p; ++i) dot += dir[i] * b[i];
      for (std::size_t i = 0; i < p; ++i) dir[i] -= dot * b[i];
    }
  }
  const double nd = l2(dir);
  if (nd < 1e-9) {
    res.note = "no null direction at this probe";
    return res;
  }
  for (double& x : dir) x /= nd;
  res.has_null_direction = true;
  res.exp_null = curvature_exponents(map, theta, dir, cfg.t0, &res.d_null);
  res.verdict = true;
  for (std::size_t i = 0; i < res.exp_null.size(); ++i) {
    const bool tiny = res.d_null[i] < cfg.tiny && res.d_null[i + 1] < cfg.tiny;
    if (!tiny && !(res.exp_null[i] >= cfg.min_exponent)) res.verdict = false;
  }

  // Control: the largest Jacobian row, normalised.
  std::size_t best = 0;
  for (std::size_t r = 1; r < q; ++r)
    if (l2(jac[r]) > l2(jac[best])) best = r;
  const double nr = l2(jac[best]);
  if (nr > 0.0) {
    std::vector<double> ctl = jac[best];
    for (double& x : ctl) x /= nr;
    res.exp_control = curvature_exponents(map, theta, ctl, cfg.t0, &res.d_control);
  } else {
    res.note = "sensitivity map is locally constant";
  }
  return res;
}

}  // namespace gfmlab
