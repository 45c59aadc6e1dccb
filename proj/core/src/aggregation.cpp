#include "robustfl/aggregation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>

#include "robustfl/error.hpp"

namespace robustfl {

namespace {

std::string normalized_name(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

void require_models(std::span<const ModelParams> models) {
  if (models.empty()) throw InputError("aggregation needs at least one model");
  models.front().validate();
  for (const ModelParams& m : models.subspan(1)) require_same_arch(models.front(), m);
}

// Mean of models[kept[k]], accumulated in ascending index order.
ModelParams mean_of(std::span<const ModelParams> models, std::vector<std::size_t> kept) {
  if (kept.empty()) throw InputError("no models left to average");
  std::sort(kept.begin(), kept.end());
  ModelParams out = ModelParams::zeros(models.front().arch);
  for (std::size_t idx : kept) {
    const auto& theta = models[idx].theta;
    for (std::size_t k = 0; k < theta.size(); ++k) out.theta[k] += theta[k];
  }
  const double count = static_cast<double>(kept.size());
  for (double& v : out.theta) v /= count;
  return out;
}

std::vector<std::size_t> complement(std::size_t m, const std::vector<std::size_t>& kept) {
  std::vector<bool> keep(m, false);
  for (std::size_t k : kept) keep[k] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m; ++i) {
    if (!keep[i]) out.push_back(i);
  }
  return out;
}

struct Selection {
  ScoreVector scores;
  std::vector<std::size_t> kept;
};

std::string describe(std::size_t m, std::size_t beta) {
  return " (M=" + std::to_string(m) + ", beta=" + std::to_string(beta) + ")";
}

Selection select_krum(std::span<const ModelParams> models, std::size_t beta) {
  ScoreVector scores = krum_score(models, beta);
  const std::vector<std::size_t> order = ascending_order(scores.values);
  return {std::move(scores), {order.front()}};
}

Selection select_trimmed(std::span<const ModelParams> models, std::size_t beta) {
  ScoreVector scores = trimmed_mean_score(models);
  const std::vector<std::size_t> order = ascending_order(scores.values);
  std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(beta),
                                order.end() - static_cast<std::ptrdiff_t>(beta));
  return {std::move(scores), std::move(kept)};
}

Selection select_fang(std::span<const ModelParams> models, const RuleConfig& config) {
  ScoreVector scores = fang_score(models, config);
  const std::vector<std::size_t> order = ascending_order(scores.values);
  const auto beta = static_cast<std::ptrdiff_t>(config.beta);
  std::vector<std::size_t> kept = config.fang_discard == FangDiscard::Lowest
                                      ? std::vector<std::size_t>(order.begin() + beta, order.end())
                                      : std::vector<std::size_t>(order.begin(), order.end() - beta);
  return {std::move(scores), std::move(kept)};
}

Selection select_dummy_contrastive(std::span<const ModelParams> models, const ModelParams& prev_global,
                                   const RuleConfig& config) {
  ScoreVector scores = dummy_contrastive_score(models, prev_global, *config.dummy);
  const std::vector<std::size_t> order = ascending_order(scores.values);
  std::vector<std::size_t> kept(order.begin(), order.end() - static_cast<std::ptrdiff_t>(config.beta));
  return {std::move(scores), std::move(kept)};
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

std::string_view to_string(RuleKind rule) {
  switch (rule) {
    case RuleKind::FedAvg: return "fedavg";
    case RuleKind::Krum: return "krum";
    case RuleKind::TrimmedMean: return "trimmed_mean";
    case RuleKind::Fang: return "fang";
    case RuleKind::DummyContrastive: return "dummy_contrastive";
  }
  return "unknown";
}

RuleKind parse_rule_kind(std::string_view name) {
  const std::string key = normalized_name(name);
  if (key == "fedavg") return RuleKind::FedAvg;
  if (key == "krum") return RuleKind::Krum;
  if (key == "trimmed_mean" || key == "trimmedmean") return RuleKind::TrimmedMean;
  if (key == "fang") return RuleKind::Fang;
  if (key == "dummy_contrastive" || key == "dummycontrastive") return RuleKind::DummyContrastive;
  throw ConfigError("unknown rule '" + std::string(name) +
                    "' (expected fedavg, krum, trimmed_mean, fang, dummy_contrastive)");
}

std::string_view to_string(FangDiscard discard) {
  return discard == FangDiscard::Lowest ? "lowest" : "highest";
}

FangDiscard parse_fang_discard(std::string_view name) {
  const std::string key = normalized_name(name);
  if (key == "lowest") return FangDiscard::Lowest;
  if (key == "highest") return FangDiscard::Highest;
  throw ConfigError("fang_discard must be lowest or highest, got '" + std::string(name) + "'");
}

void RuleConfig::validate(std::size_t num_models) const {
  const std::size_t m = num_models;
  if (m == 0) throw ConfigError("aggregation needs at least one model");
  switch (rule) {
    case RuleKind::FedAvg:
      break;
    case RuleKind::Krum:
      if (m < beta + 3) {
        throw ConfigError("Krum requires M-beta-2 >= 1" + describe(m, beta));
      }
      break;
    case RuleKind::TrimmedMean:
      if (2 * beta >= m) {
        throw ConfigError("TrimmedMean requires beta < M/2: beta should be smaller than M/2" +
                          describe(m, beta));
      }
      break;
    case RuleKind::Fang:
      if (m < 2 * beta + 2) {
        throw ConfigError("Fang requires M-1-2*beta >= 1 so the leave-one-out trimmed mean is nonempty" +
                          describe(m, beta));
      }
      if (server_data == nullptr || server_data->empty()) {
        throw ConfigError("Fang requires a nonempty server dataset");
      }
      break;
    case RuleKind::DummyContrastive:
      if (beta >= m) {
        throw ConfigError("DummyContrastive requires beta < M" + describe(m, beta));
      }
      if (dummy == nullptr || dummy->inputs.rows() == 0) {
        throw ConfigError("DummyContrastive requires a dummy input set");
      }
      break;
  }
}

double pairwise_sq_dist(const ModelParams& a, const ModelParams& b) {
  require_same_arch(a, b);
  double total = 0.0;
  for (std::size_t k = 0; k < a.theta.size(); ++k) {
    const double d = a.theta[k] - b.theta[k];
    total += d * d;
  }
  return total;
}

std::vector<std::size_t> ascending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

ModelParams fedavg(std::span<const ModelParams> models) {
  require_models(models);
  std::vector<std::size_t> all(models.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return mean_of(models, std::move(all));
}

ScoreVector krum_score(std::span<const ModelParams> models, std::size_t beta) {
  require_models(models);
  RuleConfig{RuleKind::Krum, beta}.validate(models.size());
  const std::size_t m = models.size();
  const std::size_t neighbours = m - beta - 2;

  std::vector<double> dist(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      dist[i * m + j] = dist[j * m + i] = pairwise_sq_dist(models[i], models[j]);
    }
  }

  ScoreVector scores{RuleKind::Krum, std::vector<double>(m, 0.0)};
  std::vector<double> others;
  for (std::size_t i = 0; i < m; ++i) {
    others.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) others.push_back(dist[i * m + j]);
    }
    // Stable order keeps lower indices first among equal distances.
    const std::vector<std::size_t> order = ascending_order(others);
    for (std::size_t k = 0; k < neighbours; ++k) scores.values[i] += others[order[k]];
  }
  return scores;
}

ModelParams krum_select(std::span<const ModelParams> models, const RuleConfig& config) {
  const Selection s = select_krum(models, config.beta);
  return models[s.kept.front()];
}

ScoreVector trimmed_mean_score(std::span<const ModelParams> models) {
  require_models(models);
  const std::size_t m = models.size();
  ScoreVector scores{RuleKind::TrimmedMean, std::vector<double>(m, 0.0)};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) scores.values[i] += pairwise_sq_dist(models[j], models[i]);
    }
  }
  return scores;
}

ModelParams trimmed_mean(std::span<const ModelParams> models, const RuleConfig& config) {
  require_models(models);
  RuleConfig{RuleKind::TrimmedMean, config.beta}.validate(models.size());
  Selection s = select_trimmed(models, config.beta);
  return mean_of(models, std::move(s.kept));
}

ScoreVector fang_score(std::span<const ModelParams> models, const RuleConfig& config) {
  require_models(models);
  RuleConfig checked = config;
  checked.rule = RuleKind::Fang;
  checked.validate(models.size());
  const LabeledBatch& server = *config.server_data;
  server.validate(models.front().arch.num_classes);

  const std::size_t m = models.size();
  const RuleConfig trim{RuleKind::TrimmedMean, config.beta};
  const double loss_all = batch_loss(trimmed_mean(models, trim), server);

  ScoreVector scores{RuleKind::Fang, std::vector<double>(m, 0.0)};
  std::vector<ModelParams> rest;
  rest.reserve(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    rest.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) rest.push_back(models[j]);
    }
    scores.values[i] = loss_all - batch_loss(trimmed_mean(rest, trim), server);
  }
  return scores;
}

ModelParams fang_aggregate(std::span<const ModelParams> models, const RuleConfig& config) {
  Selection s = select_fang(models, config);
  return mean_of(models, std::move(s.kept));
}

double bce_logits(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InputError("bce_logits length mismatch: " + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
  if (x.empty()) throw InputError("bce_logits of empty vectors");
  double total = 0.0;
  for (std::size_t o = 0; o < x.size(); ++o) {
    total += y[o] * softplus(-x[o]) + (1.0 - y[o]) * softplus(x[o]);
  }
  return total / static_cast<double>(x.size());
}

double bce_logits(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) throw InputError("bce_logits shape mismatch");
  if (x.rows() == 0) throw InputError("bce_logits of an empty matrix");
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) total += bce_logits(x.row(r), y.row(r));
  return total / static_cast<double>(x.rows());
}

ScoreVector dummy_contrastive_score(std::span<const ModelParams> models,
                                    const ModelParams& prev_global, const DummySet& dummy) {
  require_models(models);
  require_same_arch(models.front(), prev_global);
  const std::size_t m = models.size();
  const Matrix anchor = project(prev_global, dummy.inputs);

  std::vector<double> to_anchor(m);
  for (std::size_t i = 0; i < m; ++i) to_anchor[i] = bce_logits(anchor, project(models[i], dummy.inputs));

  ScoreVector scores{RuleKind::DummyContrastive, std::vector<double>(m, 0.0)};
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += to_anchor[j] + to_anchor[i];
    scores.values[i] = s;
  }
  return scores;
}

ModelParams dummy_contrastive_aggregate(std::span<const ModelParams> models,
                                        const ModelParams& prev_global, const RuleConfig& config) {
  require_models(models);
  RuleConfig checked = config;
  checked.rule = RuleKind::DummyContrastive;
  checked.validate(models.size());
  Selection s = select_dummy_contrastive(models, prev_global, config);
  return mean_of(models, std::move(s.kept));
}

Aggregate aggregate(std::span<const ModelParams> models, const ModelParams& prev_global,
                    const RuleConfig& config) {
  require_models(models);
  config.validate(models.size());
  const std::size_t m = models.size();

  Selection s;
  switch (config.rule) {
    case RuleKind::FedAvg:
      s.scores = ScoreVector{RuleKind::FedAvg, std::vector<double>(m, 0.0)};
      s.kept.resize(m);
      std::iota(s.kept.begin(), s.kept.end(), std::size_t{0});
      break;
    case RuleKind::Krum:
      s = select_krum(models, config.beta);
      break;
    case RuleKind::TrimmedMean:
      s = select_trimmed(models, config.beta);
      break;
    case RuleKind::Fang:
      s = select_fang(models, config);
      break;
    case RuleKind::DummyContrastive:
      s = select_dummy_contrastive(models, prev_global, config);
      break;
  }

  Aggregate out;
  out.excluded = complement(m, s.kept);
  out.model = config.rule == RuleKind::Krum ? models[s.kept.front()] : mean_of(models, std::move(s.kept));
  out.scores = std::move(s.scores);
  return out;
}

}  // namespace robustfl
