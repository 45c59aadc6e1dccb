#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "robustfl/data.hpp"
#include "robustfl/mlp.hpp"

namespace robustfl {

enum class RuleKind { FedAvg, Krum, TrimmedMean, Fang, DummyContrastive };

std::string_view to_string(RuleKind rule);
/// Accepts fedavg|krum|trimmed_mean|fang|dummy_contrastive (case-insensitive,
/// '-' and '_' interchangeable).
RuleKind parse_rule_kind(std::string_view name);

/// Which end of the Fang error-rate ranking is discarded. The default follows
/// the published rule (drop the beta lowest scores).
enum class FangDiscard { Lowest, Highest };

std::string_view to_string(FangDiscard discard);
FangDiscard parse_fang_discard(std::string_view name);

/// Server-side rule and its context. The pointers are non-owning and must
/// outlive any call that receives the config.
struct RuleConfig {
  RuleKind rule = RuleKind::FedAvg;
  std::size_t beta = 0;
  const LabeledBatch* server_data = nullptr;  // Fang only
  const DummySet* dummy = nullptr;            // DummyContrastive only
  FangDiscard fang_discard = FangDiscard::Lowest;

  /// Checks the rule's constraints for `num_models` received models. Throws
  /// ConfigError naming the violated inequality:
  ///   Krum              M-beta-2 >= 1
  ///   TrimmedMean       beta < M/2
  ///   Fang              M-1-2*beta >= 1, server data present
  ///   DummyContrastive  beta < M, dummy set present
  void validate(std::size_t num_models) const;
};

struct ScoreVector {
  RuleKind rule = RuleKind::FedAvg;
  std::vector<double> values;
};

/// Result of one aggregation step. `excluded` lists the positions (into the
/// input model list, ascending) that did not contribute to `model`.
struct Aggregate {
  ModelParams model;
  ScoreVector scores;
  std::vector<std::size_t> excluded;
};

/// Squared Euclidean distance between flattened parameter vectors.
double pairwise_sq_dist(const ModelParams& a, const ModelParams& b);

/// Indices that sort `scores` ascending; equal scores keep index order.
std::vector<std::size_t> ascending_order(std::span<const double> scores);

/// Unweighted elementwise mean.
ModelParams fedavg(std::span<const ModelParams> models);

/// Krum: score_i is the sum of squared distances from model i to its
/// M-beta-2 nearest other models (ties by lower index).
ScoreVector krum_score(std::span<const ModelParams> models, std::size_t beta);
ModelParams krum_select(std::span<const ModelParams> models, const RuleConfig& config);

/// score_i = sum over all j of ||theta_j - theta_i||^2 (the self term is zero).
ScoreVector trimmed_mean_score(std::span<const ModelParams> models);
/// Sorts by trimmed_mean_score, drops the beta lowest and beta highest, and
/// averages the remaining M-2*beta.
ModelParams trimmed_mean(std::span<const ModelParams> models, const RuleConfig& config);

/// Fang error-rate score with a server-held dataset D_g:
///   score_i = CE(A; D_g) - CE(B_i; D_g)
/// where A is the trimmed mean of all M models and B_i the trimmed mean of
/// the M-1 models other than i, both with the same beta.
ScoreVector fang_score(std::span<const ModelParams> models, const RuleConfig& config);
ModelParams fang_aggregate(std::span<const ModelParams> models, const RuleConfig& config);

/// Binary cross-entropy of logits x against raw targets y:
///   (1/O) sum_o  y_o * softplus(-x_o) + (1 - y_o) * softplus(x_o)
/// which equals -(y log sigma(x) + (1-y) log(1-sigma(x))) without overflow.
/// y is not required to lie in [0, 1].
double bce_logits(std::span<const double> x, std::span<const double> y);
/// Row-wise bce_logits averaged over rows.
double bce_logits(const Matrix& x, const Matrix& y);

/// Dummy contrastive score. With p_m the projected features of model m on
/// the dummy inputs and p_g those of the anchor (previous global model):
///   s_i = sum_j ( BCE(p_g; p_j) + BCE(p_g; p_i) )
/// The first term is common to every device, so the ranking is that of
/// BCE(p_g; p_i): models whose features agree with the anchor score low.
ScoreVector dummy_contrastive_score(std::span<const ModelParams> models,
                                    const ModelParams& prev_global, const DummySet& dummy);
/// Drops the beta highest-scored models and averages the remaining M-beta.
ModelParams dummy_contrastive_aggregate(std::span<const ModelParams> models,
                                        const ModelParams& prev_global, const RuleConfig& config);

/// Applies `config.rule` and reports scores and exclusions. `prev_global` is
/// the anchor for DummyContrastive and ignored by the other rules.
Aggregate aggregate(std::span<const ModelParams> models, const ModelParams& prev_global,
                    const RuleConfig& config);

}  // namespace robustfl
