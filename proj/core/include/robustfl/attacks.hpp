#pragma once

#include <string>
#include <string_view>

#include "robustfl/mlp.hpp"
#include "robustfl/rng.hpp"

namespace robustfl {

enum class AttackKind { None, Targeted, Untargeted };

std::string_view to_string(AttackKind kind);
/// Accepts none|targeted|untargeted (case-insensitive); throws ConfigError otherwise.
AttackKind parse_attack_kind(std::string_view name);

struct AttackConfig {
  AttackKind kind = AttackKind::None;
  double lambda = 10.0;  // boosting factor of the targeted attack
  double eta = 10.0;     // scale of the untargeted fake update

  void validate() const;
};

/// Boosted honest update: theta + lambda * (theta - theta_global).
ModelParams targeted_attack(const ModelParams& local, const ModelParams& global_model, double lambda);

/// Fake update eta * (theta' - theta_global) with theta' ~ N(0, I). Uses no
/// local data and performs no training.
ModelParams untargeted_attack(const ModelParams& global_model, double eta, Rng& rng);

}  // namespace robustfl
