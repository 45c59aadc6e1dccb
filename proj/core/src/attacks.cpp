#include "robustfl/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "robustfl/error.hpp"

namespace robustfl {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::Targeted: return "targeted";
    case AttackKind::Untargeted: return "untargeted";
  }
  return "unknown";
}

AttackKind parse_attack_kind(std::string_view name) {
  const std::string key = lowercase(name);
  if (key == "none") return AttackKind::None;
  if (key == "targeted") return AttackKind::Targeted;
  if (key == "untargeted") return AttackKind::Untargeted;
  throw ConfigError("unknown attack '" + std::string(name) + "' (expected none, targeted, untargeted)");
}

void AttackConfig::validate() const {
  if (kind == AttackKind::Targeted && !(lambda >= 0.0 && std::isfinite(lambda))) {
    throw ConfigError("lambda must be >= 0 for the targeted attack");
  }
  if (kind == AttackKind::Untargeted && !(eta >= 0.0 && std::isfinite(eta))) {
    throw ConfigError("eta must be >= 0 for the untargeted attack");
  }
}

ModelParams targeted_attack(const ModelParams& local, const ModelParams& global_model, double lambda) {
  require_same_arch(local, global_model);
  ModelParams out = local;
  for (std::size_t i = 0; i < out.theta.size(); ++i) {
    out.theta[i] += lambda * (local.theta[i] - global_model.theta[i]);
  }
  return out;
}

ModelParams untargeted_attack(const ModelParams& global_model, double eta, Rng& rng) {
  ModelParams out = global_model;
  for (double& v : out.theta) v = eta * (rng.normal() - v);
  return out;
}

}  // namespace robustfl
