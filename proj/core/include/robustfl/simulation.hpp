#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "robustfl/aggregation.hpp"
#include "robustfl/attacks.hpp"
#include "robustfl/data.hpp"
#include "robustfl/mlp.hpp"

namespace robustfl {

/// Everything that determines one federated run. Defaults are the desk-scale
/// setting: 10 devices, 150 rounds, 2 local epochs, batch 32, lr 0.05, a
/// 4-class 16-dimensional synthetic task and a 16->64->32->4 network.
struct ExperimentConfig {
  std::size_t num_devices = 10;   // M
  std::size_t rounds = 150;       // G
  std::size_t local_epochs = 2;   // L
  std::size_t batch_size = 32;
  double learning_rate = 0.05;    // gamma
  /// Number of models the robust rules discard. Unset means beta = C.
  std::optional<std::size_t> beta;
  double compromised_fraction = 0.0;  // p; C = round(p * M)
  double alpha = 1.0;                 // quantity-skew Dirichlet concentration
  AttackConfig attack;
  RuleKind rule = RuleKind::FedAvg;
  FangDiscard fang_discard = FangDiscard::Lowest;
  std::size_t dummy_count = 16;
  bool regenerate_dummies = false;
  /// 1: the anchor is the model broadcast this round; 2: the one before, ...
  std::size_t anchor_lag = 1;
  std::uint64_t seed = 1;

  std::size_t num_classes = 4;
  std::size_t per_class = 500;
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden_dims{64, 32};
  std::size_t server_per_class = 10;  // size of Fang's server-held dataset

  std::size_t num_compromised() const;
  std::size_t effective_beta() const { return beta.value_or(num_compromised()); }
  MlpArchitecture architecture() const { return {input_dim, hidden_dims, num_classes}; }

  /// Throws ConfigError naming the first violated constraint, including the
  /// aggregation rule's constraints on (M, beta).
  void validate() const;
};

enum class DeviceRole { Benign, Compromised };

struct DeviceState {
  std::size_t index = 0;
  DeviceRole role = DeviceRole::Benign;
  Shard shard_indices;
  LabeledBatch shard;
  std::uint64_t rng_seed = 0;
};

struct RoundMetrics {
  std::size_t round = 0;  // g_e, zero-based
  double test_accuracy = 0.0;
  double test_error = 1.0;
  ScoreVector scores;
  std::vector<std::size_t> excluded_devices;  // device indices, ascending
  std::size_t benign_updates = 0;
  std::size_t compromised_updates = 0;
  std::size_t skipped_devices = 0;
};

/// L local epochs of mini-batch SGD from `global_model` over the device's
/// shard, reshuffled every epoch from `rng`. Throws InputError on an empty shard.
ModelParams local_train(const DeviceState& device, const ModelParams& global_model,
                        const ExperimentConfig& config, Rng& rng);

/// Per-device, per-round random stream; independent of execution order.
Rng device_round_rng(const DeviceState& device, std::size_t round);

/// Federated run state: data, devices, and the current global model.
class Simulation {
 public:
  explicit Simulation(ExperimentConfig config);

  /// One global epoch: local updates, attacks, aggregation, evaluation.
  RoundMetrics run_round();

  const ExperimentConfig& config() const { return config_; }
  const Dataset& dataset() const { return dataset_; }
  const std::vector<DeviceState>& devices() const { return devices_; }
  const LabeledBatch& server_data() const { return server_data_; }
  const DummySet& dummies() const { return dummies_; }
  const ModelParams& global_model() const { return global_; }
  /// Anchor used by the dummy contrastive rule in the next round.
  const ModelParams& anchor() const { return history_.front(); }
  std::size_t current_round() const { return round_; }

  /// Test-only hook: replaces a device's shard (e.g. with an empty one).
  void set_device_shard(std::size_t device, LabeledBatch shard);

 private:
  ExperimentConfig config_;
  Dataset dataset_;
  LabeledBatch server_data_;
  DummySet dummies_;
  std::vector<DeviceState> devices_;
  ModelParams global_;
  // Last anchor_lag broadcast models, oldest first.
  std::vector<ModelParams> history_;
  std::size_t round_ = 0;
};

std::vector<RoundMetrics> run_experiment(const ExperimentConfig& config);

/// Minimum test error over a metric trace. Throws InputError when empty.
double min_test_error(std::span<const RoundMetrics> metrics);

}  // namespace robustfl
