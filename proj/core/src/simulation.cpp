#include "robustfl/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "robustfl/error.hpp"

namespace robustfl {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kPartitionStream = 2;
constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kDummyStream = 4;
constexpr std::uint64_t kDeviceStream = 5;
constexpr std::uint64_t kServerStream = 6;

}  // namespace

std::size_t ExperimentConfig::num_compromised() const {
  return static_cast<std::size_t>(std::llround(compromised_fraction * static_cast<double>(num_devices)));
}

void ExperimentConfig::validate() const {
  if (num_devices < 3) throw ConfigError("M must be >= 3, got " + std::to_string(num_devices));
  if (rounds < 1) throw ConfigError("G (rounds) must be >= 1");
  if (local_epochs < 1) throw ConfigError("L (local_epochs) must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("lr must be >= 0");
  if (!(compromised_fraction >= 0.0 && compromised_fraction < 1.0)) {
    throw ConfigError("p must satisfy 0 <= p < 1");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be > 0");
  if (dummy_count < 1) throw ConfigError("dummy_count must be >= 1");
  if (anchor_lag < 1) throw ConfigError("anchor_lag must be >= 1");
  if (per_class < 2) throw ConfigError("per_class must be >= 2");
  if (server_per_class < 2) throw ConfigError("server_per_class must be >= 2");
  if (input_dim < num_classes) throw ConfigError("input_dim must be >= num_classes");
  if (num_classes * synthetic_train_per_class(per_class) < num_devices) {
    throw ConfigError("training set is smaller than M");
  }
  architecture().validate();
  attack.validate();

  const LabeledBatch placeholder_data{Matrix(1, 1), {0}};
  const DummySet placeholder_dummy{Matrix(1, 1)};
  RuleConfig{rule, effective_beta(), &placeholder_data, &placeholder_dummy, fang_discard}.validate(num_devices);
}

Rng device_round_rng(const DeviceState& device, std::size_t round) {
  return Rng(derive_seed(device.rng_seed, {round}));
}

ModelParams local_train(const DeviceState& device, const ModelParams& global_model,
                        const ExperimentConfig& config, Rng& rng) {
  if (device.shard.empty()) {
    throw InputError("device " + std::to_string(device.index) + " has an empty shard");
  }
  ModelParams model = global_model;
  std::vector<std::size_t> order(device.shard.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const LabeledBatch batch =
          gather(device.shard, std::span<const std::size_t>(order).subspan(start, stop - start));
      model = sgd_step(model, backward(model, batch), config.learning_rate);
    }
  }
  return model;
}

Simulation::Simulation(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::uint64_t seed = config_.seed;
  dataset_ = generate_synthetic(config_.num_classes, config_.per_class, config_.input_dim,
                                derive_seed(seed, {kDataStream}));
  server_data_ = generate_synthetic(config_.num_classes, config_.server_per_class, config_.input_dim,
                                    derive_seed(seed, {kServerStream}))
                     .train;
  dummies_ = generate_dummies(config_.dummy_count, config_.input_dim, derive_seed(seed, {kDummyStream}));

  const std::vector<Shard> shards = quantity_skew_partition(
      dataset_.train, PartitionSpec{config_.num_devices, config_.alpha, derive_seed(seed, {kPartitionStream})});
  const std::size_t compromised = config_.num_compromised();
  devices_.reserve(config_.num_devices);
  for (std::size_t d = 0; d < config_.num_devices; ++d) {
    devices_.push_back(DeviceState{d, d < compromised ? DeviceRole::Compromised : DeviceRole::Benign, shards[d],
                                   gather(dataset_.train, shards[d]), derive_seed(seed, {kDeviceStream, d})});
  }

  Rng init_rng(derive_seed(seed, {kInitStream}));
  global_ = glorot_init(config_.architecture(), init_rng);
  history_.push_back(global_);
}

void Simulation::set_device_shard(std::size_t device, LabeledBatch shard) {
  devices_.at(device).shard = std::move(shard);
  devices_.at(device).shard_indices.clear();
}

RoundMetrics Simulation::run_round() {
  const std::size_t g = round_;
  const ModelParams& broadcast = global_;

  std::vector<ModelParams> updates;
  std::vector<std::size_t> origin;
  RoundMetrics metrics;
  metrics.round = g;
  for (const DeviceState& device : devices_) {
    if (device.shard.empty() && !(device.role == DeviceRole::Compromised &&
                                  config_.attack.kind == AttackKind::Untargeted)) {
      ++metrics.skipped_devices;
      continue;
    }
    Rng rng = device_round_rng(device, g);
    if (device.role == DeviceRole::Benign) {
      updates.push_back(local_train(device, broadcast, config_, rng));
      ++metrics.benign_updates;
    } else {
      switch (config_.attack.kind) {
        case AttackKind::None:
          updates.push_back(local_train(device, broadcast, config_, rng));
          break;
        case AttackKind::Targeted:
          updates.push_back(
              targeted_attack(local_train(device, broadcast, config_, rng), broadcast, config_.attack.lambda));
          break;
        case AttackKind::Untargeted:
          updates.push_back(untargeted_attack(broadcast, config_.attack.eta, rng));
          break;
      }
      ++metrics.compromised_updates;
    }
    origin.push_back(device.index);
  }

  DummySet round_dummies;
  const DummySet* dummies = &dummies_;
  if (config_.regenerate_dummies) {
    round_dummies = generate_dummies(config_.dummy_count, config_.input_dim,
                                     derive_seed(config_.seed, {kDummyStream, g + 1}));
    dummies = &round_dummies;
  }
  const RuleConfig rule{config_.rule, config_.effective_beta(), &server_data_, dummies, config_.fang_discard};
  Aggregate result = aggregate(updates, history_.front(), rule);

  for (std::size_t pos : result.excluded) metrics.excluded_devices.push_back(origin[pos]);
  metrics.scores = std::move(result.scores);

  global_ = std::move(result.model);
  history_.push_back(global_);
  if (history_.size() > config_.anchor_lag) history_.erase(history_.begin());
  ++round_;

  metrics.test_accuracy = accuracy(global_, dataset_.test);
  metrics.test_error = 1.0 - metrics.test_accuracy;
  return metrics;
}

std::vector<RoundMetrics> run_experiment(const ExperimentConfig& config) {
  Simulation sim(config);
  std::vector<RoundMetrics> trace;
  trace.reserve(config.rounds);
  for (std::size_t g = 0; g < config.rounds; ++g) trace.push_back(sim.run_round());
  return trace;
}

double min_test_error(std::span<const RoundMetrics> metrics) {
  if (metrics.empty()) throw InputError("min_test_error of an empty trace");
  double best = metrics.front().test_error;
  for (const RoundMetrics& m : metrics) best = std::min(best, m.test_error);
  return best;
}

}  // namespace robustfl
