#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "robustfl/matrix.hpp"
#include "robustfl/mlp.hpp"

namespace robustfl {

/// Train/test split of a labelled classification task.
struct Dataset {
  LabeledBatch train;
  LabeledBatch test;
  std::size_t num_classes = 0;
  std::size_t input_dim() const { return train.inputs.cols(); }
};

/// Pairwise distance between the synthetic class centres.
inline constexpr double kCenterDistance = 4.0;

/// Unit-variance Gaussian blobs around `num_classes` centres on a regular
/// simplex (scaled basis vectors, centred at the origin) with pairwise centre
/// distance kCenterDistance. Each class contributes per_class examples,
/// split 80/20 into train/test (at least one test example per class).
/// Requires input_dim >= num_classes and per_class >= 2.
Dataset generate_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t input_dim,
                           std::uint64_t seed);

/// Training examples per class produced by generate_synthetic.
std::size_t synthetic_train_per_class(std::size_t per_class);

/// Class centre coordinates used by generate_synthetic, num_classes x input_dim.
Matrix synthetic_centers(std::size_t num_classes, std::size_t input_dim);

struct PartitionSpec {
  std::size_t num_devices = 10;
  double alpha = 1.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError unless num_devices >= 3 and alpha > 0.
  void validate() const;
};

using Shard = std::vector<std::size_t>;

/// Per-device example counts: proportions drawn once from Dirichlet(alpha * 1_M),
/// rounded by largest remainder, then topped up so every device holds >= 1
/// example (taken from the currently largest shard).
std::vector<std::size_t> quantity_skew_counts(std::size_t total, const PartitionSpec& spec);

/// Splits the indices [0, train_size) into spec.num_devices disjoint shards
/// whose sizes follow quantity_skew_counts. Indices are shuffled before being
/// dealt out, so label composition within a shard is a uniform random draw.
std::vector<Shard> quantity_skew_partition(const LabeledBatch& train, const PartitionSpec& spec);

/// Gaussian dummy inputs, i.i.d. N(0, 1), dummy_count x input_dim.
struct DummySet {
  Matrix inputs;
};

DummySet generate_dummies(std::size_t dummy_count, std::size_t input_dim, std::uint64_t seed);

/// CSV dump: one row per example, `x0,...,x{d-1},label,split` with split in {train,test}.
void write_dataset_csv(std::ostream& out, const Dataset& dataset);
/// Inverse of write_dataset_csv. num_classes is max label + 1.
Dataset read_dataset_csv(std::istream& in);

}  // namespace robustfl
