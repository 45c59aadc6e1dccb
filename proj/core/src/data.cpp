#include "robustfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "robustfl/error.hpp"

namespace robustfl {

Matrix synthetic_centers(std::size_t num_classes, std::size_t input_dim) {
  if (input_dim < num_classes) {
    throw ConfigError("synthetic data needs input_dim >= num_classes (input_dim=" +
                      std::to_string(input_dim) + ", num_classes=" + std::to_string(num_classes) + ")");
  }
  // Scaled basis vectors e_k * d/sqrt(2) are pairwise d apart; subtracting
  // their centroid keeps the distances.
  const double scale = kCenterDistance / std::sqrt(2.0);
  const double centroid = scale / static_cast<double>(num_classes);
  Matrix centers(num_classes, input_dim);
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t j = 0; j < num_classes; ++j) centers(k, j) = (j == k ? scale : 0.0) - centroid;
  }
  return centers;
}

std::size_t synthetic_train_per_class(std::size_t per_class) {
  const auto test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(per_class)));
  return per_class - std::clamp<std::size_t>(test, 1, per_class);
}

Dataset generate_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t input_dim,
                           std::uint64_t seed) {
  if (num_classes == 0 || input_dim == 0) throw ConfigError("num_classes and input_dim must be >= 1");
  if (per_class < 2) throw ConfigError("per_class must be >= 2 so every class reaches both splits");
  const Matrix centers = synthetic_centers(num_classes, input_dim);

  const std::size_t train_per_class = synthetic_train_per_class(per_class);
  const std::size_t test_per_class = per_class - train_per_class;

  Rng rng(seed);
  Matrix train_x(num_classes * train_per_class, input_dim);
  Matrix test_x(num_classes * test_per_class, input_dim);
  std::vector<std::size_t> train_y;
  std::vector<std::size_t> test_y;
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const bool is_train = i < train_per_class;
      auto row = is_train ? train_x.row(train_y.size()) : test_x.row(test_y.size());
      for (std::size_t j = 0; j < input_dim; ++j) row[j] = centers(k, j) + rng.normal();
      (is_train ? train_y : test_y).push_back(k);
    }
  }

  auto shuffled = [&rng](Matrix x, std::vector<std::size_t> y) {
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    return gather(LabeledBatch{std::move(x), std::move(y)}, order);
  };
  Dataset ds;
  ds.train = shuffled(std::move(train_x), std::move(train_y));
  ds.test = shuffled(std::move(test_x), std::move(test_y));
  ds.num_classes = num_classes;
  return ds;
}

void PartitionSpec::validate() const {
  if (num_devices < 3) {
    throw ConfigError("num_devices M must be >= 3, got " + std::to_string(num_devices));
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be a positive finite number");
}

std::vector<std::size_t> quantity_skew_counts(std::size_t total, const PartitionSpec& spec) {
  spec.validate();
  const std::size_t m = spec.num_devices;
  if (total < m) {
    throw InputError("cannot partition " + std::to_string(total) + " examples over " +
                     std::to_string(m) + " devices");
  }
  Rng rng(spec.seed);
  std::vector<double> proportions(m);
  double sum = 0.0;
  for (double& p : proportions) {
    p = rng.gamma(spec.alpha);
    sum += p;
  }
  if (!(sum > 0.0)) {
    // Every gamma draw underflowed (tiny alpha): fall back to one device.
    std::fill(proportions.begin(), proportions.end(), 0.0);
    proportions[0] = 1.0;
    sum = 1.0;
  }

  std::vector<std::size_t> counts(m);
  std::vector<double> remainders(m);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double exact = proportions[i] / sum * static_cast<double>(total);
    counts[i] = std::min(total, static_cast<std::size_t>(std::floor(exact)));
    remainders[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % m, ++assigned) ++counts[order[k]];

  for (std::size_t i = 0; i < m; ++i) {
    while (counts[i] == 0) {
      const auto largest = std::max_element(counts.begin(), counts.end());
      --*largest;
      ++counts[i];
    }
  }
  return counts;
}

std::vector<Shard> quantity_skew_partition(const LabeledBatch& train, const PartitionSpec& spec) {
  const std::vector<std::size_t> counts = quantity_skew_counts(train.size(), spec);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, {1}));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<Shard> shards(counts.size());
  std::size_t next = 0;
  for (std::size_t d = 0; d < counts.size(); ++d) {
    shards[d].assign(order.begin() + static_cast<std::ptrdiff_t>(next),
                     order.begin() + static_cast<std::ptrdiff_t>(next + counts[d]));
    next += counts[d];
  }
  return shards;
}

DummySet generate_dummies(std::size_t dummy_count, std::size_t input_dim, std::uint64_t seed) {
  if (dummy_count == 0 || input_dim == 0) throw ConfigError("dummy_count and input_dim must be >= 1");
  Rng rng(seed);
  DummySet dummies{Matrix(dummy_count, input_dim)};
  for (double& v : dummies.inputs.values()) v = rng.normal();
  return dummies;
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  const std::size_t dim = dataset.input_dim();
  for (std::size_t j = 0; j < dim; ++j) out << 'x' << j << ',';
  out << "label,split\n";
  out << std::setprecision(17);
  auto dump = [&](const LabeledBatch& part, const char* tag) {
    for (std::size_t r = 0; r < part.size(); ++r) {
      for (double v : part.inputs.row(r)) out << v << ',';
      out << part.labels[r] << ',' << tag << '\n';
    }
  };
  dump(dataset.train, "train");
  dump(dataset.test, "test");
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset CSV is empty");
  const std::size_t columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 3) throw InputError("dataset CSV needs at least one feature column");
  const std::size_t dim = columns - 2;

  std::vector<double> train_x;
  std::vector<double> test_x;
  std::vector<std::size_t> train_y;
  std::vector<std::size_t> test_y;
  std::size_t max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) {
      throw InputError("dataset CSV line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " fields, expected " + std::to_string(columns));
    }
    const bool is_train = cells.back() == "train";
    if (!is_train && cells.back() != "test") {
      throw InputError("dataset CSV line " + std::to_string(line_no) + ": unknown split '" + cells.back() + "'");
    }
    auto& xs = is_train ? train_x : test_x;
    try {
      for (std::size_t j = 0; j < dim; ++j) xs.push_back(std::stod(cells[j]));
      const std::size_t label = std::stoul(cells[dim]);
      (is_train ? train_y : test_y).push_back(label);
      max_label = std::max(max_label, label);
    } catch (const std::logic_error&) {
      throw InputError("dataset CSV line " + std::to_string(line_no) + " has a malformed number");
    }
  }
  Dataset ds;
  ds.train = LabeledBatch{Matrix(train_y.size(), dim, std::move(train_x)), std::move(train_y)};
  ds.test = LabeledBatch{Matrix(test_y.size(), dim, std::move(test_x)), std::move(test_y)};
  ds.num_classes = max_label + 1;
  return ds;
}

}  // namespace robustfl
