#include "robustfl/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "robustfl/error.hpp"

namespace robustfl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view key, std::string_view value) {
  std::vector<std::string_view> items;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = value.find(',', start);
    const std::string_view item = trim(value.substr(start, comma == std::string_view::npos ? value.npos : comma - start));
    if (item.empty()) throw ConfigError("key '" + std::string(key) + "': empty list element in '" + std::string(value) + "'");
    items.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("key '" + std::string(key) + "': expected a non-negative integer, got '" +
                      std::string(text) + "'");
  }
  return v;
}

double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError("key '" + std::string(key) + "': expected a real number, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "true" || lower == "1" || lower == "yes") return true;
  if (lower == "false" || lower == "0" || lower == "no") return false;
  throw ConfigError("key '" + std::string(key) + "': expected true or false, got '" + std::string(text) + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(std::string_view key, std::string_view value, Parse parse) {
  std::vector<T> out;
  for (std::string_view item : split_list(key, value)) out.push_back(parse(key, item));
  return out;
}

template <typename Fn>
auto wrap_key(std::string_view key, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind("key '", 0) == 0) throw;
    throw ConfigError("key '" + std::string(key) + "': " + what);
  }
}

using Setter = std::function<void(SweepSpec&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto size_field = [](std::size_t ExperimentConfig::*field) {
      return [field](SweepSpec& s, std::string_view k, std::string_view v) {
        s.base.*field = static_cast<std::size_t>(parse_unsigned(k, v));
      };
    };
    t["M"] = t["num_devices"] = size_field(&ExperimentConfig::num_devices);
    t["G"] = t["rounds"] = size_field(&ExperimentConfig::rounds);
    t["L"] = t["local_epochs"] = size_field(&ExperimentConfig::local_epochs);
    t["batch_size"] = size_field(&ExperimentConfig::batch_size);
    t["dummy_count"] = size_field(&ExperimentConfig::dummy_count);
    t["anchor_lag"] = size_field(&ExperimentConfig::anchor_lag);
    t["num_classes"] = size_field(&ExperimentConfig::num_classes);
    t["per_class"] = size_field(&ExperimentConfig::per_class);
    t["input_dim"] = size_field(&ExperimentConfig::input_dim);
    t["server_per_class"] = size_field(&ExperimentConfig::server_per_class);
    t["lr"] = t["learning_rate"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.base.learning_rate = parse_real(k, v);
    };
    t["eta"] = [](SweepSpec& s, std::string_view k, std::string_view v) { s.base.attack.eta = parse_real(k, v); };
    t["lambda"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.lambda_auto = v == "auto";
      if (!s.lambda_auto) s.base.attack.lambda = parse_real(k, v);
    };
    t["beta"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.beta_auto = v == "auto";
      s.base.beta.reset();
      if (!s.beta_auto) s.base.beta = static_cast<std::size_t>(parse_unsigned(k, v));
    };
    t["p"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.fractions = parse_list<double>(k, v, parse_real);
    };
    t["alpha"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.alphas = parse_list<double>(k, v, parse_real);
    };
    t["seed"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.seeds = parse_list<std::uint64_t>(k, v, parse_unsigned);
    };
    t["rule"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.rules = parse_list<RuleKind>(k, v, [](std::string_view key, std::string_view item) {
        return wrap_key(key, [&] { return parse_rule_kind(item); });
      });
    };
    t["attack"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.attacks = parse_list<AttackKind>(k, v, [](std::string_view key, std::string_view item) {
        return wrap_key(key, [&] { return parse_attack_kind(item); });
      });
    };
    t["hidden"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.base.hidden_dims = parse_list<std::size_t>(
          k, v, [](std::string_view key, std::string_view item) { return static_cast<std::size_t>(parse_unsigned(key, item)); });
    };
    t["fang_discard"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.base.fang_discard = wrap_key(k, [&] { return parse_fang_discard(v); });
    };
    t["regenerate_dummies"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.base.regenerate_dummies = parse_bool(k, v);
    };
    t["threads"] = [](SweepSpec& s, std::string_view k, std::string_view v) {
      s.threads = static_cast<std::size_t>(parse_unsigned(k, v));
    };
    return t;
  }();
  return table;
}

void apply(SweepSpec& spec, std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  if (value.empty()) throw ConfigError("key '" + std::string(key) + "' has an empty value");
  it->second(spec, key, value);
}

std::pair<std::string_view, std::string_view> split_assignment(std::string_view line, const std::string& where) {
  const std::size_t eq = line.find('=');
  if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value', got '" + std::string(line) + "'");
  const std::string_view key = trim(line.substr(0, eq));
  if (key.empty()) throw ConfigError(where + ": missing key before '='");
  return {key, trim(line.substr(eq + 1))};
}

std::string format_real(double v, const char* pattern) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

std::string join_indices(const std::vector<std::size_t>& indices) {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(indices[i]);
  }
  return out;
}

std::string point_prefix(const SweepPoint& p) {
  const ExperimentConfig& c = p.config;
  return p.run_id + ',' + std::string(to_string(c.rule)) + ',' + std::string(to_string(c.attack.kind)) + ',' +
         format_real(c.compromised_fraction, "%g") + ',' + format_real(c.alpha, "%g") + ',' +
         std::to_string(c.effective_beta()) + ',' + std::to_string(c.seed);
}

void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::size_t SweepSpec::num_points() const {
  return rules.size() * attacks.size() * fractions.size() * alphas.size() * seeds.size();
}

SweepSpec parse_config_text(std::string_view text, std::span<const std::string> overrides) {
  SweepSpec spec;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto [key, value] = split_assignment(line, "line " + std::to_string(line_no));
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + std::string(key) + "' given twice");
    }
    apply(spec, key, value);
  }
  for (const std::string& o : overrides) {
    const auto [key, value] = split_assignment(trim(o), "--set '" + o + "'");
    apply(spec, key, value);
  }

  const std::vector<SweepPoint> points = expand(spec);
  const bool any_runnable = std::any_of(points.begin(), points.end(), [](const SweepPoint& p) { return p.runnable(); });
  if (!any_runnable) throw ConfigError(points.front().skip_reason);
  return spec;
}

SweepSpec parse_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), overrides);
}

std::vector<SweepPoint> expand(const SweepSpec& spec) {
  std::vector<SweepPoint> points;
  points.reserve(spec.num_points());
  for (RuleKind rule : spec.rules) {
    for (AttackKind attack : spec.attacks) {
      for (double p : spec.fractions) {
        for (double alpha : spec.alphas) {
          for (std::uint64_t seed : spec.seeds) {
            SweepPoint point;
            point.ordinal = points.size();
            ExperimentConfig& c = point.config;
            c = spec.base;
            c.rule = rule;
            c.attack.kind = attack;
            c.compromised_fraction = p;
            c.alpha = alpha;
            c.seed = seed;
            if (spec.beta_auto) c.beta.reset();
            if (spec.lambda_auto) c.attack.lambda = static_cast<double>(c.num_devices);
            try {
              c.validate();
            } catch (const ConfigError& e) {
              point.skip_reason = "invalid configuration (rule=" + std::string(to_string(rule)) +
                                  ", p=" + format_real(p, "%g") + ", beta=" + std::to_string(c.effective_beta()) +
                                  "): " + e.what();
            }
            point.run_id = run_id(c);
            points.push_back(std::move(point));
          }
        }
      }
    }
  }
  return points;
}

std::string run_id(const ExperimentConfig& c) {
  std::ostringstream key;
  key.precision(17);
  key << "M=" << c.num_devices << ";G=" << c.rounds << ";L=" << c.local_epochs << ";batch=" << c.batch_size
      << ";lr=" << c.learning_rate << ";beta=" << c.effective_beta() << ";p=" << c.compromised_fraction
      << ";alpha=" << c.alpha << ";attack=" << to_string(c.attack.kind) << ";lambda=" << c.attack.lambda
      << ";eta=" << c.attack.eta << ";rule=" << to_string(c.rule) << ";fang=" << to_string(c.fang_discard)
      << ";dummies=" << c.dummy_count << ";regen=" << c.regenerate_dummies << ";lag=" << c.anchor_lag
      << ";seed=" << c.seed << ";classes=" << c.num_classes << ";per_class=" << c.per_class
      << ";input=" << c.input_dim << ";server=" << c.server_per_class << ";hidden=";
  for (std::size_t h : c.hidden_dims) key << h << ',';

  // FNV-1a, 64 bit.
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : key.str()) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::vector<PointResult> execute_sweep(const SweepSpec& spec) {
  std::vector<PointResult> results;
  for (SweepPoint& p : expand(spec)) results.push_back(PointResult{std::move(p), {}, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < results.size(); i = next++) {
      PointResult& r = results[i];
      if (!r.point.runnable()) continue;
      try {
        r.metrics = run_experiment(r.point.config);
      } catch (const std::exception& e) {
        r.error = e.what();
        r.metrics.clear();
      }
    }
  };
  std::size_t threads = spec.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : spec.threads;
  threads = std::min(threads, std::max<std::size_t>(1, results.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  return results;
}

void write_metrics_csv(std::ostream& out, std::span<const PointResult> results, bool header) {
  if (header) out << kMetricsHeader << '\n';
  for (const PointResult& r : results) {
    const std::string prefix = point_prefix(r.point);
    for (const RoundMetrics& m : r.metrics) {
      out << prefix << ',' << m.round << ',' << format_real(m.test_accuracy, "%.6f") << ','
          << format_real(m.test_error, "%.6f") << ',' << join_indices(m.excluded_devices) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, std::span<const PointResult> results) {
  out << kSummaryHeader << '\n';
  for (const PointResult& r : results) {
    out << point_prefix(r.point) << ',';
    if (r.ok() && !r.metrics.empty()) {
      out << format_real(min_test_error(r.metrics), "%.6f") << ',' << r.metrics.size() << ",ok\n";
    } else {
      std::string reason = r.point.runnable() ? "failed: " + r.error : "skipped: " + r.point.skip_reason;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      out << "nan,0," << reason << '\n';
    }
  }
}

void write_scores_csv(std::ostream& out, std::span<const PointResult> results, bool header) {
  if (header) out << kScoresHeader << '\n';
  for (const PointResult& r : results) {
    for (const RoundMetrics& m : r.metrics) {
      for (std::size_t d = 0; d < m.scores.values.size(); ++d) {
        out << r.point.run_id << ',' << m.round << ',' << d << ',' << format_real(m.scores.values[d], "%.17g")
            << '\n';
      }
    }
  }
}

int run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir) {
  const std::vector<PointResult> results = execute_sweep(spec);
  const std::filesystem::path runs_dir = out_dir / "runs";
  std::filesystem::create_directories(runs_dir);

  bool any_failed = false;
  for (const PointResult& r : results) {
    if (!r.point.runnable()) continue;
    any_failed = any_failed || !r.error.empty();
    write_atomically(runs_dir / (r.point.run_id + ".csv"),
                     [&](std::ostream& out) { write_metrics_csv(out, std::span(&r, 1)); });
  }
  write_atomically(out_dir / "metrics.csv", [&](std::ostream& out) { write_metrics_csv(out, results); });
  write_atomically(out_dir / "scores.csv", [&](std::ostream& out) { write_scores_csv(out, results); });
  write_atomically(out_dir / "summary.csv", [&](std::ostream& out) { write_summary_csv(out, results); });
  return any_failed ? kExitPartialFailure : kExitOk;
}

}  // namespace robustfl
