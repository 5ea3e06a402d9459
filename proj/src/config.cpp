#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <string>

#include "airdfl/error.hpp"
#include "airdfl/harness.hpp"

namespace airdfl {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidInput("bad numeric value for " + key + ": '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw InvalidInput("bad integer value for " + key + ": '" + v + "'");
  }
  return out;
}

}  // namespace

TopologyKind parse_topology(const std::string& s) {
  if (s == "rayleigh") return TopologyKind::rayleigh;
  if (s == "ring") return TopologyKind::ring;
  if (s == "complete") return TopologyKind::complete;
  if (s == "path") return TopologyKind::path;
  if (s == "erdos-renyi" || s == "erdos_renyi") return TopologyKind::erdos_renyi;
  if (s == "file") return TopologyKind::file;
  throw InvalidInput("unknown topology '" + s + "'");
}

SchedulePolicy parse_schedule(const std::string& s) {
  if (s == "naive") return SchedulePolicy::naive;
  if (s == "coloring") return SchedulePolicy::coloring;
  throw InvalidInput("unknown schedule policy '" + s + "' (expected naive|coloring)");
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = normalize_key(trim(raw_key));
  const std::string v = trim(raw_value);
  if (key == "seed") c.seed = to_uint(key, v);
  else if (key == "variant") c.variant = parse_variant(v);
  else if (key == "consensus") c.consensus = parse_consensus(v);
  else if (key == "devices" || key == "n_devices") c.n_devices = to_uint(key, v);
  else if (key == "alpha") c.alpha = (v == "auto") ? std::nullopt : std::optional<double>(to_double(key, v));
  else if (key == "iters" || key == "iterations") c.iterations = to_uint(key, v);
  else if (key == "noise_dbm") c.noise_power = dbm_to_linear(to_double(key, v));
  else if (key == "noise_power") c.noise_power = to_double(key, v);
  else if (key == "power" || key == "peak_power") c.peak_power = to_double(key, v);
  else if (key == "gamma") c.gamma = to_double(key, v);
  else if (key == "data") {
    if (v == "synthetic") c.source = DataSource::synthetic;
    else if (v == "idx") c.source = DataSource::idx;
    else throw InvalidInput("unknown data source '" + v + "' (expected synthetic|idx)");
  }
  else if (key == "dimension") c.dimension = to_uint(key, v);
  else if (key == "samples" || key == "train_samples") c.train_samples = to_uint(key, v);
  else if (key == "test_samples") c.test_samples = to_uint(key, v);
  else if (key == "flip" || key == "flip_probability") c.flip_probability = to_double(key, v);
  else if (key == "idx_images") c.idx_images = v;
  else if (key == "idx_labels") c.idx_labels = v;
  else if (key == "class_a") c.class_a = static_cast<int>(to_uint(key, v));
  else if (key == "class_b") c.class_b = static_cast<int>(to_uint(key, v));
  else if (key == "idx_train") c.idx_train = to_uint(key, v);
  else if (key == "idx_test") c.idx_test = to_uint(key, v);
  else if (key == "per_device") c.per_device = (v == "all") ? std::nullopt : std::optional<std::size_t>(to_uint(key, v));
  else if (key == "lambda") c.lambda = (v == "auto") ? std::nullopt : std::optional<double>(to_double(key, v));
  else if (key == "topology") c.topology = parse_topology(v);
  else if (key == "edge_probability") c.edge_probability = to_double(key, v);
  else if (key == "topology_file") c.topology_file = v;
  else if (key == "schedule") c.schedule = parse_schedule(v);
  else if (key == "out") c.out = v;
  else if (key == "repetitions") c.repetitions = to_uint(key, v);
  else if (key == "record_every") c.record_every = to_uint(key, v);
  else if (key == "threads") c.threads = static_cast<unsigned>(to_uint(key, v));
  else if (key == "divergence_threshold") c.divergence_threshold = to_double(key, v);
  else if (key == "backoff_window") c.backoff_window = to_uint(key, v);
  else throw InvalidInput("unknown config key '" + raw_key + "'");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput("config line " + std::to_string(lineno) + " is not key = value");
    }
    apply_setting(c, line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path.string());
  ExperimentConfig c = parse_config(in);
  // Paths inside a config file are relative to the file.
  const auto base = path.parent_path();
  for (auto* p : {&c.idx_images, &c.idx_labels, &c.topology_file}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (n_devices == 0) throw InvalidInput("devices must be >= 1");
  if (alpha && !(*alpha > 0.0)) throw InvalidInput("alpha must be > 0");
  if (!(noise_power >= 0.0)) throw InvalidInput("noise power must be >= 0");
  if (!(peak_power > 0.0)) throw InvalidInput("power must be > 0");
  if (!(gamma >= 0.0)) throw InvalidInput("gamma must be >= 0");
  if (repetitions == 0) throw InvalidInput("repetitions must be >= 1");
  if (record_every == 0) throw InvalidInput("record_every must be >= 1");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) throw InvalidInput("flip must be in [0,1]");
  if (source == DataSource::synthetic && (dimension == 0 || train_samples < n_devices)) {
    throw InvalidInput("synthetic data needs dimension > 0 and at least one sample per device");
  }
  if (source == DataSource::idx && (idx_images.empty() || idx_labels.empty())) {
    throw InvalidInput("idx data needs idx_images and idx_labels");
  }
  if (topology == TopologyKind::file && topology_file.empty()) {
    throw InvalidInput("topology=file needs topology_file");
  }
  if (lambda && !(*lambda > 0.0)) throw InvalidInput("lambda must be > 0");
  if (!(divergence_threshold > 0.0)) throw InvalidInput("divergence threshold must be > 0");
}

}  // namespace airdfl
