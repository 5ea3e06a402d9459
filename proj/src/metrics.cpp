#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "airdfl/error.hpp"
#include "airdfl/harness.hpp"

namespace airdfl {
namespace {

constexpr std::array<const char*, 8> kColumns = {
    "iteration",      "optimality_gap",     "consensus_error", "test_accuracy",
    "max_model_norm", "block_noise_energy", "scaling_factor",  "blocks"};
constexpr const char* kDevicePrefix = "gap_device_";

void put(std::ostream& out, double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, p - buf);
}

double get_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("metrics line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records) {
  const std::size_t n = records.empty() ? 0 : records.front().device_gaps.size();
  for (std::size_t k = 0; k < kColumns.size(); ++k) out << (k ? "," : "") << kColumns[k];
  for (std::size_t i = 0; i < n; ++i) out << ',' << kDevicePrefix << i;
  out << '\n';
  for (const auto& r : records) {
    if (r.device_gaps.size() != n) throw InvalidInput("records disagree on the device count");
    out << r.iteration << ',';
    put(out, r.optimality_gap);
    out << ',';
    put(out, r.consensus_error);
    out << ',';
    put(out, r.test_accuracy);
    out << ',';
    put(out, r.max_model_norm);
    out << ',';
    put(out, r.block_noise_energy);
    out << ',';
    put(out, r.scaling_factor);
    out << ',';
    put(out, r.blocks);
    for (double g : r.device_gaps) {
      out << ',';
      put(out, g);
    }
    out << '\n';
  }
}

std::vector<MetricsRecord> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("metrics file is empty");
  const auto header = split(line);
  if (header.size() < kColumns.size()) throw FormatError("metrics header is too short");
  for (std::size_t k = 0; k < kColumns.size(); ++k) {
    if (header[k] != kColumns[k]) throw FormatError("unexpected metrics column '" + header[k] + "'");
  }
  const std::size_t n = header.size() - kColumns.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (header[kColumns.size() + i] != kDevicePrefix + std::to_string(i)) {
      throw FormatError("unexpected metrics column '" + header[kColumns.size() + i] + "'");
    }
  }

  std::vector<MetricsRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw FormatError("metrics line " + std::to_string(lineno) + " has the wrong column count");
    }
    MetricsRecord r;
    const auto& it = cells[0];
    const auto [p, ec] = std::from_chars(it.data(), it.data() + it.size(), r.iteration);
    if (ec != std::errc() || p != it.data() + it.size()) {
      throw FormatError("metrics line " + std::to_string(lineno) + ": bad iteration");
    }
    r.optimality_gap = get_double(cells[1], lineno);
    r.consensus_error = get_double(cells[2], lineno);
    r.test_accuracy = get_double(cells[3], lineno);
    r.max_model_norm = get_double(cells[4], lineno);
    r.block_noise_energy = get_double(cells[5], lineno);
    r.scaling_factor = get_double(cells[6], lineno);
    r.blocks = get_double(cells[7], lineno);
    r.device_gaps.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.device_gaps[i] = get_double(cells[kColumns.size() + i], lineno);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<MetricsRecord> average_records(const std::vector<std::vector<MetricsRecord>>& runs) {
  if (runs.empty()) throw InvalidInput("nothing to average");
  if (runs.size() == 1) return runs.front();
  const auto& first = runs.front();
  for (const auto& run : runs) {
    if (run.size() != first.size()) throw InvalidInput("runs have different lengths");
    for (std::size_t k = 0; k < run.size(); ++k) {
      if (run[k].iteration != first[k].iteration ||
          run[k].device_gaps.size() != first[k].device_gaps.size()) {
        throw InvalidInput("runs have different iteration grids");
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(runs.size());
  std::vector<MetricsRecord> out(first.size());
  for (std::size_t k = 0; k < first.size(); ++k) {
    MetricsRecord& a = out[k];
    a.iteration = first[k].iteration;
    a.device_gaps.assign(first[k].device_gaps.size(), 0.0);
    for (const auto& run : runs) {
      const MetricsRecord& r = run[k];
      a.optimality_gap += r.optimality_gap;
      a.consensus_error += r.consensus_error;
      a.test_accuracy += r.test_accuracy;
      a.max_model_norm += r.max_model_norm;
      a.block_noise_energy += r.block_noise_energy;
      a.scaling_factor += r.scaling_factor;
      a.blocks += r.blocks;
      for (std::size_t i = 0; i < a.device_gaps.size(); ++i) a.device_gaps[i] += r.device_gaps[i];
    }
    a.optimality_gap *= inv;
    a.consensus_error *= inv;
    a.test_accuracy *= inv;
    a.max_model_norm *= inv;
    a.block_noise_energy *= inv;
    a.scaling_factor *= inv;
    a.blocks *= inv;
    for (double& g : a.device_gaps) g *= inv;
  }
  return out;
}

}  // namespace airdfl
