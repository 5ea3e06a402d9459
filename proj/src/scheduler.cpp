#include "airdfl/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "airdfl/error.hpp"

namespace airdfl {

Schedule::Schedule(std::size_t n_blocks, std::vector<std::size_t> assignment)
    : n_blocks_(n_blocks), assignment_(std::move(assignment)) {
  if (assignment_.empty()) throw InvalidInput("schedule must cover at least one device");
  if (n_blocks_ == 0 || n_blocks_ > assignment_.size()) throw InvalidInput("block count out of range");
  std::vector<bool> used(n_blocks_, false);
  for (std::size_t b : assignment_) {
    if (b >= n_blocks_) throw InvalidInput("block index out of range");
    used[b] = true;
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw InvalidInput("schedule contains an empty block");
  }
}

std::vector<std::vector<DeviceId>> Schedule::blocks() const {
  std::vector<std::vector<DeviceId>> out(n_blocks_);
  for (DeviceId i = 0; i < assignment_.size(); ++i) out[assignment_[i]].push_back(i);
  return out;
}

bool receivers_conflict(const NetworkGraph& graph, DeviceId u, DeviceId v) {
  if (u == v) return false;
  if (graph.has_edge(u, v)) return true;
  const auto& a = graph.neighbors(u);
  const auto& b = graph.neighbors(v);
  // Sorted-list intersection test.
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

bool is_valid_schedule(const NetworkGraph& graph, const Schedule& schedule) {
  const std::size_t n = graph.n_devices();
  if (schedule.n_devices() != n) return false;
  for (DeviceId u = 0; u < n; ++u)
    for (DeviceId v = u + 1; v < n; ++v)
      if (schedule.block_of(u) == schedule.block_of(v) && receivers_conflict(graph, u, v))
        return false;
  return true;
}

Schedule naive_schedule(const NetworkGraph& graph) {
  std::vector<std::size_t> assignment(graph.n_devices());
  std::iota(assignment.begin(), assignment.end(), std::size_t{0});
  return Schedule(graph.n_devices(), std::move(assignment));
}

Schedule coloring_schedule(const NetworkGraph& graph) {
  const std::size_t n = graph.n_devices();
  // Conflict adjacency (distance <= 2).
  std::vector<std::vector<DeviceId>> conflicts(n);
  for (DeviceId u = 0; u < n; ++u)
    for (DeviceId v = u + 1; v < n; ++v)
      if (receivers_conflict(graph, u, v)) {
        conflicts[u].push_back(v);
        conflicts[v].push_back(u);
      }

  // Welsh-Powell: descending conflict degree, ties by id.
  std::vector<DeviceId> order(n);
  std::iota(order.begin(), order.end(), DeviceId{0});
  std::stable_sort(order.begin(), order.end(), [&](DeviceId a, DeviceId b) {
    return conflicts[a].size() > conflicts[b].size();
  });

  constexpr std::size_t kUncolored = static_cast<std::size_t>(-1);
  std::vector<std::size_t> color(n, kUncolored);
  std::size_t n_colors = 0;
  for (DeviceId u : order) {
    std::vector<bool> taken(n_colors + 1, false);
    for (DeviceId v : conflicts[u])
      if (color[v] != kUncolored) taken[color[v]] = true;
    std::size_t c = 0;
    while (taken[c]) ++c;
    color[u] = c;
    n_colors = std::max(n_colors, c + 1);
  }
  return Schedule(n_colors, std::move(color));
}

Schedule make_schedule(const NetworkGraph& graph, SchedulePolicy policy) {
  return policy == SchedulePolicy::naive ? naive_schedule(graph) : coloring_schedule(graph);
}

void write_schedule(std::ostream& out, const Schedule& schedule) {
  for (DeviceId i = 0; i < schedule.n_devices(); ++i) out << i << ' ' << schedule.block_of(i) << '\n';
}

}  // namespace airdfl
