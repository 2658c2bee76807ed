#pragma once

#include <algorithm>
#include <concepts>
#include <cstdlib>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <tuple>
#include <variant>
#include <vector>

#include "storyforge/core.hpp"
#include "storyforge/grid.hpp"

namespace storyforge {

template <class F>
concept CellPredicate = std::predicate<const F&, Cell>;

inline constexpr std::size_t kUnlimitedIterations = std::numeric_limits<std::size_t>::max();
inline constexpr std::size_t kDefaultIterationCap = 1000;

struct PathQuery {
  Cell start;
  Cell goal;
  /// Cap on node expansions (pops from the open set).
  std::size_t max_iterations = kDefaultIterationCap;
  /// Let the goal be entered even when it is not passable (objective anchors
  /// such as chests are interactable solids).
  bool goal_exempt = false;
};

enum class PathStatus { Found, Unreachable, IterationCapExceeded };

struct PathResult {
  PathStatus status = PathStatus::Unreachable;
  std::vector<Cell> path;  // cells from start to goal, inclusive; empty unless Found
  std::size_t expanded = 0;

  bool found() const noexcept { return status == PathStatus::Found; }
  /// Number of unit moves along the path.
  std::size_t steps() const noexcept { return path.empty() ? 0 : path.size() - 1; }
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

/// A* over a 4-connected grid with unit costs and the Manhattan heuristic.
/// The start cell is always enterable. Ties on f prefer larger g, then the
/// earlier push, so results are reproducible.
template <CellPredicate Passable>
PathResult astar(Extent extent, const Passable& passable, const PathQuery& q) {
  PathResult result;
  if (!extent.contains(q.start) || !extent.contains(q.goal)) return result;
  if (q.start == q.goal) {
    result.status = PathStatus::Found;
    result.path = {q.start};
    return result;
  }
  auto enterable = [&](Cell c) { return passable(c) || (q.goal_exempt && c == q.goal); };
  if (!enterable(q.goal)) return result;

  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> g(extent.area(), kInf);
  std::vector<std::size_t> parent(extent.area(), std::numeric_limits<std::size_t>::max());
  std::vector<char> closed(extent.area(), 0);

  // (f, -g, push sequence, index); min-heap
  using Node = std::tuple<int, int, std::size_t, std::size_t>;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  std::size_t seq = 0;

  const std::size_t start_i = extent.index(q.start);
  g[start_i] = 0;
  open.emplace(manhattan(q.start, q.goal), 0, seq++, start_i);

  while (!open.empty()) {
    const auto [f, neg_g, s, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    if (result.expanded >= q.max_iterations) {
      result.status = PathStatus::IterationCapExceeded;
      return result;
    }
    ++result.expanded;
    closed[idx] = 1;
    const Cell cur = extent.cell(idx);
    if (cur == q.goal) {
      result.status = PathStatus::Found;
      for (std::size_t i = idx; i != start_i; i = parent[i]) result.path.push_back(extent.cell(i));
      result.path.push_back(q.start);
      std::reverse(result.path.begin(), result.path.end());
      return result;
    }
    for (const Cell step : kSteps) {
      const Cell next = cur + step;
      if (!extent.contains(next) || !enterable(next)) continue;
      const std::size_t ni = extent.index(next);
      if (closed[ni]) continue;
      const int ng = g[idx] + 1;
      if (ng < g[ni]) {
        g[ni] = ng;
        parent[ni] = idx;
        open.emplace(ng + manhattan(next, q.goal), -ng, seq++, ni);
      }
    }
  }
  result.status = PathStatus::Unreachable;
  return result;
}

inline PathResult astar(const TileGrid& grid, const TileSet& walkable, const PathQuery& q) {
  return astar(grid.extent(), WalkableChars{&grid, &walkable}, q);
}

/// Single-source BFS step distances over passable cells; -1 where unreached.
/// The source is always included.
template <CellPredicate Passable>
std::vector<int> bfs_distances(Extent extent, const Passable& passable, Cell source) {
  std::vector<int> dist(extent.area(), -1);
  if (!extent.contains(source)) return dist;
  std::deque<Cell> frontier{source};
  dist[extent.index(source)] = 0;
  while (!frontier.empty()) {
    const Cell cur = frontier.front();
    frontier.pop_front();
    const int d = dist[extent.index(cur)];
    for (const Cell step : kSteps) {
      const Cell next = cur + step;
      if (!extent.contains(next) || dist[extent.index(next)] >= 0 || !passable(next)) continue;
      dist[extent.index(next)] = d + 1;
      frontier.push_back(next);
    }
  }
  return dist;
}

/// Steps needed to reach `target` given BFS distances: the target's own
/// distance when it was flooded, else one more than its nearest flooded
/// neighbor (the target is an interactable solid).
inline std::optional<int> distance_to_target(std::span<const int> dist, Extent extent, Cell target) {
  if (!extent.contains(target)) return std::nullopt;
  if (const int d = dist[extent.index(target)]; d >= 0) return d;
  std::optional<int> best;
  for (const Cell step : kSteps) {
    const Cell n = target + step;
    if (!extent.contains(n)) continue;
    if (const int d = dist[extent.index(n)]; d >= 0 && (!best || d + 1 < *best)) best = d + 1;
  }
  return best;
}

/// Nearest cell accepted by `accept`, searching 4-connected over every cell
/// regardless of walkability. Equal depths resolve in N, S, W, E visit order.
template <CellPredicate Accept>
std::optional<Cell> bfs_nearest_valid(Extent extent, Cell from, const Accept& accept) {
  if (!extent.contains(from)) return std::nullopt;
  std::vector<char> seen(extent.area(), 0);
  std::deque<Cell> frontier{from};
  seen[extent.index(from)] = 1;
  while (!frontier.empty()) {
    const Cell cur = frontier.front();
    frontier.pop_front();
    if (accept(cur)) return cur;
    for (const Cell step : kSteps) {
      const Cell next = cur + step;
      if (!extent.contains(next) || seen[extent.index(next)]) continue;
      seen[extent.index(next)] = 1;
      frontier.push_back(next);
    }
  }
  return std::nullopt;
}

inline Cell clamp_to(Extent extent, Cell c) {
  return Cell{std::clamp(c.row, 0, std::max(0, extent.rows - 1)),
              std::clamp(c.col, 0, std::max(0, extent.cols - 1))};
}

struct ConnectivityReport {
  std::vector<bool> reachable;  // per target
  bool valid = false;
};

/// One flood from `start`; a target counts as reached when it or any of its
/// 4-neighbors is flooded.
template <CellPredicate Passable>
ConnectivityReport connectivity_check(Extent extent, const Passable& passable, Cell start,
                                      std::span<const Cell> targets) {
  const auto dist = bfs_distances(extent, passable, start);
  ConnectivityReport report;
  report.valid = true;
  for (const Cell t : targets) {
    const bool ok = distance_to_target(dist, extent, t).has_value();
    report.reachable.push_back(ok);
    report.valid = report.valid && ok;
  }
  return report;
}

inline ConnectivityReport connectivity_check(const TileGrid& grid, const TileSet& walkable, Cell start,
                                             std::span<const Cell> targets) {
  return connectivity_check(grid.extent(), WalkableChars{&grid, &walkable}, start, targets);
}

}  // namespace storyforge
