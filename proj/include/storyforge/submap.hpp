#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "storyforge/core.hpp"
#include "storyforge/grid.hpp"
#include "storyforge/pathfind.hpp"

namespace storyforge {

// Sub-map tile alphabet.
inline constexpr char kSubFloor = '.';
inline constexpr char kSubWall = 'X';
inline constexpr char kSubEntry = 'E';
inline constexpr char kSubExit = 'O';
inline constexpr char kSubSpawn = 'S';
inline constexpr char kSubItem = 'I';

inline const TileSet& submap_walkable() {
  static const TileSet set{kSubFloor, kSubEntry, kSubExit, kSubSpawn, kSubItem};
  return set;
}

inline constexpr int kDefaultSubmapSize = 15;

enum class Side { North, South, West, East };

constexpr Side opposite(Side s) {
  switch (s) {
    case Side::North: return Side::South;
    case Side::South: return Side::North;
    case Side::West: return Side::East;
    case Side::East: return Side::West;
  }
  return Side::North;
}

constexpr std::string_view side_name(Side s) {
  switch (s) {
    case Side::North: return "north";
    case Side::South: return "south";
    case Side::West: return "west";
    case Side::East: return "east";
  }
  return "north";
}

/// Declarative completion condition; which fields are meaningful depends on
/// the sub-map kind.
struct Completion {
  std::optional<Cell> exit;                 // ExitMaze
  int waves = 0;                            // SurviveWaves
  std::vector<std::vector<Cell>> spawns;    // SurviveWaves, per wave
  std::vector<Cell> items;                  // CollectItems

  std::vector<Cell> targets() const {
    std::vector<Cell> out;
    if (exit) out.push_back(*exit);
    for (const auto& wave : spawns) out.insert(out.end(), wave.begin(), wave.end());
    out.insert(out.end(), items.begin(), items.end());
    return out;
  }

  friend bool operator==(const Completion&, const Completion&) = default;
};

struct SubMap {
  std::string id;
  ObjectiveKind kind = ObjectiveKind::ExitMaze;
  TileGrid grid;
  Cell entry;
  Completion completion;
  std::vector<std::string> notes;

  bool connected() const {
    const auto targets = completion.targets();
    return connectivity_check(grid, submap_walkable(), entry, targets).valid;
  }

  friend bool operator==(const SubMap&, const SubMap&) = default;
};

struct Portal {
  Cell main_map_position;
  std::string submap_id;
  Cell return_position;

  friend bool operator==(const Portal&, const Portal&) = default;
};

namespace detail {

inline Cell border_cell(Side side, int size, int offset) {
  switch (side) {
    case Side::North: return {0, offset};
    case Side::South: return {size - 1, offset};
    case Side::West: return {offset, 0};
    case Side::East: return {offset, size - 1};
  }
  return {0, offset};
}

/// Every floor cell of the room interior is reachable from the entry and every
/// marker has a reachable neighbor.
inline bool room_connected(const TileGrid& g, Cell entry, const std::vector<Cell>& markers) {
  const Extent e = g.extent();
  const auto dist = bfs_distances(e, WalkableChars{&g, &submap_walkable()}, entry);
  for (std::size_t i = 0; i < e.area(); ++i) {
    const Cell c = e.cell(i);
    if (submap_walkable().contains(g.at(c)) && dist[i] < 0) return false;
  }
  for (const Cell m : markers) {
    if (!distance_to_target(dist, e, m)) return false;
  }
  return true;
}

inline TileGrid walled_room(int size) {
  TileGrid g(size, size, kSubFloor);
  for (int i = 0; i < size; ++i) {
    g.set({0, i}, kSubWall);
    g.set({size - 1, i}, kSubWall);
    g.set({i, 0}, kSubWall);
    g.set({i, size - 1}, kSubWall);
  }
  return g;
}

/// Drops up to `count` wall cells into the interior, skipping any that would
/// cut off a floor cell or marker. `keep` cells stay floor.
inline void scatter_obstacles(TileGrid& g, Rng& rng, std::size_t count, Cell entry, const std::vector<Cell>& keep,
                              const std::vector<Cell>& markers) {
  const int size = g.rows();
  std::vector<Cell> candidates;
  for (int r = 1; r < size - 1; ++r) {
    for (int c = 1; c < size - 1; ++c) {
      const Cell cell{r, c};
      if (g.at(cell) != kSubFloor) continue;
      if (std::find(keep.begin(), keep.end(), cell) != keep.end()) continue;
      candidates.push_back(cell);
    }
  }
  rng.shuffle(candidates);
  std::size_t placed = 0;
  for (const Cell c : candidates) {
    if (placed == count) break;
    g.set(c, kSubWall);
    if (room_connected(g, entry, markers)) {
      ++placed;
    } else {
      g.set(c, kSubFloor);
    }
  }
}

inline Cell inward(Cell border, int size) {
  if (border.row == 0) return {1, border.col};
  if (border.row == size - 1) return {size - 2, border.col};
  if (border.col == 0) return {border.row, 1};
  return {border.row, size - 2};
}

}  // namespace detail

/// Perfect maze by seeded depth-first carving on the odd lattice; entry on
/// `entry_side`, exit on the opposite side.
inline SubMap generate_maze(int size, Side entry_side, std::uint64_t seed, std::string id = "maze") {
  if (size < 7 || size % 2 == 0) throw Error(Errc::BadSize, "maze size must be odd and >= 7, got " + std::to_string(size));
  Rng rng(seed);
  TileGrid g(size, size, kSubWall);
  const int rooms = (size - 1) / 2;
  auto room_cell = [](int rr, int rc) { return Cell{2 * rr + 1, 2 * rc + 1}; };

  std::vector<char> visited(static_cast<std::size_t>(rooms * rooms), 0);
  std::vector<Cell> stack;  // room coordinates
  const Cell first{static_cast<int>(rng.index(static_cast<std::size_t>(rooms))),
                   static_cast<int>(rng.index(static_cast<std::size_t>(rooms)))};
  stack.push_back(first);
  visited[static_cast<std::size_t>(first.row * rooms + first.col)] = 1;
  g.set(room_cell(first.row, first.col), kSubFloor);
  while (!stack.empty()) {
    const Cell cur = stack.back();
    std::vector<Cell> options;
    for (const Cell step : kSteps) {
      const Cell n = cur + step;
      if (n.row < 0 || n.col < 0 || n.row >= rooms || n.col >= rooms) continue;
      if (!visited[static_cast<std::size_t>(n.row * rooms + n.col)]) options.push_back(n);
    }
    if (options.empty()) {
      stack.pop_back();
      continue;
    }
    const Cell n = options[rng.index(options.size())];
    visited[static_cast<std::size_t>(n.row * rooms + n.col)] = 1;
    const Cell a = room_cell(cur.row, cur.col);
    const Cell b = room_cell(n.row, n.col);
    g.set(Cell{(a.row + b.row) / 2, (a.col + b.col) / 2}, kSubFloor);
    g.set(b, kSubFloor);
    stack.push_back(n);
  }

  auto gate = [&](Side side) { return detail::border_cell(side, size, 2 * static_cast<int>(rng.index(static_cast<std::size_t>(rooms))) + 1); };
  const Cell entry = gate(entry_side);
  const Cell exit = gate(opposite(entry_side));
  g.set(entry, kSubEntry);
  g.set(exit, kSubExit);

  SubMap m;
  m.id = std::move(id);
  m.kind = ObjectiveKind::ExitMaze;
  m.grid = std::move(g);
  m.entry = entry;
  m.completion.exit = exit;
  return m;
}

/// Walled arena: a south gate, per-wave spawn markers on the perimeter (one per
/// side) and a scatter of obstacles covering at most 15% of the interior.
inline SubMap generate_arena(int size, int waves, std::uint64_t seed, std::string id = "arena") {
  if (size < 9) throw Error(Errc::BadSize, "arena size must be >= 9, got " + std::to_string(size));
  if (waves < 1) throw Error(Errc::BadSize, "arena needs at least one wave");
  Rng rng(seed);
  TileGrid g = detail::walled_room(size);
  const Cell entry{size - 1, size / 2};
  g.set(entry, kSubEntry);

  Completion done;
  done.waves = waves;
  std::vector<Cell> markers;
  for (int w = 0; w < waves; ++w) {
    std::vector<Cell> wave;
    for (Side side : {Side::North, Side::South, Side::West, Side::East}) {
      std::vector<Cell> options, fresh;
      for (int k = 1; k < size - 1; ++k) {
        const Cell c = detail::border_cell(side, size, k);
        if (c == entry || std::abs(c.col - entry.col) + std::abs(c.row - entry.row) <= 1) continue;
        options.push_back(c);
        if (g.at(c) == kSubWall) fresh.push_back(c);
      }
      const auto& pool = fresh.empty() ? options : fresh;
      const Cell c = pool[rng.index(pool.size())];
      g.set(c, kSubSpawn);
      wave.push_back(c);
      markers.push_back(c);
    }
    done.spawns.push_back(std::move(wave));
  }

  const std::size_t interior = static_cast<std::size_t>((size - 2) * (size - 2));
  const std::size_t max_obstacles = interior * 15 / 100;
  const std::size_t count = max_obstacles / 2 + rng.index(max_obstacles / 2 + 1);
  std::vector<Cell> keep{detail::inward(entry, size)};
  for (const Cell m : markers) keep.push_back(detail::inward(m, size));
  detail::scatter_obstacles(g, rng, count, entry, keep, markers);

  SubMap m;
  m.id = std::move(id);
  m.kind = ObjectiveKind::SurviveWaves;
  m.grid = std::move(g);
  m.entry = entry;
  m.completion = std::move(done);
  return m;
}

/// Room with a few pillars and `n_items` reachable items. Asking for more
/// items than free cells clamps the count and records a note.
inline SubMap generate_collect(int size, int n_items, std::uint64_t seed, std::string id = "collect") {
  if (size < 7) throw Error(Errc::BadSize, "collect room size must be >= 7, got " + std::to_string(size));
  if (n_items < 1) throw Error(Errc::BadSize, "collect room needs at least one item");
  Rng rng(seed);
  TileGrid g = detail::walled_room(size);
  const Cell entry{size - 1, size / 2};
  g.set(entry, kSubEntry);
  const Cell doorstep = detail::inward(entry, size);

  const std::size_t interior = static_cast<std::size_t>((size - 2) * (size - 2));
  detail::scatter_obstacles(g, rng, interior * 8 / 100, entry, {doorstep}, {});

  std::vector<Cell> free;
  for (int r = 1; r < size - 1; ++r) {
    for (int c = 1; c < size - 1; ++c) {
      if (g.at({r, c}) == kSubFloor && Cell{r, c} != doorstep) free.push_back({r, c});
    }
  }
  SubMap m;
  std::size_t n = static_cast<std::size_t>(n_items);
  if (n > free.size()) {
    m.notes.push_back("requested " + std::to_string(n_items) + " items, clamped to " + std::to_string(free.size()));
    n = free.size();
  }
  rng.shuffle(free);
  for (std::size_t i = 0; i < n; ++i) {
    g.set(free[i], kSubItem);
    m.completion.items.push_back(free[i]);
  }
  std::sort(m.completion.items.begin(), m.completion.items.end());

  m.id = std::move(id);
  m.kind = ObjectiveKind::CollectItems;
  m.grid = std::move(g);
  m.entry = entry;
  return m;
}

/// Portal at the walkable cell nearest to the objective's proposed position.
template <CellPredicate Passable>
Portal place_portal(Extent extent, const Passable& passable, const Objective& objective, std::string submap_id,
                    Cell return_position) {
  if (!is_submapped(objective.kind)) {
    throw Error(Errc::BadConfig, "objective '" + objective.description + "' is realized in place, not in a sub-map");
  }
  const Cell from = clamp_to(extent, objective.position);
  const auto at = bfs_nearest_valid(extent, from, passable);
  if (!at) throw Error(Errc::NotFound, "no walkable cell for portal of '" + objective.description + "'");
  return Portal{*at, std::move(submap_id), return_position};
}

/// First printable character not used by the legend, preferring symbols that
/// read as doorways.
inline char pick_portal_char(const TileLegend& legend) {
  static constexpr std::string_view kPreferred = "*%$&+=~^!?0123456789";
  for (char c : kPreferred) {
    if (!legend.contains(c)) return c;
  }
  for (char c = '!'; c <= '~'; ++c) {
    if (!legend.contains(c)) return c;
  }
  throw Error(Errc::NotFound, "legend has no free character for a portal");
}

}  // namespace storyforge
