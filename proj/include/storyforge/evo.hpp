#pragma once

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "storyforge/core.hpp"
#include "storyforge/grid.hpp"
#include "storyforge/metrics.hpp"
#include "storyforge/pathfind.hpp"

namespace storyforge::evo {

inline constexpr char kFloor = '.';
inline constexpr char kWall = 'W';
inline constexpr char kObjectiveMark = 'O';

struct EvoConfig {
  int rows = 15;
  int cols = 15;
  int population_size = 50;
  int generations = 200;
  double mutation_rate = 0.02;        // per-cell flip probability
  double position_mutation_rate = 0.1;  // per special position
  double initial_wall_density = 0.3;
  int tournament_size = 3;
  int elitism_count = 2;
  int n_objectives = 8;
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (rows < 2 || cols < 2) throw Error(Errc::BadConfig, "grid must be at least 2x2");
    if (population_size < 2) throw Error(Errc::BadConfig, "population_size must be >= 2");
    if (elitism_count < 0 || elitism_count >= population_size) {
      throw Error(Errc::BadConfig, "elitism_count must be in [0, population_size)");
    }
    if (!(mutation_rate > 0.0 && mutation_rate < 1.0)) throw Error(Errc::BadConfig, "mutation_rate must be in (0,1)");
    if (position_mutation_rate < 0.0 || position_mutation_rate > 1.0) {
      throw Error(Errc::BadConfig, "position_mutation_rate must be in [0,1]");
    }
    if (tournament_size < 1) throw Error(Errc::BadConfig, "tournament_size must be >= 1");
    if (generations < 0) throw Error(Errc::BadConfig, "generations must be >= 0");
    if (n_objectives < 1 || n_objectives + 1 > rows * cols) throw Error(Errc::BadConfig, "bad n_objectives");
  }
};

/// Walls/floor bitmap plus start and objective positions. Special positions
/// are always floor.
struct Genome {
  Extent extent;
  std::vector<char> walls;  // 1 = unwalkable
  Cell start;
  std::vector<Cell> objectives;

  bool wall(Cell c) const { return walls[extent.index(c)] != 0; }

  /// Level grid: '.' floor, 'W' wall, '@' start, '#' first objective (the
  /// antagonist), 'O' other objectives.
  TileGrid to_grid() const {
    TileGrid g(extent.rows, extent.cols, kFloor);
    for (std::size_t i = 0; i < extent.area(); ++i) {
      if (walls[i]) g.set(extent.cell(i), kWall);
    }
    for (std::size_t k = 0; k < objectives.size(); ++k) g.set(objectives[k], k == 0 ? kAntagonist : kObjectiveMark);
    g.set(start, kProtagonist);
    return g;
  }

  friend bool operator==(const Genome&, const Genome&) = default;
};

inline TileLegend level_legend() {
  return TileLegend::from_entries(
      {{"Floor", kFloor}, {"Wall", kWall}, {"Protagonist", kProtagonist}, {"Antagonist", kAntagonist},
       {"Objective", kObjectiveMark}});
}

/// Everything except walls is walkable.
inline TileSet level_walkable() { return {kFloor, kProtagonist, kAntagonist, kObjectiveMark}; }

struct FloorPassable {
  const Genome* g;
  bool operator()(Cell c) const { return !g->wall(c); }
};

/// True when positions are in bounds, pairwise distinct and on floor.
inline bool well_formed(const Genome& g, int n_objectives) {
  if (static_cast<int>(g.objectives.size()) != n_objectives) return false;
  if (g.walls.size() != g.extent.area()) return false;
  std::set<Cell> seen{g.start};
  if (!g.extent.contains(g.start) || g.wall(g.start)) return false;
  for (const Cell o : g.objectives) {
    if (!g.extent.contains(o) || g.wall(o) || !seen.insert(o).second) return false;
  }
  return true;
}

/// ASPAO when every objective is reachable; otherwise the mean over reachable
/// objectives minus the grid area per unreachable one, which puts every
/// invalid genome below every valid one.
inline double fitness(const Genome& g) {
  const auto dist = bfs_distances(g.extent, FloorPassable{&g}, g.start);
  const double penalty = static_cast<double>(g.extent.area());
  double sum = 0.0;
  int reached = 0, missed = 0;
  for (const Cell o : g.objectives) {
    if (const auto d = distance_to_target(dist, g.extent, o)) {
      sum += *d;
      ++reached;
    } else {
      ++missed;
    }
  }
  const double mean = reached ? sum / reached : 0.0;
  return missed == 0 ? mean : mean - penalty * missed;
}

/// Moves duplicated positions to the nearest free cell and clears walls under
/// every special position.
inline void repair(Genome& g) {
  std::set<Cell> taken;
  auto place = [&](Cell& c) {
    c = clamp_to(g.extent, c);
    if (taken.contains(c)) {
      c = *bfs_nearest_valid(g.extent, c, [&](Cell x) { return !taken.contains(x); });
    }
    taken.insert(c);
    g.walls[g.extent.index(c)] = 0;
  };
  place(g.start);
  for (auto& o : g.objectives) place(o);
}

inline Genome random_genome(const EvoConfig& cfg, Rng& rng) {
  Genome g;
  g.extent = Extent{cfg.rows, cfg.cols};
  g.walls.resize(g.extent.area());
  for (auto& w : g.walls) w = rng.chance(cfg.initial_wall_density) ? 1 : 0;
  std::vector<std::size_t> cells(g.extent.area());
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  rng.shuffle(cells);
  g.start = g.extent.cell(cells[0]);
  for (int k = 0; k < cfg.n_objectives; ++k) g.objectives.push_back(g.extent.cell(cells[static_cast<std::size_t>(k) + 1]));
  repair(g);
  return g;
}

inline Genome crossover(const Genome& a, const Genome& b, Rng& rng) {
  Genome child = a;
  for (std::size_t i = 0; i < child.walls.size(); ++i) {
    if (rng.chance(0.5)) child.walls[i] = b.walls[i];
  }
  if (rng.chance(0.5)) child.start = b.start;
  for (std::size_t k = 0; k < child.objectives.size(); ++k) {
    if (rng.chance(0.5)) child.objectives[k] = b.objectives[k];
  }
  return child;
}

inline void mutate(Genome& g, const EvoConfig& cfg, Rng& rng) {
  for (auto& w : g.walls) {
    if (rng.chance(cfg.mutation_rate)) w = w ? 0 : 1;
  }
  auto nudge = [&](Cell& c) {
    if (!rng.chance(cfg.position_mutation_rate)) return;
    if (rng.chance(0.5)) {
      c = g.extent.cell(rng.index(g.extent.area()));
    } else {
      c = c + kSteps[rng.index(4)];
    }
  };
  nudge(g.start);
  for (auto& o : g.objectives) nudge(o);
}

struct GenerationStats {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
};

struct EvoResult {
  Genome best;
  double best_fitness = 0.0;
  std::vector<GenerationStats> log;
};

/// Seeded generational GA: tournament selection, uniform crossover, per-cell
/// flip mutation, position repair and elitism. Fitness never touches the RNG,
/// so evaluation order cannot change the stream.
inline EvoResult evolve(const EvoConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.rng_seed);
  std::vector<Genome> pop;
  pop.reserve(static_cast<std::size_t>(cfg.population_size));
  for (int i = 0; i < cfg.population_size; ++i) pop.push_back(random_genome(cfg, rng));

  EvoResult result;
  std::vector<double> fit(pop.size());
  std::vector<std::size_t> order(pop.size());

  for (int gen = 0;; ++gen) {
    for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = fitness(pop[i]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return fit[x] > fit[y]; });
    const double mean = std::accumulate(fit.begin(), fit.end(), 0.0) / static_cast<double>(fit.size());
    result.log.push_back({gen, fit[order[0]], mean});
    if (gen == cfg.generations) {
      result.best = pop[order[0]];
      result.best_fitness = fit[order[0]];
      return result;
    }

    auto tournament = [&]() -> const Genome& {
      std::size_t best = rng.index(pop.size());
      for (int t = 1; t < cfg.tournament_size; ++t) {
        const std::size_t c = rng.index(pop.size());
        if (fit[c] > fit[best] || (fit[c] == fit[best] && c < best)) best = c;
      }
      return pop[best];
    };

    std::vector<Genome> next;
    next.reserve(pop.size());
    for (int e = 0; e < cfg.elitism_count; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);
    while (next.size() < pop.size()) {
      const Genome& a = tournament();
      const Genome& b = tournament();
      Genome child = crossover(a, b, rng);
      mutate(child, cfg, rng);
      repair(child);
      next.push_back(std::move(child));
    }
    pop = std::move(next);
  }
}

}  // namespace storyforge::evo
