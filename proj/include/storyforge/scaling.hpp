#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyforge/core.hpp"
#include "storyforge/grid.hpp"

namespace storyforge {

/// Tiles that should occupy an s x s footprint, in scan priority order.
struct ScalingPlan {
  std::vector<char> to_scale;
  std::map<char, int> sizes;

  bool empty() const noexcept { return to_scale.empty(); }

  TileSet tile_set() const { return TileSet(to_scale.begin(), to_scale.end()); }

  void validate() const {
    for (char c : to_scale) {
      if (c == kProtagonist || c == kAntagonist) {
        throw Error(Errc::BadConfig, std::string("reserved tile in scaling plan: ") + c);
      }
      auto it = sizes.find(c);
      if (it == sizes.end()) throw Error(Errc::BadConfig, std::string("no size for tile ") + c);
      if (it->second < 2) throw Error(Errc::BadConfig, std::string("size < 2 for tile ") + c);
    }
  }

  friend bool operator==(const ScalingPlan&, const ScalingPlan&) = default;
};

struct Placement {
  char tile = '?';
  Cell top_left;
  int size = 0;
  std::size_t score = 0;

  bool covers(Cell c) const noexcept {
    return c.row >= top_left.row && c.row < top_left.row + size && c.col >= top_left.col &&
           c.col < top_left.col + size;
  }

  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Sum of original-map frequencies over the s x s footprint at `top_left`, or
/// nullopt when the footprint leaves the grid or touches an objective (2) or
/// already-scaled (4) cell.
inline std::optional<std::size_t> score_candidate(const TileGrid& grid,
                                                  const std::map<char, std::size_t>& freqs,
                                                  const TileClassification& cls, Cell top_left, int s) {
  const Extent e = grid.extent();
  if (s < 1 || !e.contains(top_left) || !e.contains(Cell{top_left.row + s - 1, top_left.col + s - 1})) {
    return std::nullopt;
  }
  std::size_t score = 0;
  for (int r = top_left.row; r < top_left.row + s; ++r) {
    for (int c = top_left.col; c < top_left.col + s; ++c) {
      const TileRole role = cls.at({r, c});
      if (role == TileRole::Objective || role == TileRole::Scaled) return std::nullopt;
      const auto it = freqs.find(grid.at({r, c}));
      score += it == freqs.end() ? 0 : it->second;
    }
  }
  return score;
}

struct ScalingResult {
  TileGrid grid;
  TileClassification classification;
  std::vector<Placement> placements;
};

/// Decides whether a chosen placement may stay; returning false rolls it back.
using PlacementFilter =
    std::function<bool(const TileGrid& after, const TileClassification& after_cls, const Placement&)>;

/// Row-major scan; every label-3 cell holding a to-scale char tries every
/// footprint that contains it and keeps the strictly best score (first seen,
/// i.e. lexicographically smallest corner, on ties). Frequencies come from the
/// input grid and stay frozen for the whole pass.
inline ScalingResult apply_scaling(const TileGrid& grid, const TileClassification& classification,
                                   const ScalingPlan& plan, const PlacementFilter& filter = {}) {
  if (!(classification.extent() == grid.extent())) {
    throw Error(Errc::BadConfig, "classification shape does not match grid");
  }
  plan.validate();
  const auto freqs = tile_frequencies(grid);
  const TileSet targets = plan.tile_set();

  ScalingResult out{grid, classification, {}};
  const Extent e = grid.extent();
  for (int i = 0; i < e.rows; ++i) {
    for (int j = 0; j < e.cols; ++j) {
      const char t = out.grid.at({i, j});
      if (!targets.contains(t) || out.classification.at({i, j}) != TileRole::NeedsScaling) continue;
      const int s = plan.sizes.at(t);

      Cell best{-1, -1};
      std::size_t best_score = 0;
      for (int m = i - s + 1; m <= i; ++m) {
        for (int n = j - s + 1; n <= j; ++n) {
          const auto score = score_candidate(out.grid, freqs, out.classification, {m, n}, s);
          if (score && *score > best_score) {
            best_score = *score;
            best = {m, n};
          }
        }
      }
      if (best.row == -1) continue;

      const Placement placement{t, best, s, best_score};
      TileGrid next_grid = out.grid;
      TileClassification next_cls = out.classification;
      for (int r = best.row; r < best.row + s; ++r) {
        for (int c = best.col; c < best.col + s; ++c) {
          next_grid.set({r, c}, t);
          next_cls.set({r, c}, TileRole::Scaled);
        }
      }
      if (filter && !filter(next_grid, next_cls, placement)) continue;
      out.grid = std::move(next_grid);
      out.classification = std::move(next_cls);
      out.placements.push_back(placement);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structures

/// One block in a stamp. x runs along columns, z along rows, y up.
struct Voxel {
  int x = 0;
  int y = 0;
  int z = 0;
  std::string block;

  friend auto operator<=>(const Voxel&, const Voxel&) = default;
};

struct StructureTemplate {
  char tile = '?';
  int footprint = 0;
  std::vector<Voxel> voxels;     // local coordinates
  std::vector<Cell> entrances;   // footprint-local (row, col) on the border

  void validate() const {
    if (footprint < 1) throw Error(Errc::BadFormat, "template footprint < 1");
    const int last = footprint - 1;
    int min_x = footprint, max_x = -1, min_z = footprint, max_z = -1;
    for (const auto& v : voxels) {
      if (v.block.empty()) throw Error(Errc::BadFormat, "empty block name");
      if (v.x < 0 || v.x > last || v.z < 0 || v.z > last || v.y < 0) {
        throw Error(Errc::BadFormat, "voxel outside footprint");
      }
      min_x = std::min(min_x, v.x);
      max_x = std::max(max_x, v.x);
      min_z = std::min(min_z, v.z);
      max_z = std::max(max_z, v.z);
    }
    if (min_x != 0 || min_z != 0 || max_x != last || max_z != last) {
      throw Error(Errc::BadFormat, "voxel stamp does not span the footprint");
    }
    for (const Cell e : entrances) {
      const bool inside = e.row >= 0 && e.row <= last && e.col >= 0 && e.col <= last;
      const bool border = e.row == 0 || e.row == last || e.col == 0 || e.col == last;
      if (!inside || !border) throw Error(Errc::BadFormat, "entrance not on footprint border");
    }
  }

  friend bool operator==(const StructureTemplate&, const StructureTemplate&) = default;
};

inline nlohmann::json to_json(const StructureTemplate& t) {
  nlohmann::json j;
  j["tile"] = std::string(1, t.tile);
  j["footprint"] = t.footprint;
  j["entrances"] = nlohmann::json::array();
  for (const Cell e : t.entrances) j["entrances"].push_back({e.row, e.col});
  j["voxels"] = nlohmann::json::array();
  for (const auto& v : t.voxels) j["voxels"].push_back({{"x", v.x}, {"y", v.y}, {"z", v.z}, {"block", v.block}});
  return j;
}

inline StructureTemplate structure_from_json(const nlohmann::json& j) {
  try {
    StructureTemplate t;
    const auto tile = j.at("tile").get<std::string>();
    if (tile.size() != 1) throw Error(Errc::BadFormat, "template tile must be one character");
    t.tile = tile[0];
    t.footprint = j.at("footprint").get<int>();
    for (const auto& e : j.at("entrances")) t.entrances.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
    for (const auto& v : j.at("voxels")) {
      t.voxels.push_back({v.at("x").get<int>(), v.at("y").get<int>(), v.at("z").get<int>(),
                          v.at("block").get<std::string>()});
    }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::BadFormat, std::string("structure template: ") + ex.what());
  }
}

/// Plain s x s building: three-high walls, a flat roof and one door in the
/// middle of the south wall.
inline StructureTemplate fallback_template(char tile, int s, std::string wall = "stone_bricks",
                                           std::string roof = "oak_planks") {
  StructureTemplate t;
  t.tile = tile;
  t.footprint = s;
  const Cell door{s - 1, s / 2};
  t.entrances = {door};
  for (int z = 0; z < s; ++z) {
    for (int x = 0; x < s; ++x) {
      const bool border = z == 0 || x == 0 || z == s - 1 || x == s - 1;
      if (border) {
        for (int y = 0; y < 3; ++y) {
          if (Cell{z, x} == door && y < 2) continue;
          t.voxels.push_back({x, y, z, wall});
        }
      }
      t.voxels.push_back({x, 3, z, roof});
    }
  }
  return t;
}

struct WalkOverrides {
  std::set<Cell> blocked;
  std::set<Cell> open;

  friend bool operator==(const WalkOverrides&, const WalkOverrides&) = default;
};

/// Char-based walkability with structure overrides on top.
struct OverlayWalkable {
  const TileGrid* grid;
  const TileSet* walkable;
  const WalkOverrides* overrides;

  bool operator()(Cell c) const {
    if (!grid->in_bounds(c)) return false;
    if (overrides->open.contains(c)) return true;
    if (overrides->blocked.contains(c)) return false;
    return walkable->contains(grid->at(c));
  }
};

struct StampResult {
  std::vector<Voxel> voxels;          // grid-plane coordinates, y local to the structure
  WalkOverrides overrides;
  std::vector<std::size_t> chosen;    // template index per placement
};

using TemplateLibrary = std::map<char, std::vector<StructureTemplate>>;

/// Picks a matching-size template per placement (seeded) and translates its
/// voxels to the placement. Footprint cells become obstacles except declared
/// entrances.
inline StampResult stamp_structures(std::span<const Placement> placements, const TemplateLibrary& templates,
                                    std::uint64_t seed) {
  Rng rng(seed);
  StampResult out;
  for (const auto& p : placements) {
    std::vector<const StructureTemplate*> matches;
    if (auto it = templates.find(p.tile); it != templates.end()) {
      for (const auto& t : it->second) {
        if (t.footprint == p.size) matches.push_back(&t);
      }
    }
    if (matches.empty()) {
      throw Error(Errc::MissingTemplate, std::string(1, p.tile) + " size " + std::to_string(p.size));
    }
    const std::size_t pick = matches.size() == 1 ? 0 : rng.index(matches.size());
    const StructureTemplate& t = *matches[pick];
    std::size_t lib_index = 0;
    for (const auto& cand : templates.at(p.tile)) {
      if (&cand == &t) break;
      ++lib_index;
    }
    out.chosen.push_back(lib_index);

    for (const auto& v : t.voxels) {
      out.voxels.push_back({v.x + p.top_left.col, v.y, v.z + p.top_left.row, v.block});
    }
    std::set<Cell> doors;
    for (const Cell e : t.entrances) doors.insert(Cell{e.row + p.top_left.row, e.col + p.top_left.col});
    for (int r = 0; r < p.size; ++r) {
      for (int c = 0; c < p.size; ++c) {
        const Cell cell{p.top_left.row + r, p.top_left.col + c};
        if (doors.contains(cell)) {
          out.overrides.open.insert(cell);
        } else {
          out.overrides.blocked.insert(cell);
        }
      }
    }
  }
  return out;
}

}  // namespace storyforge
