#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "storyforge/core.hpp"
#include "storyforge/grid.hpp"
#include "storyforge/scaling.hpp"

namespace storyforge {

/// Sparse block set. Blocks are kept sorted by (x, z, y) with unique positions.
class BlockWorld {
 public:
  BlockWorld() = default;

  explicit BlockWorld(std::vector<Voxel> blocks) {
    std::map<std::tuple<int, int, int>, std::string> by_pos;
    for (auto& b : blocks) {
      if (b.block.empty()) throw Error(Errc::BadFormat, "empty block name");
      by_pos[{b.x, b.z, b.y}] = std::move(b.block);
    }
    for (auto& [pos, name] : by_pos) {
      const auto [x, z, y] = pos;
      blocks_.push_back({x, y, z, std::move(name)});
    }
  }

  const std::vector<Voxel>& blocks() const noexcept { return blocks_; }
  bool empty() const noexcept { return blocks_.empty(); }

  std::set<std::string> palette() const {
    std::set<std::string> out;
    for (const auto& b : blocks_) out.insert(b.block);
    return out;
  }

  struct Bounds {
    int min_x = 0, min_y = 0, min_z = 0, max_x = -1, max_y = -1, max_z = -1;
  };

  Bounds bounds() const {
    Bounds b;
    if (blocks_.empty()) return b;
    b = {blocks_[0].x, blocks_[0].y, blocks_[0].z, blocks_[0].x, blocks_[0].y, blocks_[0].z};
    for (const auto& v : blocks_) {
      b.min_x = std::min(b.min_x, v.x);
      b.max_x = std::max(b.max_x, v.x);
      b.min_y = std::min(b.min_y, v.y);
      b.max_y = std::max(b.max_y, v.y);
      b.min_z = std::min(b.min_z, v.z);
      b.max_z = std::max(b.max_z, v.z);
    }
    return b;
  }

  friend bool operator==(const BlockWorld&, const BlockWorld&) = default;

 private:
  std::vector<Voxel> blocks_;
};

struct TileBlock {
  std::string ground;
  std::optional<std::string> surface;

  friend bool operator==(const TileBlock&, const TileBlock&) = default;
};

using TileBlockTable = std::map<char, TileBlock>;

/// Keyword -> block id for common tile names; first match wins.
inline std::string fallback_block(std::string_view tile_name) {
  static const std::vector<std::pair<std::string_view, std::string_view>> kPalette = {
      {"lava", "lava"},           {"water", "water"},          {"river", "water"},
      {"lake", "water"},          {"pond", "water"},           {"sea", "water"},
      {"bridge", "oak_planks"},   {"path", "dirt_path"},       {"road", "dirt_path"},
      {"trail", "dirt_path"},     {"sand", "sand"},            {"desert", "sand"},
      {"cactus", "cactus"},       {"snow", "snow_block"},      {"ice", "packed_ice"},
      {"grass", "grass_block"},   {"meadow", "grass_block"},   {"field", "grass_block"},
      {"flower", "poppy"},        {"bush", "oak_leaves"},      {"shrub", "oak_leaves"},
      {"leaves", "oak_leaves"},   {"tree", "oak_log"},         {"forest", "oak_log"},
      {"mushroom", "red_mushroom_block"}, {"swamp", "mud"},    {"mud", "mud"},
      {"dirt", "dirt"},           {"gravel", "gravel"},        {"moss", "moss_block"},
      {"ruin", "mossy_cobblestone"}, {"crystal", "amethyst_block"}, {"chest", "chest"},
      {"torch", "torch"},         {"fence", "oak_fence"},      {"gate", "iron_bars"},
      {"door", "oak_door"},       {"house", "oak_planks"},     {"hut", "spruce_planks"},
      {"cabin", "spruce_planks"}, {"tower", "cobblestone"},    {"castle", "stone_bricks"},
      {"temple", "chiseled_stone_bricks"}, {"wall", "stone_bricks"}, {"cave", "deepslate"},
      {"mountain", "stone"},      {"rock", "stone"},           {"stone", "stone"},
      {"portal", "crying_obsidian"}, {"altar", "obsidian"},    {"well", "cobblestone"},
  };
  std::string lower(tile_name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (const auto& [key, block] : kPalette) {
    if (lower.find(key) != std::string::npos) return std::string(block);
  }
  return "stone";
}

/// Table for every legend character. Walkable tiles become the ground block;
/// other tiles stand as a surface block on the dominant walkable ground.
/// Characters ('@', '#' and names marked as characters) only get ground.
/// `proposed` maps tile names to block ids and overrides the fallback palette.
inline TileBlockTable build_block_table(const TileLegend& legend, const TileSet& walkable, char floor_char,
                                        const std::map<std::string, std::string>& proposed = {}) {
  auto block_for = [&](const std::string& name) {
    if (auto it = proposed.find(name); it != proposed.end() && !it->second.empty()) return it->second;
    return fallback_block(name);
  };
  std::string floor = "grass_block";
  if (auto name = legend.name_of(floor_char)) floor = block_for(*name);

  auto is_character = [](char c, const std::string& name) {
    if (c == kProtagonist || c == kAntagonist) return true;
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char x) { return static_cast<char>(std::tolower(x)); });
    return lower.find("npc") != std::string::npos || lower.find("protagonist") != std::string::npos ||
           lower.find("antagonist") != std::string::npos;
  };

  TileBlockTable table;
  for (const auto& [name, c] : legend.entries()) {
    if (is_character(c, name)) {
      table[c] = TileBlock{floor, std::nullopt};
    } else if (walkable.contains(c)) {
      table[c] = TileBlock{block_for(name), std::nullopt};
    } else {
      table[c] = TileBlock{floor, block_for(name)};
    }
  }
  return table;
}

/// Ground layer at `height_base` for every cell, a surface block one above for
/// tiles that have one, and structure voxels stacked on their footprints in
/// place of the surface. The walkable surface is flat.
inline BlockWorld tiles_to_blocks(const TileGrid& grid, const TileBlockTable& table,
                                  std::span<const Voxel> structure_voxels, const std::set<Cell>& structure_cells,
                                  int height_base = 0) {
  std::vector<Voxel> blocks;
  const Extent e = grid.extent();
  for (int r = 0; r < e.rows; ++r) {
    for (int c = 0; c < e.cols; ++c) {
      const char ch = grid.at({r, c});
      const auto it = table.find(ch);
      if (it == table.end()) throw Error(Errc::MissingBlockMapping, std::string(1, ch));
      blocks.push_back({c, height_base, r, it->second.ground});
      if (it->second.surface && !structure_cells.contains(Cell{r, c})) {
        blocks.push_back({c, height_base + 1, r, *it->second.surface});
      }
    }
  }
  for (const auto& v : structure_voxels) blocks.push_back({v.x, height_base + 1 + v.y, v.z, v.block});
  return BlockWorld(std::move(blocks));
}

/// One {x,y,z,block} record per line, sorted by (x, z, y). Byte-stable.
inline std::string export_block_json(const BlockWorld& world) {
  if (world.empty()) return "[]\n";
  std::string out = "[\n";
  const auto& blocks = world.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    out += "{\"x\":" + std::to_string(b.x) + ",\"y\":" + std::to_string(b.y) + ",\"z\":" + std::to_string(b.z) +
           ",\"block\":" + nlohmann::json(b.block).dump() + "}";
    out += i + 1 < blocks.size() ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

inline BlockWorld import_block_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_array()) throw Error(Errc::BadFormat, "block JSON must be an array");
    std::vector<Voxel> blocks;
    for (const auto& r : j) {
      blocks.push_back({r.at("x").get<int>(), r.at("y").get<int>(), r.at("z").get<int>(), r.at("block").get<std::string>()});
    }
    return BlockWorld(std::move(blocks));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::BadFormat, std::string("block JSON: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Top-down raster

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major

  Rgb at(int x, int y) const { return pixels[static_cast<std::size_t>(y * width + x)]; }

  /// Binary portable pixmap (P6).
  std::string to_ppm() const {
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.reserve(out.size() + pixels.size() * 3);
    for (const auto& p : pixels) {
      out += static_cast<char>(p.r);
      out += static_cast<char>(p.g);
      out += static_cast<char>(p.b);
    }
    return out;
  }
};

/// Stable color for a name: a few familiar blocks get natural colors, every
/// other name is hashed.
inline Rgb color_for(std::string_view name) {
  static const std::map<std::string_view, Rgb> kKnown = {
      {"grass_block", {95, 159, 53}}, {"water", {63, 118, 228}},   {"sand", {219, 207, 163}},
      {"stone", {125, 125, 125}},     {"oak_log", {102, 81, 49}},  {"dirt_path", {148, 121, 65}},
      {"lava", {207, 92, 15}},        {"snow_block", {240, 251, 251}}, {"oak_leaves", {58, 110, 35}},
  };
  if (auto it = kKnown.find(name); it != kKnown.end()) return it->second;
  const std::uint64_t h = fnv1a(name);
  // Keep channels away from pure black so adjacent tiles stay distinguishable.
  return Rgb{static_cast<std::uint8_t>(48 + (h & 0xff) % 200), static_cast<std::uint8_t>(48 + ((h >> 8) & 0xff) % 200),
             static_cast<std::uint8_t>(48 + ((h >> 16) & 0xff) % 200)};
}

inline Image render_topdown(const TileGrid& grid, const TileLegend& legend, int cell_px = 8) {
  if (grid.empty() || grid.cell_count() == 0) throw Error(Errc::EmptyInput, "nothing to render");
  const Extent e = grid.extent();
  Image img{e.cols * cell_px, e.rows * cell_px, {}};
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  std::map<char, Rgb> colors;
  for (int r = 0; r < e.rows; ++r) {
    for (int c = 0; c < e.cols; ++c) {
      const char ch = grid.in_bounds({r, c}) ? grid.at({r, c}) : ' ';
      auto it = colors.find(ch);
      if (it == colors.end()) {
        const auto name = legend.name_of(ch).value_or(std::string(1, ch));
        it = colors.emplace(ch, color_for(name + "\x1f" + std::string(1, ch))).first;
      }
      for (int y = 0; y < cell_px; ++y) {
        for (int x = 0; x < cell_px; ++x) {
          img.pixels[static_cast<std::size_t>((r * cell_px + y) * img.width + c * cell_px + x)] = it->second;
        }
      }
    }
  }
  return img;
}

/// Color of the highest block in each (x, z) column.
inline Image render_topdown(const BlockWorld& world, int cell_px = 8) {
  if (world.empty()) throw Error(Errc::EmptyInput, "nothing to render");
  const auto b = world.bounds();
  const int w = b.max_x - b.min_x + 1;
  const int h = b.max_z - b.min_z + 1;
  std::vector<std::optional<std::pair<int, std::string>>> top(static_cast<std::size_t>(w * h));
  for (const auto& v : world.blocks()) {
    auto& slot = top[static_cast<std::size_t>((v.z - b.min_z) * w + (v.x - b.min_x))];
    if (!slot || v.y >= slot->first) slot = std::pair{v.y, v.block};
  }
  Image img{w * cell_px, h * cell_px, {}};
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  for (int z = 0; z < h; ++z) {
    for (int x = 0; x < w; ++x) {
      const auto& slot = top[static_cast<std::size_t>(z * w + x)];
      const Rgb color = slot ? color_for(slot->second) : Rgb{};
      for (int y = 0; y < cell_px; ++y) {
        for (int xx = 0; xx < cell_px; ++xx) {
          img.pixels[static_cast<std::size_t>((z * cell_px + y) * img.width + x * cell_px + xx)] = color;
        }
      }
    }
  }
  return img;
}

}  // namespace storyforge
