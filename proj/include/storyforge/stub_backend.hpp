#pragma once

// Offline backend that answers every pipeline prompt from seeded procedural
// content. Replies are a pure function of (seed, prompt), so runs repeat.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <queue>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storyforge/backend.hpp"
#include "storyforge/core.hpp"
#include "storyforge/grid.hpp"
#include "storyforge/literal.hpp"

namespace storyforge {

namespace stub {

enum class Layout { Base, Blob, River, Bridge, Path, Single };

struct ThemeTile {
  std::string_view name;
  char ch;
  bool walkable;
  Layout layout;
  int amount;  // blobs or single copies
  std::string_view block;
  int scale = 0;  // footprint when the tile gets scaled
  bool important = false;
};

struct Theme {
  std::string_view name;
  std::string_view place;
  std::string_view beasts;
  std::string_view herb;
  std::string_view den;
  std::string_view threat;
  std::vector<std::string_view> heroes;
  std::vector<std::string_view> villains;
  std::vector<std::string_view> npcs;
  std::vector<ThemeTile> tiles;
};

inline const std::vector<Theme>& themes() {
  using L = Layout;
  static const std::vector<Theme> kThemes = {
      {"forest", "Whispering Forest", "wolves", "healing herbs", "Wolf Den", "poisoned the ancient oaks",
       {"Aria", "Rowan", "Elowen"}, {"Vorath the Blight", "Morgra the Witch", "Skarn the Hollow King"},
       {"Old Bram", "Sister Willa", "Finn the Woodcutter"},
       {{"Grass", 'g', true, L::Base, 0, "grass_block"},
        {"Tall Grass", 't', true, L::Blob, 6, "moss_block"},
        {"Wildflowers", 'f', true, L::Blob, 4, "flowering_azalea_leaves"},
        {"Moss", 'm', true, L::Blob, 4, "rooted_dirt"},
        {"Mushroom Ring", 'o', true, L::Blob, 2, "mycelium"},
        {"Dirt Path", 'p', true, L::Path, 1, "dirt_path"},
        {"River", 'w', false, L::River, 1, "water"},
        {"Bridge", '=', true, L::Bridge, 2, "oak_planks"},
        {"Oak Tree", 'T', false, L::Blob, 6, "oak_log"},
        {"Pine Tree", 'P', false, L::Blob, 4, "spruce_log"},
        {"Bush", 'b', false, L::Blob, 4, "oak_leaves"},
        {"Boulder", 'r', false, L::Blob, 3, "cobblestone"},
        {"Cabin", 'H', false, L::Single, 2, "spruce_planks", 3},
        {"Watchtower", 'W', false, L::Single, 1, "cobblestone", 2},
        {"Ancient Ruins", 'R', false, L::Single, 2, "mossy_stone_bricks", 2},
        {"Treasure Chest", 'C', false, L::Single, 1, "chest", 0, true},
        {"Labyrinth Gate", 'L', false, L::Single, 1, "iron_bars", 0, true},
        {"Wolf Den", 'D', false, L::Single, 1, "bone_block", 0, true},
        {"Healing Herbs", 'h', true, L::Single, 2, "podzol", 0, true}}},
      {"desert", "Shifting Sands", "scorpions", "desert lilies", "Scorpion Nest", "buried the last oasis",
       {"Kael", "Samira", "Tarek"}, {"Ashur the Sand Tyrant", "Nehza the Scorpion Queen", "Vex the Sunburnt"},
       {"Old Hadi", "Merchant Zara", "Nomad Ilo"},
       {{"Sand", 's', true, L::Base, 0, "sand"},
        {"Dunes", 'd', true, L::Blob, 6, "smooth_sandstone"},
        {"Dry Grass", 'y', true, L::Blob, 4, "coarse_dirt"},
        {"Cracked Earth", 'k', true, L::Blob, 4, "terracotta"},
        {"Bones", 'o', true, L::Blob, 2, "bone_block"},
        {"Stone Path", 'p', true, L::Path, 1, "smooth_stone"},
        {"Oasis Water", 'w', false, L::River, 1, "water"},
        {"Plank Bridge", '=', true, L::Bridge, 2, "birch_planks"},
        {"Cactus", 'c', false, L::Blob, 6, "cactus"},
        {"Palm Tree", 'P', false, L::Blob, 4, "jungle_log"},
        {"Rock", 'r', false, L::Blob, 4, "stone"},
        {"Dead Shrub", 'b', false, L::Blob, 3, "dead_bush"},
        {"Tent", 'H', false, L::Single, 2, "white_wool", 3},
        {"Obelisk", 'W', false, L::Single, 1, "chiseled_sandstone", 2},
        {"Sandstone Ruins", 'R', false, L::Single, 2, "cut_sandstone", 2},
        {"Treasure Chest", 'C', false, L::Single, 1, "chest", 0, true},
        {"Labyrinth Gate", 'L', false, L::Single, 1, "iron_bars", 0, true},
        {"Scorpion Nest", 'D', false, L::Single, 1, "red_sand", 0, true},
        {"Desert Lily", 'h', true, L::Single, 2, "orange_terracotta", 0, true}}},
      {"tundra", "Frozen Reach", "ice wraiths", "frost flowers", "Yeti Cave", "froze the northern hearths",
       {"Bjorn", "Sigrid", "Eira"}, {"Hrimgar the Frost Giant", "Skadi the Pale", "Ulfric the Cold"},
       {"Elder Tova", "Trapper Leif", "Runa the Seer"},
       {{"Snow", 'n', true, L::Base, 0, "snow_block"},
        {"Ice", 'i', true, L::Blob, 6, "packed_ice"},
        {"Gravel", 'v', true, L::Blob, 4, "gravel"},
        {"Frost Moss", 'm', true, L::Blob, 4, "light_blue_concrete_powder"},
        {"Lichen", 'o', true, L::Blob, 2, "podzol"},
        {"Frozen Path", 'p', true, L::Path, 1, "blue_ice"},
        {"Frozen River", 'w', false, L::River, 1, "water"},
        {"Log Bridge", '=', true, L::Bridge, 2, "spruce_planks"},
        {"Pine Tree", 'P', false, L::Blob, 6, "spruce_log"},
        {"Ice Spike", 'I', false, L::Blob, 4, "blue_ice"},
        {"Rock", 'r', false, L::Blob, 4, "stone"},
        {"Dead Bush", 'b', false, L::Blob, 3, "spruce_leaves"},
        {"Igloo", 'H', false, L::Single, 2, "snow_block", 3},
        {"Frost Tower", 'W', false, L::Single, 1, "polished_diorite", 2},
        {"Frozen Ruins", 'R', false, L::Single, 2, "cracked_stone_bricks", 2},
        {"Treasure Chest", 'C', false, L::Single, 1, "chest", 0, true},
        {"Labyrinth Gate", 'L', false, L::Single, 1, "iron_bars", 0, true},
        {"Yeti Cave", 'D', false, L::Single, 1, "deepslate", 0, true},
        {"Frost Flower", 'h', true, L::Single, 2, "light_blue_wool", 0, true}}},
  };
  return kThemes;
}

struct Cast {
  const Theme* theme;
  std::string hero, villain, npc;
};

inline Cast cast_for(std::uint64_t seed) {
  const auto& t = themes()[seed % themes().size()];
  Rng rng(mix_seed(seed, 0xca57));
  return Cast{&t, std::string(t.heroes[rng.index(t.heroes.size())]), std::string(t.villains[rng.index(t.villains.size())]),
              std::string(t.npcs[rng.index(t.npcs.size())])};
}

struct ObjectiveLine {
  std::string text;
  char anchor;
};

inline std::vector<ObjectiveLine> objectives_for(const Cast& c, int n) {
  const Theme& t = *c.theme;
  std::vector<ObjectiveLine> all = {
      {"Defeat " + c.villain + " in the heart of the " + std::string(t.place), kAntagonist},
      {"Talk to " + c.npc + " at the old camp", '&'},
      {"Find the exit of the labyrinth beneath the Labyrinth Gate", 'L'},
      {"Survive waves of " + std::string(t.beasts) + " at the " + std::string(t.den), 'D'},
      {"Collect " + std::string(t.herb) + " for " + c.npc, 'h'},
      {"Find the Treasure Chest hidden near the ruins", 'C'},
      {"Speak with the watchman by the tower", '&'},
      {"Gather relic shards for the final ritual", 'h'},
  };
  std::vector<ObjectiveLine> out;
  for (int i = 0; i < n; ++i) {
    if (i < static_cast<int>(all.size())) out.push_back(all[i]);
    else out.push_back({"Gather relic shards cache " + std::to_string(i - all.size() + 2), 'h'});
  }
  return out;
}

inline int first_int_after(std::string_view text, const std::regex& re, int fallback) {
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(text.begin(), text.end(), m, re)) return std::stoi(m[1].str());
  return fallback;
}

inline std::string story(const Cast& c, int paragraphs, int n_objectives) {
  const Theme& t = *c.theme;
  const auto objs = objectives_for(c, n_objectives);
  std::vector<std::string> out;
  out.push_back(c.hero + " grew up at the edge of the " + std::string(t.place) + ", where " + c.npc +
                " keeps watch over the old paths. When " + c.villain + " " + std::string(t.threat) + ", the land began to wither and " +
                c.hero + " set out to stop the curse before it reached the villages.");
  std::vector<std::string> middle;
  for (std::size_t i = 1; i < objs.size(); ++i) {
    std::string s = objs[i].text;
    s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    middle.push_back(s);
  }
  const int slots = std::max(1, paragraphs - 2);
  for (int p = 0; p < slots; ++p) {
    std::string para = p == 0 ? "The journey is long. " : "Deeper in the " + std::string(t.place) + ", the danger grows. ";
    std::vector<std::string> mine;
    for (std::size_t i = p; i < middle.size(); i += slots) mine.push_back(middle[i]);
    for (std::size_t i = 0; i < mine.size(); ++i) {
      para += (i == 0 ? c.hero + " must " : std::string("Then ") + c.hero + " must ") + mine[i] + ". ";
    }
    para += "Along the way the " + std::string(t.beasts) + " of " + c.villain + " watch every step.";
    out.push_back(para);
  }
  std::string last = objs[0].text;
  last[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(last[0])));
  out.push_back("At last " + c.hero + " must " + last + ". Only then will the " + std::string(t.place) +
                " heal and " + c.npc + " light the beacon of peace.");
  std::string text;
  for (std::size_t i = 0; i < out.size(); ++i) text += (i ? "\n\n" : "") + out[i];
  return text + "\n";
}

inline std::string legend_text(const Cast& c, Rng& rng) {
  const char q = rng.chance(0.5) ? '\'' : '"';
  auto quoted = [q](std::string_view s) { return std::string(1, q) + std::string(s) + std::string(1, q); };
  std::string out = "{";
  for (const auto& tile : c.theme->tiles) out += quoted(tile.name) + ": " + quoted(std::string(1, tile.ch)) + ", ";
  out += quoted("Protagonist") + ": " + quoted("@") + ", " + quoted("Antagonist") + ": " + quoted("#") + ", " +
         quoted("Hermit NPC") + ": " + quoted("&");
  if (rng.chance(0.5)) out += ",";
  return out + "}";
}

inline std::vector<std::string> make_world(const Theme& t, Rng& rng, int round) {
  const int rows = static_cast<int>(rng.uniform(16, 22));
  const int cols = static_cast<int>(rng.uniform(18, 26));
  const Extent e{rows, cols};
  const char base = t.tiles.front().ch;
  std::vector<std::string> g(rows, std::string(cols, base));
  auto set = [&](Cell c, char ch) {
    if (e.contains(c)) g[c.row][c.col] = ch;
  };
  auto at = [&](Cell c) { return g[c.row][c.col]; };
  const double density = round > 1 ? 0.5 : 1.0;
  const double area = static_cast<double>(rows * cols) / 400.0;

  for (const auto& tile : t.tiles) {
    if (tile.layout != Layout::Blob) continue;
    const double factor = tile.walkable ? area * 3.0 : area * density;
    const int blobs = std::max(1, static_cast<int>(std::lround(tile.amount * factor)));
    for (int b = 0; b < blobs; ++b) {
      Cell c{static_cast<int>(rng.index(rows)), static_cast<int>(rng.index(cols))};
      const int len = static_cast<int>(rng.uniform(2, tile.walkable ? 14 : 5));
      for (int k = 0; k < len; ++k) {
        set(c, tile.ch);
        c = c + kSteps[rng.index(4)];
        c = Cell{std::clamp(c.row, 0, rows - 1), std::clamp(c.col, 0, cols - 1)};
      }
    }
  }

  char river = 0, bridge = 0, path = 0;
  for (const auto& tile : t.tiles) {
    if (tile.layout == Layout::River) river = tile.ch;
    if (tile.layout == Layout::Bridge) bridge = tile.ch;
    if (tile.layout == Layout::Path) path = tile.ch;
  }
  if (river) {
    int c = static_cast<int>(rng.uniform(cols / 4, 3 * cols / 4));
    for (int r = 0; r < rows; ++r) {
      set({r, c}, river);
      if (rng.chance(0.3)) {
        const int next = std::clamp(c + (rng.chance(0.5) ? 1 : -1), 1, cols - 2);
        set({r, next}, river);
        c = next;
      }
    }
    for (int k = 0; k < 2; ++k) {
      const int r = static_cast<int>(rng.index(rows));
      for (int cc = 0; cc < cols; ++cc) {
        if (at({r, cc}) == river) set({r, cc}, bridge);
      }
    }
  }
  auto pave = [&](Cell c) { set(c, e.contains(c) && at(c) == river ? bridge : path); };
  int pr = static_cast<int>(rng.uniform(rows / 3, 2 * rows / 3));
  for (int c = 0; c < cols; ++c) {
    pave({pr, c});
    if (c % 5 == 4 && rng.chance(0.5)) {
      const int nr = std::clamp(pr + (rng.chance(0.5) ? 1 : -1), 1, rows - 2);
      pave({nr, c});
      pr = nr;
    }
  }
  const int pc = static_cast<int>(rng.uniform(2, cols - 3));
  for (int r = 0; r < rows; ++r) pave({r, pc});

  for (const auto& tile : t.tiles) {
    if (tile.layout != Layout::Single) continue;
    for (int k = 0; k < tile.amount; ++k) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        const Cell c{static_cast<int>(rng.uniform(1, rows - 2)), static_cast<int>(rng.uniform(1, cols - 2))};
        const char here = at(c);
        if (here == river || here == bridge || here == path) continue;
        set(c, tile.ch);
        break;
      }
    }
  }
  if (rng.chance(0.3)) {
    auto& row = g[rng.index(rows)];
    row.pop_back();
  }
  return g;
}

inline std::string fenced(const std::vector<std::string>& rows) {
  std::string out = "Here is the world:\n```\n";
  for (const auto& r : rows) out += r + "\n";
  return out + "```\n";
}

inline TileSet walkable_of(const Theme& t) {
  TileSet s{kProtagonist};
  for (const auto& tile : t.tiles) {
    if (tile.walkable) s.insert(tile.ch);
  }
  return s;
}

inline std::string placement(const Cast& cast, const TileGrid& grid, int n, Rng& rng) {
  const TileSet walk = walkable_of(*cast.theme);
  const Extent e = grid.extent();
  auto walkable = [&](Cell c) { return e.contains(c) && walk.contains(grid.at(c)); };
  std::vector<Cell> bottom;
  for (int r = e.rows * 2 / 3; r < e.rows; ++r) {
    for (int c = 0; c < e.cols; ++c) {
      if (walkable({r, c})) bottom.push_back({r, c});
    }
  }
  Cell start{e.rows - 1, e.cols / 2};
  if (!bottom.empty()) start = bottom[rng.index(bottom.size())];

  std::vector<int> dist(e.area(), -1);
  std::queue<Cell> q;
  dist[e.index(start)] = 0;
  q.push(start);
  std::vector<Cell> reach;
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    reach.push_back(c);
    for (const Cell d : kSteps) {
      const Cell nb = c + d;
      if (walkable(nb) && dist[e.index(nb)] < 0) {
        dist[e.index(nb)] = dist[e.index(c)] + 1;
        q.push(nb);
      }
    }
  }
  std::set<Cell> used{start};
  auto pick_reachable = [&]() {
    for (int attempt = 0; attempt < 100 && reach.size() > 1; ++attempt) {
      const Cell c = reach[rng.index(reach.size())];
      if (!used.contains(c)) return c;
    }
    return Cell{static_cast<int>(rng.index(e.rows)), static_cast<int>(rng.index(e.cols))};
  };
  auto near_reach = [&](Cell c) {
    if (used.contains(c)) return false;
    for (const Cell d : kSteps) {
      const Cell nb = c + d;
      if (e.contains(nb) && dist[e.index(nb)] >= 0) return true;
    }
    return false;
  };

  const char q1 = rng.chance(0.5) ? '\'' : '"';
  auto quoted = [q1](std::string_view s) { return std::string(1, q1) + std::string(s) + std::string(1, q1); };
  auto entry = [&](std::string_view key, char tile, Cell c) {
    return quoted(key) + ": [" + quoted(std::string(1, tile)) + ", " + std::to_string(c.row) + ", " + std::to_string(c.col) + "]";
  };
  std::string out = "{" + entry("Protagonist", kProtagonist, start);
  for (const auto& o : objectives_for(cast, n)) {
    Cell at;
    if (o.anchor == kAntagonist) {
      at = start;
      int best = -1;
      for (const Cell c : reach) {
        if (!used.contains(c) && dist[e.index(c)] > best) {
          best = dist[e.index(c)];
          at = c;
        }
      }
    } else {
      std::vector<Cell> matches;
      for (int r = 0; r < e.rows; ++r) {
        for (int c = 0; c < e.cols; ++c) {
          if (grid.at({r, c}) == o.anchor && near_reach({r, c})) matches.push_back({r, c});
        }
      }
      at = matches.empty() ? pick_reachable() : matches[rng.index(matches.size())];
    }
    used.insert(at);
    out += ", " + entry(o.text, o.anchor, at);
  }
  return out + "}";
}

inline nlohmann::json structure(const Theme& t, char tile, int size, Rng& rng) {
  std::string wall = "stone_bricks";
  for (const auto& tt : t.tiles) {
    if (tt.ch == tile) wall = std::string(tt.block);
  }
  const int last = size - 1;
  const bool tower = tile == 'W';
  const bool ruin = tile == 'R';
  const int height = tower ? 5 : 3;
  const Cell door{last, size / 2};
  nlohmann::json voxels = nlohmann::json::array();
  for (int z = 0; z < size; ++z) {
    for (int x = 0; x < size; ++x) {
      const bool border = z == 0 || x == 0 || z == last || x == last;
      if (!border) continue;
      const bool corner = (z == 0 || z == last) && (x == 0 || x == last);
      int h = height;
      if (ruin && !corner) h = static_cast<int>(rng.uniform(1, 3));
      for (int y = 0; y < h; ++y) {
        if (Cell{z, x} == door && y < 2) continue;
        const bool window = !tower && !ruin && y == 1 && !corner && rng.chance(0.25);
        voxels.push_back({{"x", x}, {"y", y}, {"z", z}, {"block", window ? "glass_pane" : wall}});
      }
    }
  }
  if (!ruin) {
    const std::string roof = tower ? "stone_brick_slab" : "spruce_planks";
    for (int z = 0; z < size; ++z) {
      for (int x = 0; x < size; ++x) voxels.push_back({{"x", x}, {"y", height}, {"z", z}, {"block", roof}});
    }
  }
  return {{"tile", std::string(1, tile)},
          {"footprint", size},
          {"entrances", nlohmann::json::array({nlohmann::json::array({door.row, door.col})})},
          {"voxels", voxels}};
}

}  // namespace stub

class StubBackend final : public TextBackend {
 public:
  explicit StubBackend(std::uint64_t seed, int embed_dim = 256) : seed_(seed), embed_dim_(embed_dim) {}

  std::string complete(std::string_view prompt, std::span<const Message> /*history*/) override {
    using namespace stub;
    const Cast cast = cast_for(seed_);
    const Theme& t = *cast.theme;
    Rng rng(mix_seed(seed_, fnv1a(prompt)));
    auto starts = [&](std::string_view prefix) { return prompt.substr(0, prefix.size()) == prefix; };
    auto has = [&](std::string_view s) { return prompt.find(s) != std::string_view::npos; };

    if (starts("Write a ") && has("paragraph story")) {
      static const std::regex para(R"((\d+) paragraph)"), objs(R"(There should be (\d+) objectives)");
      static const std::regex range(R"(\d+-(\d+) paragraph)");
      const int n = first_int_after(prompt, range, first_int_after(prompt, para, 4));
      return story(cast, n, first_int_after(prompt, objs, 8));
    }
    if (starts("Let's use the above story")) {
      return "Protagonist (@) - " + cast.hero + ": a young wanderer in a travel-worn cloak, carrying a short blade.\n"
             "Antagonist (#) - " + cast.villain + ": a towering figure wrapped in shadow with burning eyes.\n"
             "NPC (&) - " + cast.npc + ": a weathered guide with a lantern and a walking staff.\n";
    }
    if (starts("Create an exhaustive list of tiles")) {
      std::string out;
      for (const auto& tile : t.tiles) out += "- " + std::string(tile.name) + "\n";
      return out;
    }
    if (starts("Imagine each tile maps")) return legend_text(cast, rng);
    if (has("list the characters of every tile the protagonist can")) {
      std::string out = "[";
      for (const auto& tile : t.tiles) {
        if (tile.walkable) out += std::string(out.size() > 1 ? ", " : "") + "'" + tile.ch + "'";
      }
      return out + "]";
    }
    if (has("list the characters of the tiles that are important")) {
      std::string out = "['&'";
      for (const auto& tile : t.tiles) {
        if (tile.important) out += std::string(", '") + tile.ch + "'";
      }
      return out + "]";
    }
    if (starts(" Using the following tile")) {
      std::size_t round = 1, pos = 0;
      while ((pos = prompt.find("\nMap ", pos)) != std::string_view::npos) {
        ++round;
        ++pos;
      }
      Rng world_rng(mix_seed(seed_, 0x3011d + round));
      return fenced(make_world(t, world_rng, static_cast<int>(round)));
    }
    if (starts("You are a great planner")) {
      static const std::regex objs(R"(There should be (\d+) objectives)");
      return placement(cast, parse_grid(prompt), first_int_after(prompt, objs, 8), rng);
    }
    if (starts("Evaluate this map")) {
      const TileGrid g = parse_grid(prompt);
      return "The map is " + std::to_string(g.rows()) + " by " + std::to_string(g.cols()) +
             " tiles. Paths connect most regions and the river crossings create natural choke points. The level "
             "looks balanced, though some clusters of obstacles could be thinned.";
    }
    if (starts("Given the story, a 2D map")) {
      const auto freq = tile_frequencies(parse_grid(prompt));
      std::string out = "[";
      for (const auto& tile : t.tiles) {
        if (tile.scale && freq.contains(tile.ch)) out += std::string(out.size() > 1 ? ", " : "") + tile.ch;
      }
      return out + "]";
    }
    if (starts("For each of these tile notations")) {
      const auto lit = find_python_literal(prompt, '[');
      std::string out = "{";
      if (lit) {
        for (const auto& v : *lit) {
          const std::string c = v.get<std::string>();
          for (const auto& tile : t.tiles) {
            if (c.size() == 1 && tile.ch == c[0]) {
              out += std::string(out.size() > 1 ? ", " : "") + "'" + c + "': " + std::to_string(std::max(2, tile.scale));
            }
          }
        }
      }
      return out + "}";
    }
    if (starts("Design a Minecraft structure")) {
      static const std::regex re(R"(\(notation (.)\) that fits the story\. It must fill a (\d+) by)");
      std::match_results<std::string_view::const_iterator> m;
      if (!std::regex_search(prompt.begin(), prompt.end(), m, re)) throw Error(Errc::BackendError, "stub: bad structure prompt");
      return "```json\n" + structure(t, m[1].str()[0], std::stoi(m[2].str()), rng).dump() + "\n```";
    }
    if (starts("Translate each tile of the mapping")) {
      const auto lit = find_python_literal(prompt, '{');
      std::string out = "{";
      if (lit) {
        for (const auto& [name, v] : lit->items()) {
          for (const auto& tile : t.tiles) {
            if (tile.name == name) out += std::string(out.size() > 1 ? ", " : "") + "'" + name + "': '" + std::string(tile.block) + "'";
          }
        }
      }
      return out + "}";
    }
    if (starts("The following JSON lists every block")) return reconstruction(prompt, cast);
    throw Error(Errc::BackendError, "stub backend has no answer for this prompt");
  }

  bool supports_embed() const override { return true; }

  /// Hashed bag of words over lowercase alphabetic tokens.
  std::vector<double> embed(std::string_view text) override {
    std::vector<double> v(static_cast<std::size_t>(embed_dim_), 0.0);
    std::string token;
    auto flush = [&] {
      if (token.size() > 2) v[fnv1a(token) % v.size()] += 1.0;
      token.clear();
    };
    for (char ch : text) {
      if (std::isalpha(static_cast<unsigned char>(ch))) token += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      else flush();
    }
    flush();
    return v;
  }

  std::string name() const override { return "stub"; }

 private:
  static std::string reconstruction(std::string_view prompt, const stub::Cast& cast) {
    std::map<std::string, int> counts;
    static const std::regex re(R"re("block":"([a-z_]+)")re");
    for (std::regex_iterator<std::string_view::const_iterator> it(prompt.begin(), prompt.end(), re), end; it != end; ++it) {
      ++counts[(*it)[1].str()];
    }
    std::vector<std::pair<int, std::string>> top;
    for (const auto& [b, n] : counts) top.push_back({n, b});
    std::sort(top.rbegin(), top.rend());
    std::string blocks;
    for (std::size_t i = 0; i < std::min<std::size_t>(4, top.size()); ++i) {
      blocks += (i ? ", " : "") + top[i].second;
    }
    const auto& t = *cast.theme;
    return "This level shows the " + std::string(t.place) + ", built mostly from " + blocks + ". A hero named " + cast.hero +
           " must cross the land while the " + std::string(t.beasts) + " of " + cast.villain + " watch every step.\n\n" +
           cast.hero + " must talk to " + cast.npc + ", find the exit of the labyrinth, survive waves at the " + std::string(t.den) +
           " and collect " + std::string(t.herb) + ".\n\nAt last " + cast.hero + " must defeat " + cast.villain +
           " so the land can heal.\n";
  }

  std::uint64_t seed_;
  int embed_dim_;
};

}  // namespace storyforge
