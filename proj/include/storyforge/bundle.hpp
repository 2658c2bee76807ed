#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyforge/core.hpp"
#include "storyforge/export.hpp"
#include "storyforge/grid.hpp"
#include "storyforge/metrics.hpp"
#include "storyforge/scaling.hpp"
#include "storyforge/submap.hpp"

namespace storyforge {

inline constexpr int kBundleSchemaVersion = 1;

struct Validity {
  bool initial_valid = false;        // A* check on the pre-scaling map
  bool valid = false;                // flood check after scaling and portals
  std::vector<bool> reachable;       // per objective, final map
  int world_rounds = 0;

  friend bool operator==(const Validity&, const Validity&) = default;
};

/// Everything one generation run produced. Rendering or evaluating a bundle
/// needs nothing else.
struct LevelBundle {
  StorySpec story;
  TileLegend legend;
  TileSet walkable;
  std::vector<char> important;
  TileGrid initial_grid;
  TileGrid grid;
  TileClassification classification;
  Cell start;
  std::vector<Objective> objectives;
  ScalingPlan plan;
  std::vector<Placement> placements;
  std::vector<StructureTemplate> structures;  // one per placement
  WalkOverrides overrides;
  std::vector<Portal> portals;
  std::vector<SubMap> submaps;
  TileBlockTable tile_blocks;
  BlockWorld world;
  Validity validity;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::string trace_file;

  OverlayWalkable passable() const { return OverlayWalkable{&grid, &walkable, &overrides}; }

  std::vector<Cell> objective_cells() const {
    std::vector<Cell> out;
    for (const auto& o : objectives) out.push_back(o.position);
    return out;
  }

  friend bool operator==(const LevelBundle&, const LevelBundle&) = default;
};

inline MapEvaluation evaluate_bundle(const LevelBundle& b, std::string id) {
  const auto targets = b.objective_cells();
  return evaluate_map(std::move(id), b.grid, b.passable(), b.start, targets);
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson cell_json(Cell c) { return ojson::array({c.row, c.col}); }
inline Cell cell_from(const ojson& j) { return Cell{j.at(0).get<int>(), j.at(1).get<int>()}; }
inline std::string ch(char c) { return std::string(1, c); }

inline char char_from(const ojson& j) {
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw Error(Errc::BadFormat, "expected a single character, got '" + s + "'");
  return s[0];
}

inline ojson chars_json(const auto& chars) {
  ojson a = ojson::array();
  for (char c : chars) a.push_back(ch(c));
  return a;
}

inline ojson submap_json(const SubMap& m) {
  ojson j;
  j["id"] = m.id;
  j["kind"] = kind_name(m.kind);
  j["grid"] = m.grid.row_strings();
  j["entry"] = cell_json(m.entry);
  ojson done = ojson::object();
  if (m.completion.exit) done["exit"] = cell_json(*m.completion.exit);
  if (m.kind == ObjectiveKind::SurviveWaves) {
    done["waves"] = m.completion.waves;
    ojson spawns = ojson::array();
    for (const auto& wave : m.completion.spawns) {
      ojson w = ojson::array();
      for (const Cell c : wave) w.push_back(cell_json(c));
      spawns.push_back(std::move(w));
    }
    done["spawns"] = std::move(spawns);
  }
  if (m.kind == ObjectiveKind::CollectItems) {
    ojson items = ojson::array();
    for (const Cell c : m.completion.items) items.push_back(cell_json(c));
    done["items"] = std::move(items);
  }
  j["completion"] = std::move(done);
  j["notes"] = m.notes;
  return j;
}

inline SubMap submap_from(const ojson& j) {
  SubMap m;
  m.id = j.at("id").get<std::string>();
  m.kind = kind_from_name(j.at("kind").get<std::string>());
  m.grid = TileGrid(j.at("grid").get<std::vector<std::string>>());
  m.entry = cell_from(j.at("entry"));
  const auto& done = j.at("completion");
  if (done.contains("exit")) m.completion.exit = cell_from(done.at("exit"));
  if (done.contains("waves")) m.completion.waves = done.at("waves").get<int>();
  if (done.contains("spawns")) {
    for (const auto& wave : done.at("spawns")) {
      std::vector<Cell> w;
      for (const auto& c : wave) w.push_back(cell_from(c));
      m.completion.spawns.push_back(std::move(w));
    }
  }
  if (done.contains("items")) {
    for (const auto& c : done.at("items")) m.completion.items.push_back(cell_from(c));
  }
  m.notes = j.value("notes", std::vector<std::string>{});
  return m;
}

inline ojson blocks_json(const BlockWorld& w) {
  ojson a = ojson::array();
  for (const auto& b : w.blocks()) a.push_back(ojson{{"x", b.x}, {"y", b.y}, {"z", b.z}, {"block", b.block}});
  return a;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const LevelBundle& b) {
  using detail::cell_json;
  using detail::ch;
  using detail::ojson;
  ojson j;
  j["schema_version"] = kBundleSchemaVersion;
  j["story"] = {{"paragraphs", b.story.paragraphs},
                {"n_objectives", b.story.n_objectives},
                {"protagonist", b.story.protagonist},
                {"antagonist", b.story.antagonist},
                {"npcs", b.story.npcs},
                {"environment", b.story.environment}};
  ojson legend = ojson::array();
  for (const auto& [name, c] : b.legend.entries()) legend.push_back(ojson::array({name, ch(c)}));
  j["legend"] = std::move(legend);
  j["walkable"] = detail::chars_json(b.walkable);
  j["important"] = detail::chars_json(b.important);
  j["initial_grid"] = b.initial_grid.row_strings();
  j["grid"] = b.grid.row_strings();
  j["classification"] = b.classification.digit_rows();
  j["start"] = cell_json(b.start);
  ojson objectives = ojson::array();
  for (const auto& o : b.objectives) {
    objectives.push_back({{"description", o.description},
                          {"kind", kind_name(o.kind)},
                          {"anchor", ch(o.anchor)},
                          {"position", cell_json(o.position)}});
  }
  j["objectives"] = std::move(objectives);
  ojson sizes = ojson::object();
  for (const auto& [c, s] : b.plan.sizes) sizes[ch(c)] = s;
  j["scaling_plan"] = {{"to_scale", detail::chars_json(b.plan.to_scale)}, {"sizes", std::move(sizes)}};
  ojson placements = ojson::array();
  for (const auto& p : b.placements) {
    placements.push_back({{"tile", ch(p.tile)}, {"top_left", cell_json(p.top_left)}, {"size", p.size}, {"score", p.score}});
  }
  j["placements"] = std::move(placements);
  ojson structures = ojson::array();
  for (const auto& s : b.structures) structures.push_back(ojson(to_json(s)));
  j["structures"] = std::move(structures);
  ojson blocked = ojson::array(), open = ojson::array();
  for (const Cell c : b.overrides.blocked) blocked.push_back(cell_json(c));
  for (const Cell c : b.overrides.open) open.push_back(cell_json(c));
  j["walk_overrides"] = {{"blocked", std::move(blocked)}, {"open", std::move(open)}};
  ojson portals = ojson::array();
  for (const auto& p : b.portals) {
    portals.push_back({{"main_map_position", cell_json(p.main_map_position)},
                       {"submap_id", p.submap_id},
                       {"return_position", cell_json(p.return_position)}});
  }
  j["portals"] = std::move(portals);
  ojson submaps = ojson::array();
  for (const auto& m : b.submaps) submaps.push_back(detail::submap_json(m));
  j["submaps"] = std::move(submaps);
  ojson table = ojson::object();
  for (const auto& [c, tb] : b.tile_blocks) {
    table[ch(c)] = {{"ground", tb.ground}, {"surface", tb.surface ? ojson(*tb.surface) : ojson(nullptr)}};
  }
  j["tile_blocks"] = std::move(table);
  j["blocks"] = detail::blocks_json(b.world);
  j["validity"] = {{"initial_valid", b.validity.initial_valid},
                   {"valid", b.validity.valid},
                   {"reachable", b.validity.reachable},
                   {"world_rounds", b.validity.world_rounds}};
  j["config"] = b.config;
  j["trace_file"] = b.trace_file;
  return j;
}

inline LevelBundle bundle_from_json(const nlohmann::ordered_json& j) {
  using detail::cell_from;
  using detail::char_from;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kBundleSchemaVersion) {
      throw Error(Errc::BadFormat, "unsupported bundle schema_version " + std::to_string(version));
    }
    LevelBundle b;
    const auto& s = j.at("story");
    b.story.paragraphs = s.at("paragraphs").get<std::vector<std::string>>();
    b.story.n_objectives = s.at("n_objectives").get<int>();
    b.story.protagonist = s.at("protagonist").get<std::string>();
    b.story.antagonist = s.at("antagonist").get<std::string>();
    b.story.npcs = s.at("npcs").get<std::vector<std::string>>();
    b.story.environment = s.at("environment").get<std::string>();
    std::vector<TileLegend::Entry> entries;
    for (const auto& e : j.at("legend")) entries.emplace_back(e.at(0).get<std::string>(), char_from(e.at(1)));
    b.legend = TileLegend::from_entries(std::move(entries));
    for (const auto& c : j.at("walkable")) b.walkable.insert(char_from(c));
    for (const auto& c : j.at("important")) b.important.push_back(char_from(c));
    b.initial_grid = TileGrid(j.at("initial_grid").get<std::vector<std::string>>());
    b.grid = TileGrid(j.at("grid").get<std::vector<std::string>>());
    b.classification = TileClassification::from_digit_rows(j.at("classification").get<std::vector<std::string>>());
    b.start = cell_from(j.at("start"));
    for (const auto& o : j.at("objectives")) {
      b.objectives.push_back({o.at("description").get<std::string>(), kind_from_name(o.at("kind").get<std::string>()),
                              char_from(o.at("anchor")), cell_from(o.at("position"))});
    }
    const auto& plan = j.at("scaling_plan");
    for (const auto& c : plan.at("to_scale")) b.plan.to_scale.push_back(char_from(c));
    for (const auto& [k, v] : plan.at("sizes").items()) b.plan.sizes[char_from(detail::ojson(k))] = v.get<int>();
    for (const auto& p : j.at("placements")) {
      b.placements.push_back({char_from(p.at("tile")), cell_from(p.at("top_left")), p.at("size").get<int>(),
                              p.at("score").get<std::size_t>()});
    }
    for (const auto& t : j.at("structures")) b.structures.push_back(structure_from_json(nlohmann::json(t)));
    for (const auto& c : j.at("walk_overrides").at("blocked")) b.overrides.blocked.insert(cell_from(c));
    for (const auto& c : j.at("walk_overrides").at("open")) b.overrides.open.insert(cell_from(c));
    for (const auto& p : j.at("portals")) {
      b.portals.push_back({cell_from(p.at("main_map_position")), p.at("submap_id").get<std::string>(),
                           cell_from(p.at("return_position"))});
    }
    for (const auto& m : j.at("submaps")) b.submaps.push_back(detail::submap_from(m));
    for (const auto& [k, v] : j.at("tile_blocks").items()) {
      TileBlock tb{v.at("ground").get<std::string>(), std::nullopt};
      if (!v.at("surface").is_null()) tb.surface = v.at("surface").get<std::string>();
      b.tile_blocks[char_from(detail::ojson(k))] = std::move(tb);
    }
    std::vector<Voxel> blocks;
    for (const auto& r : j.at("blocks")) {
      blocks.push_back({r.at("x").get<int>(), r.at("y").get<int>(), r.at("z").get<int>(), r.at("block").get<std::string>()});
    }
    b.world = BlockWorld(std::move(blocks));
    const auto& v = j.at("validity");
    b.validity.initial_valid = v.at("initial_valid").get<bool>();
    b.validity.valid = v.at("valid").get<bool>();
    b.validity.reachable = v.at("reachable").get<std::vector<bool>>();
    b.validity.world_rounds = v.at("world_rounds").get<int>();
    b.config = j.at("config");
    b.trace_file = j.at("trace_file").get<std::string>();
    return b;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::BadFormat, std::string("bundle: ") + ex.what());
  }
}

inline std::string dump_bundle(const LevelBundle& b) { return to_json(b).dump(2) + "\n"; }

inline LevelBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::BadConfig, "cannot open " + path);
  try {
    return bundle_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& ex) {
    throw Error(Errc::BadFormat, path + ": " + ex.what());
  }
}

}  // namespace storyforge
