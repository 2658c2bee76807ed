#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storyforge/backend.hpp"
#include "storyforge/bundle.hpp"
#include "storyforge/core.hpp"
#include "storyforge/export.hpp"
#include "storyforge/grid.hpp"
#include "storyforge/literal.hpp"
#include "storyforge/metrics.hpp"
#include "storyforge/pathfind.hpp"
#include "storyforge/prompts.hpp"
#include "storyforge/scaling.hpp"
#include "storyforge/submap.hpp"

namespace storyforge {

struct PipelineConfig {
  int min_paragraphs = 4;
  int max_paragraphs = 5;
  int n_objectives = 8;
  int max_refinement_rounds = 3;
  std::size_t astar_iteration_cap = kDefaultIterationCap;
  bool scaling_enabled = true;
  bool safe_scaling = false;
  std::uint64_t rng_seed = 0;
  std::string backend = "stub";
  int submap_size = kDefaultSubmapSize;
  int arena_waves = 3;
  int collect_items = 5;
  int height_base = 0;

  void validate() const {
    if (max_refinement_rounds < 1) throw Error(Errc::BadConfig, "max_refinement_rounds must be >= 1");
    if (n_objectives < 1) throw Error(Errc::BadConfig, "n_objectives must be >= 1");
    if (min_paragraphs < 1 || max_paragraphs < min_paragraphs) throw Error(Errc::BadConfig, "bad paragraph range");
    if (astar_iteration_cap < 1) throw Error(Errc::BadConfig, "astar_iteration_cap must be >= 1");
    if (submap_size < 9) throw Error(Errc::BadConfig, "submap_size must be >= 9");
  }

  std::string paragraph_range() const {
    return min_paragraphs == max_paragraphs ? std::to_string(min_paragraphs)
                                            : std::to_string(min_paragraphs) + "-" + std::to_string(max_paragraphs);
  }

  nlohmann::ordered_json snapshot() const {
    return {{"backend", backend},
            {"rng_seed", rng_seed},
            {"paragraphs", paragraph_range()},
            {"n_objectives", n_objectives},
            {"max_refinement_rounds", max_refinement_rounds},
            {"astar_iteration_cap", astar_iteration_cap},
            {"scaling_enabled", scaling_enabled},
            {"safe_scaling", safe_scaling},
            {"submap_size", submap_size},
            {"arena_waves", arena_waves},
            {"collect_items", collect_items},
            {"height_base", height_base},
            {"prompt_version", std::string(prompts::kVersion)}};
  }
};

// ---------------------------------------------------------------------------
// Trace

struct TraceRecord {
  std::size_t seq = 0;
  std::string stage;
  int round = 1;
  std::string digest;
  std::vector<Message> history;
  std::string prompt;
  std::string response;
  std::string parse_outcome;
  std::string verdict;
  std::optional<std::string> map_revision;
};

class GenerationTrace {
 public:
  std::vector<TraceRecord>& records() noexcept { return records_; }
  const std::vector<TraceRecord>& records() const noexcept { return records_; }

  TraceRecord& add(TraceRecord r) {
    r.seq = records_.size();
    records_.push_back(std::move(r));
    return records_.back();
  }

  std::size_t count(std::string_view stage) const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const TraceRecord& r) { return r.stage == stage; }));
  }

  /// One JSON object per line, in issue order.
  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records_) {
      nlohmann::ordered_json j;
      j["seq"] = r.seq;
      j["stage"] = r.stage;
      j["round"] = r.round;
      j["prompt_sha256"] = r.digest;
      j["history_messages"] = r.history.size();
      j["prompt"] = r.prompt;
      j["response"] = r.response;
      j["parse_outcome"] = r.parse_outcome;
      j["verdict"] = r.verdict;
      j["map_revision"] = r.map_revision ? nlohmann::ordered_json(*r.map_revision) : nlohmann::ordered_json(nullptr);
      out += j.dump() + "\n";
    }
    return out;
  }

  /// Replay fixture array reproducing every exchange of this trace.
  nlohmann::ordered_json replay_fixtures() const {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    std::set<std::string> seen;
    for (const auto& r : records_) {
      if (!seen.insert(r.digest).second) continue;
      out.push_back({{"prompt_sha256", r.digest}, {"stage", r.stage}, {"response", r.response}});
    }
    return out;
  }

 private:
  std::vector<TraceRecord> records_;
};

/// Backend, configuration and trace for one run.
struct Session {
  const PipelineConfig& config;
  TextBackend& backend;
  GenerationTrace& trace;

  std::size_t ask(std::string_view stage, int round, const std::string& prompt, std::span<const Message> history) {
    TraceRecord r;
    r.stage = std::string(stage);
    r.round = round;
    r.digest = request_digest(prompt, history);
    r.history.assign(history.begin(), history.end());
    r.prompt = prompt;
    r.response = backend.complete(prompt, history);
    return trace.add(std::move(r)).seq;
  }

  TraceRecord& record(std::size_t seq) { return trace.records().at(seq); }

  /// Ask and parse, re-asking with the parse error appended until the round
  /// budget runs out; then the last parse error propagates.
  template <class Parse>
  auto ask_parsed(std::string_view stage, const std::string& prompt, std::span<const Message> history, Parse&& parse)
      -> decltype(parse(std::string{})) {
    std::string last_error;
    Errc last_code = Errc::ParseFailure;
    for (int round = 1; round <= config.max_refinement_rounds; ++round) {
      const std::string p = round == 1 ? prompt : prompt + prompts::render(prompts::kRetry, {{"error", last_error}});
      const std::size_t seq = ask(stage, round, p, history);
      try {
        auto value = parse(record(seq).response);
        record(seq).parse_outcome = "ok";
        return value;
      } catch (const Error& e) {
        record(seq).parse_outcome = e.what();
        last_error = e.what();
        last_code = e.code();
      }
    }
    throw Error(last_code, std::string(stage) + " failed after " + std::to_string(config.max_refinement_rounds) +
                               " rounds: " + last_error);
  }
};

// ---------------------------------------------------------------------------
// Parsing helpers

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) {
      if (!trim(current).empty()) out.push_back(trim(current));
      current.clear();
    } else {
      if (!current.empty()) current += ' ';
      current += trim(line);
    }
  }
  if (!trim(current).empty()) out.push_back(trim(current));
  return out;
}

inline std::vector<std::string> content_lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    t.erase(std::remove(t.begin(), t.end(), '*'), t.end());
    while (!t.empty() && (t[0] == '-' || t[0] == '#' || std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '.' ||
                          t[0] == ')' || t[0] == ' ')) {
      t.erase(0, 1);
    }
    t = trim(t);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline bool contains_any(std::string_view haystack, std::initializer_list<std::string_view> needles) {
  return std::any_of(needles.begin(), needles.end(), [&](std::string_view n) { return haystack.find(n) != std::string_view::npos; });
}

/// One character per element; multi-character elements are looked up as tile
/// names. Unresolvable elements are returned in `unknown`.
inline std::vector<char> resolve_chars(const ordered_json& list, const TileLegend& legend, std::vector<std::string>& unknown) {
  std::vector<char> out;
  for (const auto& v : list) {
    const std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    std::optional<char> c;
    if (s.size() == 1) c = s[0];
    else c = legend.char_of(s);
    if (!c) {
      unknown.push_back(s);
      continue;
    }
    if (std::find(out.begin(), out.end(), *c) == out.end()) out.push_back(*c);
  }
  return out;
}

inline std::string char_list_text(const auto& chars) {
  std::string out = "[";
  bool first = true;
  for (char c : chars) {
    if (!first) out += ", ";
    first = false;
    out += "'" + std::string(1, c) + "'";
  }
  return out + "]";
}

}  // namespace detail

/// Keyword classification over the five objective kinds; ChatWithNpc when no
/// keyword matches.
inline ObjectiveKind classify_objective(std::string_view description) {
  const std::string d = detail::lower(description);
  using detail::contains_any;
  if (contains_any(d, {"defeat", "kill", "slay", "vanquish", "destroy", "confront", "battle", "fight", "overthrow", "banish"})) {
    return ObjectiveKind::DefeatEnemy;
  }
  if (contains_any(d, {"maze", "labyrinth", "exit", "escape"})) return ObjectiveKind::ExitMaze;
  if (contains_any(d, {"survive", "wave", "defend", "withstand", "hold off", "fend off"})) return ObjectiveKind::SurviveWaves;
  if (contains_any(d, {"chat", "talk", "speak", "ask ", "meet", "npc", "convince", "consult"})) return ObjectiveKind::ChatWithNpc;
  if (contains_any(d, {"collect", "gather", "find", "retrieve", "chest", "item", "recover", "obtain", "harvest"})) {
    return ObjectiveKind::CollectItems;
  }
  return ObjectiveKind::ChatWithNpc;
}

// ---------------------------------------------------------------------------
// Stages

struct StoryResult {
  StorySpec story;
  std::vector<Message> history;  // the story exchange, context for later prompts
};

inline std::string story_prompt(const PipelineConfig& cfg) {
  return prompts::render(prompts::kStory, {{"n_paragraphs", cfg.paragraph_range()},
                                           {"n_objectives", std::to_string(cfg.n_objectives)}});
}

/// A story is accepted once it has at least two paragraphs.
inline StoryResult generate_story(Session& s) {
  const std::string prompt = story_prompt(s.config);
  std::string raw;
  auto story = s.ask_parsed("story", prompt, {}, [&](const std::string& response) {
    StorySpec spec;
    spec.paragraphs = detail::split_paragraphs(response);
    if (spec.paragraphs.size() < 2) {
      throw Error(Errc::MalformedStory, "expected several paragraphs, got " + std::to_string(spec.paragraphs.size()));
    }
    spec.n_objectives = s.config.n_objectives;
    raw = response;
    return spec;
  });
  return StoryResult{std::move(story), {Message{"user", prompt}, Message{"assistant", raw}}};
}

struct WorldInputs {
  TileLegend legend;
  TileSet walkable;
  std::vector<char> important;
};

/// Characters, tiles, tile mapping, walkable and important tiles, asked in one
/// growing conversation that starts from the story.
inline WorldInputs extract_world_inputs(Session& s, StorySpec& story, const std::vector<Message>& story_history) {
  std::vector<Message> convo = story_history;
  auto exchange = [&](std::string_view prompt, const std::string& response) {
    convo.push_back(Message{"user", std::string(prompt)});
    convo.push_back(Message{"assistant", response});
  };

  const std::string characters = s.ask_parsed("characters", std::string(prompts::kCharacters), convo, [](const std::string& r) {
    if (detail::trim(r).empty()) throw Error(Errc::ParseFailure, "empty character description");
    return r;
  });
  exchange(prompts::kCharacters, characters);
  for (const auto& line : detail::content_lines(characters)) {
    const std::string l = detail::lower(line);
    if (story.protagonist.empty() && l.find("protagonist") != std::string::npos) story.protagonist = line;
    else if (story.antagonist.empty() && l.find("antagonist") != std::string::npos) story.antagonist = line;
    else story.npcs.push_back(line);
  }
  if (story.protagonist.empty() && !story.npcs.empty()) {
    story.protagonist = story.npcs.front();
    story.npcs.erase(story.npcs.begin());
  }
  if (story.antagonist.empty() && !story.npcs.empty()) {
    story.antagonist = story.npcs.front();
    story.npcs.erase(story.npcs.begin());
  }

  const std::string tiles = s.ask_parsed("tiles", std::string(prompts::kTiles), convo, [](const std::string& r) {
    if (detail::trim(r).empty()) throw Error(Errc::ParseFailure, "empty tile list");
    return r;
  });
  exchange(prompts::kTiles, tiles);
  story.environment = detail::trim(tiles);

  std::string legend_raw;
  TileLegend legend = s.ask_parsed("tile_mapping", std::string(prompts::kTileMapping), convo, [&](const std::string& r) {
    legend_raw = r;
    return parse_legend(r);
  });
  exchange(prompts::kTileMapping, legend_raw);

  const std::string dict = render_legend(legend);
  auto char_subset = [&](std::string_view what) {
    return [&legend, what](const std::string& r) {
      const auto lit = find_python_literal(r, '[');
      if (!lit || !lit->is_array()) throw Error(Errc::ParseFailure, std::string("no list of ") + std::string(what));
      std::vector<std::string> unknown;
      auto chars = detail::resolve_chars(*lit, legend, unknown);
      for (char c : chars) {
        if (!legend.contains(c)) unknown.push_back(std::string(1, c));
      }
      if (!unknown.empty()) throw Error(Errc::UnknownTile, std::string(what) + " not in legend: " + unknown.front());
      return chars;
    };
  };
  const auto walkable = s.ask_parsed("walkable", prompts::render(prompts::kWalkable, {{"tile_map_dict", dict}}), convo,
                                     char_subset("walkable tiles"));
  const auto important = s.ask_parsed("important", prompts::render(prompts::kImportant, {{"tile_map_dict", dict}}), convo,
                                      char_subset("important tiles"));

  WorldInputs in;
  in.legend = std::move(legend);
  in.walkable = TileSet(walkable.begin(), walkable.end());
  in.walkable.insert(kProtagonist);
  in.important = important;
  return in;
}

/// Unknown characters become the fill tile; '@' markers are lifted out (the
/// start comes from objective placement). Returns the padded grid and the
/// first '@' seen, if any.
inline std::pair<TileGrid, std::optional<Cell>> sanitize_world(const TileGrid& raw, const WorldInputs& in,
                                                               std::size_t& replaced) {
  const char fill = default_fill(raw, in.walkable);
  std::vector<std::string> rows = raw.row_strings();
  std::optional<Cell> marker;
  replaced = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      char& ch = rows[r][c];
      if (ch == kProtagonist) {
        if (!marker) marker = Cell{static_cast<int>(r), static_cast<int>(c)};
        ch = fill;
      } else if (!in.legend.contains(ch)) {
        ch = fill;
        ++replaced;
      }
    }
  }
  return {pad_to_rectangle(TileGrid(std::move(rows)), fill), marker};
}

struct PlacedObjectives {
  TileGrid grid;  // with '@' and objective anchors stamped
  Cell start;
  std::vector<Objective> objectives;
};

/// Raw placement entry as proposed by the backend.
struct ProposedObjective {
  std::string description;
  std::string anchor;
  Cell position;
};

inline std::pair<std::vector<ProposedObjective>, std::optional<Cell>> parse_objective_dict(std::string_view text) {
  const auto lit = find_python_literal(text, '{');
  if (!lit || !lit->is_object()) throw Error(Errc::NoDict, "no objective dictionary");
  std::vector<ProposedObjective> out;
  std::optional<Cell> start;
  for (const auto& [key, value] : lit->items()) {
    if (!value.is_array() || value.size() < 3 || !value[1].is_number() || !value[2].is_number()) {
      throw Error(Errc::BadFormat, "objective '" + key + "' is not [tile, row, col]");
    }
    const std::string anchor = value[0].is_string() ? value[0].get<std::string>() : value[0].dump();
    const Cell pos{static_cast<int>(value[1].get<double>()), static_cast<int>(value[2].get<double>())};
    if (detail::lower(key) == "protagonist" || anchor == "@") {
      start = pos;
      continue;
    }
    out.push_back({key, anchor, pos});
  }
  if (out.empty()) throw Error(Errc::EmptyObjectives, "placement lists no objectives");
  return {out, start};
}

/// Snaps proposals onto the grid. A proposal keeps its position when the cell
/// already holds its anchor tile; otherwise the nearest free cell holding the
/// anchor is used, and failing that the anchor is stamped on the nearest free
/// walkable cell. Enforces exactly one DefeatEnemy objective.
inline PlacedObjectives realize_objectives(const TileGrid& world, const TileLegend& legend, const TileSet& walkable,
                                           const std::vector<ProposedObjective>& proposals,
                                           std::optional<Cell> proposed_start) {
  PlacedObjectives out{world, {}, {}};
  TileGrid& g = out.grid;
  const Extent e = g.extent();
  std::set<Cell> taken;
  auto free_walkable = [&](Cell c) { return !taken.contains(c) && walkable.contains(g.at(c)) && g.at(c) != kProtagonist; };

  const Cell start_from = proposed_start ? clamp_to(e, *proposed_start) : Cell{e.rows / 2, e.cols / 2};
  const auto start = bfs_nearest_valid(e, start_from, free_walkable);
  if (!start) throw Error(Errc::NotFound, "no walkable cell for the protagonist");
  out.start = *start;
  g.set(out.start, kProtagonist);
  taken.insert(out.start);

  for (const auto& p : proposals) {
    std::optional<char> anchor;
    if (p.anchor.size() == 1 && legend.contains(p.anchor[0])) anchor = p.anchor[0];
    else if (auto byname = legend.char_of(p.anchor)) anchor = *byname;

    const Cell from = clamp_to(e, p.position);
    std::optional<Cell> at;
    if (anchor) {
      at = bfs_nearest_valid(e, from, [&](Cell c) { return !taken.contains(c) && g.at(c) == *anchor; });
    }
    if (!at) {
      at = bfs_nearest_valid(e, from, free_walkable);
      if (!at) throw Error(Errc::NotFound, "no free cell for objective '" + p.description + "'");
      if (anchor) g.set(*at, *anchor);
      else anchor = g.at(*at);
    }
    taken.insert(*at);
    out.objectives.push_back(Objective{p.description, classify_objective(p.description), *anchor, *at});
  }

  std::vector<std::size_t> defeats;
  for (std::size_t i = 0; i < out.objectives.size(); ++i) {
    if (out.objectives[i].kind == ObjectiveKind::DefeatEnemy) defeats.push_back(i);
  }
  auto anchored_on_antagonist = [&](std::size_t i) { return out.objectives[i].anchor == kAntagonist; };
  if (defeats.empty()) {
    auto it = std::find_if(out.objectives.begin(), out.objectives.end(), [](const Objective& o) { return o.anchor == kAntagonist; });
    if (it != out.objectives.end()) {
      it->kind = ObjectiveKind::DefeatEnemy;
    } else {
      const auto at = bfs_nearest_valid(e, Cell{e.rows / 2, e.cols / 2}, free_walkable);
      if (!at) throw Error(Errc::NotFound, "no free cell for the antagonist");
      g.set(*at, kAntagonist);
      taken.insert(*at);
      out.objectives.push_back(Objective{"Defeat the antagonist", ObjectiveKind::DefeatEnemy, kAntagonist, *at});
    }
  } else if (defeats.size() > 1) {
    std::size_t keep = defeats.front();
    for (std::size_t i : defeats) {
      if (anchored_on_antagonist(i)) {
        keep = i;
        break;
      }
    }
    for (std::size_t i : defeats) {
      if (i != keep) out.objectives[i].kind = ObjectiveKind::SurviveWaves;
    }
  }
  return out;
}

inline PlacedObjectives place_objectives(Session& s, const TileGrid& world, const WorldInputs& in,
                                         const std::vector<Message>& story_history, std::optional<Cell> marker) {
  const std::string prompt =
      std::string(prompts::kObjectivePlacement) +
      prompts::render(prompts::kObjectiveContext, {{"tile_map", world.text()},
                                                   {"tile_map_dict", render_legend(in.legend)},
                                                   {"n_objectives", std::to_string(s.config.n_objectives)}});
  auto [proposals, start] = s.ask_parsed("objective_placement", prompt, story_history,
                                         [](const std::string& r) { return parse_objective_dict(r); });
  if (!start) start = marker;
  return realize_objectives(world, in.legend, in.walkable, proposals, start);
}

struct WorldResult {
  PlacedObjectives placed;
  bool valid = false;
  int rounds = 0;
  std::vector<std::string> problems;
};

/// A* from the start to every objective under the iteration cap.
inline std::vector<std::string> validate_world(const PlacedObjectives& p, const TileSet& walkable, std::size_t cap) {
  std::vector<std::string> problems;
  for (const auto& o : p.objectives) {
    PathQuery q{p.start, o.position, cap, true};
    const auto res = astar(p.grid, walkable, q);
    if (res.status == PathStatus::Unreachable) {
      problems.push_back("objective '" + o.description + "' at " + to_string(o.position) + " is unreachable");
    } else if (res.status == PathStatus::IterationCapExceeded) {
      problems.push_back("objective '" + o.description + "' at " + to_string(o.position) +
                         " was not reached within the search limit");
    }
  }
  return problems;
}

inline WorldResult generate_world(Session& s, const WorldInputs& in, const std::vector<Message>& story_history) {
  const std::string base = prompts::render(prompts::kWorld, {{"tile_map_dict", render_legend(in.legend)},
                                                             {"important_tiles_list", detail::char_list_text(in.important)},
                                                             {"walkable_tiles_list", detail::char_list_text(in.walkable)}});
  std::vector<std::string> previous;
  std::vector<std::string> last_problems;
  std::optional<WorldResult> best;
  for (int round = 1; round <= s.config.max_refinement_rounds; ++round) {
    std::string prompt = base;
    if (!previous.empty()) {
      std::string maps;
      for (std::size_t i = 0; i < previous.size(); ++i) {
        maps += "Map " + std::to_string(i + 1) + ":\n```\n" + previous[i] + "```\n";
      }
      std::string problems;
      for (const auto& p : last_problems) problems += p + "; ";
      prompt += prompts::render(prompts::kRefinement, {{"problems", problems.empty() ? "none recorded" : problems},
                                                       {"previous_maps", maps}});
    }
    const std::size_t seq = s.ask("world", round, prompt, story_history);
    TileGrid raw;
    try {
      raw = parse_grid(s.record(seq).response);
    } catch (const Error& e) {
      s.record(seq).parse_outcome = e.what();
      last_problems = {std::string("the map could not be read: ") + e.what()};
      continue;
    }
    std::size_t replaced = 0;
    auto [world, marker] = sanitize_world(raw, in, replaced);
    s.record(seq).parse_outcome = replaced ? "ok, " + std::to_string(replaced) + " unknown cells filled" : "ok";

    PlacedObjectives placed = place_objectives(s, world, in, story_history, marker);

    const std::size_t critique = s.ask("critique", round,
                                       prompts::render(prompts::kCritique, {{"walkable_tiles_list", detail::char_list_text(in.walkable)},
                                                                            {"tile_map", placed.grid.text()}}),
                                       story_history);
    s.record(critique).parse_outcome = "recorded";

    last_problems = validate_world(placed, in.walkable, s.config.astar_iteration_cap);
    auto& rec = s.record(seq);
    rec.verdict = last_problems.empty() ? "valid" : "invalid: " + std::to_string(last_problems.size()) + " objective(s)";
    rec.map_revision = placed.grid.text();
    previous.push_back(placed.grid.text());
    best = WorldResult{std::move(placed), last_problems.empty(), round, last_problems};
    if (best->valid) break;
  }
  if (!best) throw Error(Errc::ParseFailure, "no readable map after " + std::to_string(s.config.max_refinement_rounds) + " rounds");
  best->rounds = static_cast<int>(s.trace.count("world"));
  return *best;
}

/// Tiles to scale and their footprint sizes. Reserved and absent characters
/// are dropped, sizes default to 2 and are clamped to the map. A reply that
/// cannot be parsed yields an empty plan.
inline ScalingPlan select_scaling(Session& s, const TileGrid& grid, const TileLegend& legend,
                                  const std::vector<Message>& story_history) {
  const auto present = tile_frequencies(grid);
  const std::string map_text = "\n```\n" + grid.text() + "```\n";
  const std::string prompt =
      prompts::render(prompts::kScalingSelection, {{"tile_map", map_text}, {"des2not", render_legend(legend)}});
  std::vector<char> chosen;
  try {
    chosen = s.ask_parsed("scaling_selection", prompt, story_history, [&](const std::string& r) {
      const auto lit = find_python_literal(r, '[');
      if (!lit || !lit->is_array()) throw Error(Errc::ParseFailure, "no list of tiles");
      std::vector<std::string> unknown;
      return detail::resolve_chars(*lit, legend, unknown);
    });
  } catch (const Error&) {
    return {};
  }
  ScalingPlan plan;
  std::string dropped;
  for (char c : chosen) {
    if (c == kProtagonist || c == kAntagonist || !present.contains(c)) {
      dropped += c;
      continue;
    }
    plan.to_scale.push_back(c);
  }
  if (!dropped.empty()) {
    auto& rec = s.trace.records().back();
    rec.parse_outcome += ", dropped [" + dropped + "]";
  }
  if (plan.to_scale.empty()) return plan;

  const int limit = std::min(grid.rows(), grid.cols());
  std::map<char, int> proposed;
  try {
    const auto sizes = s.ask_parsed(
        "scaling_sizes",
        prompts::render(prompts::kScalingSizes, {{"scaled_tiles", detail::char_list_text(plan.to_scale)}, {"tile_map", map_text}}),
        story_history, [&](const std::string& r) {
          const auto lit = find_python_literal(r, '{');
          if (!lit || !lit->is_object()) throw Error(Errc::NoDict, "no size dictionary");
          std::map<char, int> out;
          for (const auto& [k, v] : lit->items()) {
            std::optional<char> c = k.size() == 1 ? std::optional<char>(k[0]) : legend.char_of(k);
            if (c && v.is_number()) out[*c] = static_cast<int>(v.get<double>());
          }
          return out;
        });
    proposed = sizes;
  } catch (const Error&) {
  }
  for (char c : plan.to_scale) {
    int size = 2;
    if (auto it = proposed.find(c); it != proposed.end() && it->second >= 2) size = it->second;
    plan.sizes[c] = std::min(size, std::max(2, limit));
  }
  return plan;
}

inline StructureTemplate parse_structure(std::string_view text, char tile, int size) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw Error(Errc::ParseFailure, "no JSON object");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.substr(open, close - open + 1));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ParseFailure, std::string("structure JSON: ") + ex.what());
  }
  auto t = structure_from_json(j);
  if (t.tile != tile || t.footprint != size) {
    throw Error(Errc::BadFormat, "structure is for " + std::string(1, t.tile) + " size " + std::to_string(t.footprint));
  }
  return t;
}

inline double reconstructed_similarity(const LevelBundle& bundle, TextBackend& backend, GenerationTrace* trace = nullptr) {
  if (!backend.supports_embed()) throw Error(Errc::EmbedUnsupported, backend.name() + " cannot embed text");
  const std::string prompt = prompts::render(prompts::kReconstruction, {{"block_json", export_block_json(bundle.world)}});
  const std::string reconstruction = backend.complete(prompt, {});
  if (trace) {
    TraceRecord r;
    r.stage = "reconstruction";
    r.digest = request_digest(prompt, {});
    r.prompt = prompt;
    r.response = reconstruction;
    r.parse_outcome = "ok";
    trace->add(std::move(r));
  }
  const auto a = backend.embed(bundle.story.text());
  const auto b = backend.embed(reconstruction);
  return cosine_similarity(a, b);
}

// ---------------------------------------------------------------------------
// Whole run

struct PipelineResult {
  LevelBundle bundle;
  GenerationTrace trace;
};

namespace detail {

inline std::string submap_prefix(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::ExitMaze: return "maze";
    case ObjectiveKind::SurviveWaves: return "arena";
    case ObjectiveKind::CollectItems: return "collect";
    default: return "submap";
  }
}

}  // namespace detail

/// Runs every stage; exchanges land in `trace` as they happen, so it is
/// still populated when a stage throws.
inline LevelBundle build_level(const PipelineConfig& cfg, TextBackend& backend, GenerationTrace& trace) {
  cfg.validate();
  Session s{cfg, backend, trace};
  LevelBundle b;

  auto story = generate_story(s);
  b.story = std::move(story.story);
  const std::vector<Message> history = std::move(story.history);

  WorldInputs in = extract_world_inputs(s, b.story, history);
  WorldResult world = generate_world(s, in, history);
  b.validity.initial_valid = world.valid;
  b.validity.world_rounds = world.rounds;
  b.start = world.placed.start;
  b.objectives = world.placed.objectives;
  b.initial_grid = world.placed.grid;
  TileGrid grid = world.placed.grid;
  TileSet walkable = in.walkable;
  TileLegend legend = in.legend;

  // Scaling
  const std::vector<Cell> protected_cells{b.start};
  if (cfg.scaling_enabled) b.plan = select_scaling(s, grid, legend, history);
  const auto cls = classify_tiles(grid, walkable, b.objectives, b.plan.tile_set(), protected_cells);
  ScalingResult scaled{grid, cls, {}};
  if (!b.plan.empty()) {
    PlacementFilter filter;
    if (cfg.safe_scaling) {
      const auto targets = b.objective_cells();
      filter = [&](const TileGrid& after, const TileClassification& after_cls, const Placement&) {
        auto passable = [&](Cell c) { return after_cls.at(c) != TileRole::Scaled && walkable.contains(after.at(c)); };
        return connectivity_check(after.extent(), passable, b.start, targets).valid;
      };
    }
    scaled = apply_scaling(grid, cls, b.plan, filter);
  }
  grid = scaled.grid;
  b.classification = scaled.classification;
  b.placements = scaled.placements;

  TemplateLibrary library;
  for (const auto& p : b.placements) {
    auto& bucket = library[p.tile];
    if (std::any_of(bucket.begin(), bucket.end(), [&](const StructureTemplate& t) { return t.footprint == p.size; })) continue;
    const std::string name = legend.name_of(p.tile).value_or(std::string(1, p.tile));
    const std::string prompt = prompts::render(
        prompts::kStructure, {{"tile_name", name}, {"tile", std::string(1, p.tile)}, {"size", std::to_string(p.size)}});
    try {
      bucket.push_back(s.ask_parsed("structure", prompt, history,
                                    [&](const std::string& r) { return parse_structure(r, p.tile, p.size); }));
    } catch (const Error&) {
      bucket.push_back(fallback_template(p.tile, p.size));
    }
  }
  const StampResult stamps = stamp_structures(b.placements, library, mix_seed(cfg.rng_seed, 1));
  for (std::size_t i = 0; i < b.placements.size(); ++i) {
    b.structures.push_back(library.at(b.placements[i].tile).at(stamps.chosen[i]));
  }
  b.overrides = stamps.overrides;

  // Portals and sub-maps
  const bool any_submap =
      std::any_of(b.objectives.begin(), b.objectives.end(), [](const Objective& o) { return is_submapped(o.kind); });
  if (any_submap) {
    const char portal = pick_portal_char(legend);
    legend = legend.with_entry(legend.char_of("Portal") ? "Sub-map Portal" : "Portal", portal);
    walkable.insert(portal);
    std::set<Cell> occupied{b.start};
    for (const auto& o : b.objectives) occupied.insert(o.position);
    int n = 0;
    for (std::size_t i = 0; i < b.objectives.size(); ++i) {
      Objective& o = b.objectives[i];
      if (!is_submapped(o.kind)) continue;
      const std::string id = detail::submap_prefix(o.kind) + "-" + std::to_string(++n);
      const std::uint64_t seed = mix_seed(cfg.rng_seed, 100 + i);
      const int odd_size = cfg.submap_size % 2 ? cfg.submap_size : cfg.submap_size - 1;
      SubMap m;
      switch (o.kind) {
        case ObjectiveKind::ExitMaze: m = generate_maze(odd_size, Side::South, seed, id); break;
        case ObjectiveKind::SurviveWaves: m = generate_arena(cfg.submap_size, cfg.arena_waves, seed, id); break;
        default: m = generate_collect(cfg.submap_size, cfg.collect_items, seed, id); break;
      }
      const OverlayWalkable base{&grid, &walkable, &b.overrides};
      const Cell own = o.position;
      auto accept = [&](Cell c) {
        if (c == own) return !b.overrides.blocked.contains(c);
        return !occupied.contains(c) && base(c);
      };
      Portal p = place_portal(grid.extent(), accept, o, id, m.entry);
      occupied.erase(own);
      occupied.insert(p.main_map_position);
      grid.set(p.main_map_position, portal);
      o.position = p.main_map_position;
      o.anchor = portal;
      b.classification.set(p.main_map_position, TileRole::Objective);
      b.portals.push_back(std::move(p));
      b.submaps.push_back(std::move(m));
    }
  }

  b.grid = grid;
  b.legend = legend;
  b.walkable = walkable;
  b.important = in.important;
  const auto targets = b.objective_cells();
  const auto report = connectivity_check(grid.extent(), b.passable(), b.start, targets);
  b.validity.valid = report.valid;
  b.validity.reachable = report.reachable;

  // Blocks
  const std::string dict = render_legend(legend);
  std::map<std::string, std::string> proposed;
  try {
    proposed = s.ask_parsed("block_mapping", prompts::render(prompts::kBlockMapping, {{"tile_map_dict", dict}}), history,
                            [](const std::string& r) {
                              const auto lit = find_python_literal(r, '{');
                              if (!lit || !lit->is_object()) throw Error(Errc::NoDict, "no block dictionary");
                              std::map<std::string, std::string> out;
                              for (const auto& [k, v] : lit->items()) {
                                if (v.is_string()) out[k] = v.get<std::string>();
                              }
                              return out;
                            });
  } catch (const Error&) {
  }
  b.tile_blocks = build_block_table(legend, walkable, default_fill(grid, walkable), proposed);
  std::set<Cell> footprint;
  for (const auto& p : b.placements) {
    for (int r = 0; r < p.size; ++r) {
      for (int c = 0; c < p.size; ++c) footprint.insert(Cell{p.top_left.row + r, p.top_left.col + c});
    }
  }
  b.world = tiles_to_blocks(grid, b.tile_blocks, stamps.voxels, footprint, cfg.height_base);
  b.config = cfg.snapshot();
  b.trace_file = "trace.jsonl";
  return b;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg, TextBackend& backend) {
  PipelineResult result;
  result.bundle = build_level(cfg, backend, result.trace);
  return result;
}

}  // namespace storyforge
