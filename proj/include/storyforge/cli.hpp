#pragma once

// Command-line front end. run_cli() is the whole program minus main(), so
// tests can drive it in-process.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "storyforge/backend.hpp"
#include "storyforge/bundle.hpp"
#include "storyforge/evo.hpp"
#include "storyforge/export.hpp"
#include "storyforge/live_backend.hpp"
#include "storyforge/metrics.hpp"
#include "storyforge/pipeline.hpp"
#include "storyforge/scaling.hpp"
#include "storyforge/stub_backend.hpp"

namespace storyforge::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kDomainError = 1, kUsageError = 2 };

struct CommandResult {
  int exit_code = kOk;
  std::vector<std::string> files;
  std::string summary;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::BadConfig, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::BadConfig, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// `out` when given, else runs/<timestamp>-seed<N>.
inline fs::path run_directory(const std::string& out, std::uint64_t seed) {
  fs::path dir;
  if (!out.empty()) {
    dir = out;
  } else {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream name;
    name << std::put_time(&tm, "%Y%m%d-%H%M%S") << "-seed" << seed;
    dir = fs::path("runs") / name.str();
  }
  fs::create_directories(dir);
  return dir;
}

inline std::unique_ptr<TextBackend> make_backend(const std::string& kind, const std::string& fixtures, std::uint64_t seed) {
  if (kind == "stub") return std::make_unique<StubBackend>(seed);
  if (kind == "replay") {
    if (fixtures.empty()) throw UsageError("--backend replay needs --fixtures PATH");
    return std::make_unique<ReplayBackend>(ReplayBackend::from_file(fixtures));
  }
  if (kind == "live") {
    try {
      return std::make_unique<LiveBackend>(LiveConfig::from_env());
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  throw UsageError("unknown backend " + kind);
}

inline Cell parse_cell(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("expected ROW,COL, got " + s);
  try {
    return Cell{std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw UsageError("expected ROW,COL, got " + s);
  }
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
  std::string backend = "stub";
  std::string fixtures;
  std::uint64_t seed = 0;
  std::string out;
  std::string record;
  std::string paragraphs = "4-5";
  int objectives = 8;
  int rounds = 3;
  std::size_t iteration_cap = kDefaultIterationCap;
  bool no_scaling = false;
  bool safe_scaling = false;
  int submap_size = kDefaultSubmapSize;
  int waves = 3;
  int items = 5;
  int cell_px = 8;
};

inline CommandResult cmd_generate(const GenerateOptions& o, std::ostream& out) {
  PipelineConfig cfg;
  cfg.backend = o.backend;
  cfg.rng_seed = o.seed;
  cfg.n_objectives = o.objectives;
  cfg.max_refinement_rounds = o.rounds;
  cfg.astar_iteration_cap = o.iteration_cap;
  cfg.scaling_enabled = !o.no_scaling;
  cfg.safe_scaling = o.safe_scaling;
  cfg.submap_size = o.submap_size;
  cfg.arena_waves = o.waves;
  cfg.collect_items = o.items;
  if (const auto dash = o.paragraphs.find('-'); dash != std::string::npos) {
    cfg.min_paragraphs = std::stoi(o.paragraphs.substr(0, dash));
    cfg.max_paragraphs = std::stoi(o.paragraphs.substr(dash + 1));
  } else {
    cfg.min_paragraphs = cfg.max_paragraphs = std::stoi(o.paragraphs);
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  auto backend = make_backend(o.backend, o.fixtures, o.seed);
  const fs::path dir = run_directory(o.out, o.seed);
  CommandResult r;
  GenerationTrace trace;
  LevelBundle bundle;
  try {
    bundle = build_level(cfg, *backend, trace);
  } catch (...) {
    write_file(dir / "trace.jsonl.partial", trace.to_jsonl());
    if (!o.record.empty()) write_file(fs::path(o.record).string() + ".partial", trace.replay_fixtures().dump(2) + "\n");
    throw;
  }
  const std::string blocks = export_block_json(bundle.world);
  write_file(dir / "bundle.json", dump_bundle(bundle));
  write_file(dir / "blocks.json", blocks);
  write_file(dir / "render.ppm", render_topdown(bundle.grid, bundle.legend, o.cell_px).to_ppm());
  write_file(dir / "trace.jsonl", trace.to_jsonl());
  for (const char* f : {"bundle.json", "blocks.json", "render.ppm", "trace.jsonl"}) r.files.push_back((dir / f).string());
  if (!o.record.empty()) {
    write_file(o.record, trace.replay_fixtures().dump(2) + "\n");
    r.files.push_back(o.record);
  }
  std::ostringstream s;
  s << "generated " << bundle.grid.rows() << "x" << bundle.grid.cols() << " map with " << bundle.objectives.size()
    << " objectives, " << bundle.submaps.size() << " sub-maps, " << bundle.world.blocks().size() << " blocks; "
    << (bundle.validity.valid ? "playable" : "NOT playable") << " after " << bundle.validity.world_rounds << " round(s)";
  r.summary = s.str();
  out << r.summary << "\n";
  for (const auto& f : r.files) out << "  " << f << "\n";
  return r;
}

// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::string corpus;
  std::string out;
  std::uint64_t seed = 0;
};

/// Every *.json under `dir` whose top level carries schema_version.
inline std::vector<fs::path> find_bundles(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::EmptyCorpus, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    try {
      const auto j = nlohmann::json::parse(read_file(entry.path()));
      if (j.is_object() && j.contains("schema_version")) out.push_back(entry.path());
    } catch (const nlohmann::json::exception&) {
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline CommandResult cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const auto paths = find_bundles(o.corpus);
  std::vector<MapEvaluation> evals;
  for (const auto& p : paths) {
    evals.push_back(evaluate_bundle(load_bundle(p.string()), fs::relative(p, o.corpus).string()));
  }
  if (evals.empty()) throw Error(Errc::EmptyCorpus, "no bundles under " + o.corpus);
  const CorpusReport report = build_report(std::move(evals));
  const fs::path dir = run_directory(o.out, o.seed);
  const std::string table = render_table(report);
  write_file(dir / "report.json", to_json(report).dump(2) + "\n");
  write_file(dir / "report.txt", table);
  out << table;
  CommandResult r;
  r.files = {(dir / "report.json").string(), (dir / "report.txt").string()};
  r.summary = "evaluated " + std::to_string(report.maps.size()) + " map(s)";
  out << r.summary << "\n";
  return r;
}

// ---------------------------------------------------------------------------

struct BaselineOptions {
  evo::EvoConfig evo;
  std::string out;
};

inline CommandResult cmd_baseline(const BaselineOptions& o, std::ostream& out) {
  try {
    o.evo.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto result = evo::evolve(o.evo);
  for (std::size_t i = 1; i < result.log.size(); ++i) {
    if (result.log[i].best < result.log[i - 1].best) throw Error(Errc::BadConfig, "best fitness decreased");
  }
  const TileGrid grid = result.best.to_grid();
  const TileSet walkable = evo::level_walkable();
  std::vector<Cell> targets = result.best.objectives;
  const auto ev = evaluate_map("baseline-seed" + std::to_string(o.evo.rng_seed), grid, evo::FloorPassable{&result.best},
                               result.best.start, targets);

  const fs::path dir = run_directory(o.out, o.evo.rng_seed);
  std::ostringstream csv;
  csv << "generation,best,mean\n" << std::setprecision(10);
  for (const auto& g : result.log) csv << g.generation << "," << g.best << "," << g.mean << "\n";
  auto eval_json = to_json(ev);
  eval_json["best_fitness"] = result.best_fitness;
  eval_json["generations"] = o.evo.generations;
  eval_json["population"] = o.evo.population_size;
  write_file(dir / "best.txt", write_level_text(grid));
  write_file(dir / "legend.txt", render_legend(evo::level_legend()) + "\n");
  write_file(dir / "log.csv", csv.str());
  write_file(dir / "evaluation.json", eval_json.dump(2) + "\n");

  CommandResult r;
  for (const char* f : {"best.txt", "legend.txt", "log.csv", "evaluation.json"}) r.files.push_back((dir / f).string());
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << "seed " << o.evo.rng_seed << ": playability " << (ev.valid ? 1 : 0)
    << ", ASPAO " << (ev.aspao ? *ev.aspao : 0.0) << ", UTR " << ev.utr << ", best fitness " << result.best_fitness;
  r.summary = s.str();
  out << r.summary << "\n";
  for (const auto& f : r.files) out << "  " << f << "\n";
  return r;
}

// ---------------------------------------------------------------------------

struct ScaleOptions {
  std::string map;
  std::string walkable;
  std::vector<std::string> tiles;       // C=S
  std::vector<std::string> objectives;  // R,C
  std::string start;
  bool safe = false;
  std::string out;
  std::uint64_t seed = 0;
};

inline CommandResult cmd_scale(const ScaleOptions& o, std::ostream& out) {
  const TileGrid raw = read_level_text(read_file(o.map));
  const TileSet walkable(o.walkable.begin(), o.walkable.end());
  const TileGrid grid = pad_to_rectangle(raw, default_fill(raw, walkable));
  ScalingPlan plan;
  for (const auto& t : o.tiles) {
    if (t.size() < 3 || t[1] != '=') throw UsageError("expected TILE=SIZE, got " + t);
    plan.to_scale.push_back(t[0]);
    try {
      plan.sizes[t[0]] = std::stoi(t.substr(2));
    } catch (const std::exception&) {
      throw UsageError("expected TILE=SIZE, got " + t);
    }
  }
  std::vector<Objective> objectives;
  for (const auto& s : o.objectives) {
    const Cell c = parse_cell(s);
    if (!grid.in_bounds(c)) throw Error(Errc::OutOfBounds, "objective " + s + " outside the map");
    objectives.push_back(Objective{"objective " + s, ObjectiveKind::ChatWithNpc, grid.at(c), c});
  }
  std::vector<Cell> protected_cells;
  std::optional<Cell> start;
  if (!o.start.empty()) {
    start = parse_cell(o.start);
    protected_cells.push_back(*start);
  }
  try {
    plan.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto cls = classify_tiles(grid, walkable, objectives, plan.tile_set(), protected_cells);
  PlacementFilter filter;
  std::vector<Cell> targets;
  for (const auto& ob : objectives) targets.push_back(ob.position);
  if (o.safe) {
    if (!start) throw UsageError("--safe needs --start");
    filter = [&](const TileGrid& g, const TileClassification& c, const Placement&) {
      auto passable = [&](Cell x) { return c.at(x) != TileRole::Scaled && walkable.contains(g.at(x)); };
      return connectivity_check(g.extent(), passable, *start, targets).valid;
    };
  }
  const auto res = apply_scaling(grid, cls, plan, filter);

  const fs::path dir = run_directory(o.out, o.seed);
  nlohmann::ordered_json placements = nlohmann::ordered_json::array();
  for (const auto& p : res.placements) {
    placements.push_back({{"tile", std::string(1, p.tile)},
                          {"top_left", {p.top_left.row, p.top_left.col}},
                          {"size", p.size},
                          {"score", p.score}});
  }
  std::string cls_text;
  for (const auto& row : res.classification.digit_rows()) cls_text += row + "\n";
  write_file(dir / "scaled.txt", write_level_text(res.grid));
  write_file(dir / "classification.txt", cls_text);
  write_file(dir / "placements.json", placements.dump(2) + "\n");
  CommandResult r;
  for (const char* f : {"scaled.txt", "classification.txt", "placements.json"}) r.files.push_back((dir / f).string());
  r.summary = "placed " + std::to_string(res.placements.size()) + " structure(s)";
  out << r.summary << "\n" << res.grid.text();
  return r;
}

// ---------------------------------------------------------------------------

struct RenderOptions {
  std::string bundle;
  std::string out;
  int cell_px = 8;
  bool blocks = false;
  std::uint64_t seed = 0;
};

inline CommandResult cmd_render(const RenderOptions& o, std::ostream& out) {
  const LevelBundle b = load_bundle(o.bundle);
  const Image img = o.blocks ? render_topdown(b.world, o.cell_px) : render_topdown(b.grid, b.legend, o.cell_px);
  const fs::path dir = run_directory(o.out, o.seed);
  write_file(dir / "render.ppm", img.to_ppm());
  CommandResult r;
  r.files = {(dir / "render.ppm").string()};
  r.summary = "rendered " + std::to_string(img.width) + "x" + std::to_string(img.height) + " image";
  out << r.summary << "\n  " << r.files[0] << "\n";
  return r;
}

// ---------------------------------------------------------------------------

struct CoherenceOptions {
  std::string bundle;
  std::string backend = "stub";
  std::string fixtures;
  std::string out;
  std::uint64_t seed = 0;
};

inline CommandResult cmd_coherence(const CoherenceOptions& o, std::ostream& out) {
  const LevelBundle b = load_bundle(o.bundle);
  auto backend = make_backend(o.backend, o.fixtures, o.seed);
  GenerationTrace trace;
  const double sim = reconstructed_similarity(b, *backend, &trace);
  const fs::path dir = run_directory(o.out, o.seed);
  nlohmann::ordered_json j{{"bundle", o.bundle}, {"backend", backend->name()}, {"similarity", sim}};
  if (!trace.records().empty()) j["reconstruction"] = trace.records().back().response;
  write_file(dir / "coherence.json", j.dump(2) + "\n");
  CommandResult r;
  r.files = {(dir / "coherence.json").string()};
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << "reconstructed-story similarity " << sim;
  r.summary = s.str();
  out << r.summary << "\n  " << r.files[0] << "\n";
  return r;
}

// ---------------------------------------------------------------------------

/// Parses argv and runs one subcommand. 0 success, 1 domain error, 2 usage
/// error (bad flags, missing credentials).
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Story-driven tile level generation toolkit", "storyforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "storyforge 1.0");
  // Subcommand-level config files are not read by CLI11, so the file lives on
  // the parent and each subcommand reads its own [section].
  app.set_config("--config", "", "TOML/INI file with flag defaults in [subcommand] sections; flags on the command line win");
  app.fallthrough();

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Run the story-to-level pipeline and write a level bundle");
  g->add_option("--backend", gen.backend, "Text backend")->check(CLI::IsMember({"stub", "replay", "live"}))->capture_default_str();
  g->add_option("--fixtures", gen.fixtures, "Replay fixture file (JSON array of recorded responses)");
  g->add_option("--seed", gen.seed, "Seed for stub content, structure choice and sub-maps")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory (default runs/<timestamp>-seed<N>)");
  g->add_option("--record", gen.record, "Also write replay fixtures for this run to PATH");
  g->add_option("--paragraphs", gen.paragraphs, "Story length, N or A-B paragraphs")->capture_default_str();
  g->add_option("--objectives", gen.objectives, "Number of objectives")->capture_default_str();
  g->add_option("--rounds", gen.rounds, "Max backend calls per stage")->capture_default_str();
  g->add_option("--iteration-cap", gen.iteration_cap, "A* node expansions per validation query")->capture_default_str();
  g->add_flag("--no-scaling", gen.no_scaling, "Skip structure scaling");
  g->add_flag("--safe-scaling", gen.safe_scaling, "Reject placements that disconnect an objective");
  g->add_option("--submap-size", gen.submap_size, "Side length of sub-maps")->capture_default_str();
  g->add_option("--waves", gen.waves, "Waves in survival arenas")->capture_default_str();
  g->add_option("--items", gen.items, "Items in collection rooms")->capture_default_str();
  g->add_option("--cell-px", gen.cell_px, "Pixels per tile in render.ppm")->check(CLI::Range(1, 64))->capture_default_str();

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "Compute corpus metrics over every bundle in a directory");
  e->add_option("corpus", ev.corpus, "Directory searched recursively for bundle JSON files")->required();
  e->add_option("--out", ev.out, "Output directory (default runs/<timestamp>-seed<N>)");
  e->add_option("--seed", ev.seed, "Only used to name the default output directory")->capture_default_str();

  BaselineOptions bl;
  auto* b = app.add_subcommand("baseline", "Run the evolutionary baseline and evaluate its best map");
  b->add_option("--seed", bl.evo.rng_seed, "GA seed")->capture_default_str();
  b->add_option("--pop", bl.evo.population_size, "Population size")->capture_default_str();
  b->add_option("--gens", bl.evo.generations, "Generations")->capture_default_str();
  b->add_option("--rows", bl.evo.rows, "Map rows")->capture_default_str();
  b->add_option("--cols", bl.evo.cols, "Map columns")->capture_default_str();
  b->add_option("--objectives", bl.evo.n_objectives, "Objectives per map")->capture_default_str();
  b->add_option("--mutation", bl.evo.mutation_rate, "Per-cell flip probability")->capture_default_str();
  b->add_option("--position-mutation", bl.evo.position_mutation_rate, "Per special position move probability")->capture_default_str();
  b->add_option("--wall-density", bl.evo.initial_wall_density, "Initial wall probability")->capture_default_str();
  b->add_option("--tournament", bl.evo.tournament_size, "Tournament size")->capture_default_str();
  b->add_option("--elitism", bl.evo.elitism_count, "Elite genomes copied each generation")->capture_default_str();
  b->add_option("--out", bl.out, "Output directory (default runs/<timestamp>-seed<N>)");

  ScaleOptions sc;
  auto* s = app.add_subcommand("scale", "Apply a scaling plan to a level text file");
  s->add_option("--map", sc.map, "Level text file, one row per line")->required();
  s->add_option("--walkable", sc.walkable, "Walkable characters, e.g. \"g.p\"")->required();
  s->add_option("--tile", sc.tiles, "Tile to scale and its size, e.g. H=3 (repeatable, in order)");
  s->add_option("--objective", sc.objectives, "Objective cell ROW,COL (repeatable)");
  s->add_option("--start", sc.start, "Protagonist cell ROW,COL; kept free of structures");
  s->add_flag("--safe", sc.safe, "Reject placements that disconnect an objective from --start");
  s->add_option("--out", sc.out, "Output directory (default runs/<timestamp>-seed<N>)");
  s->add_option("--seed", sc.seed, "Only used to name the default output directory")->capture_default_str();

  RenderOptions rd;
  auto* r = app.add_subcommand("render", "Render a bundle top-down as a PPM image");
  r->add_option("--bundle", rd.bundle, "Bundle JSON file")->required();
  r->add_option("--cell-px", rd.cell_px, "Pixels per cell")->check(CLI::Range(1, 64))->capture_default_str();
  r->add_flag("--blocks", rd.blocks, "Render the block world (top block per column) instead of the tile map");
  r->add_option("--out", rd.out, "Output directory (default runs/<timestamp>-seed<N>)");
  r->add_option("--seed", rd.seed, "Only used to name the default output directory")->capture_default_str();

  CoherenceOptions co;
  auto* c = app.add_subcommand("coherence", "Similarity between the story and one reconstructed from the blocks");
  c->add_option("--bundle", co.bundle, "Bundle JSON file")->required();
  c->add_option("--backend", co.backend, "Backend with an embedding endpoint")
      ->check(CLI::IsMember({"stub", "replay", "live"}))
      ->capture_default_str();
  c->add_option("--fixtures", co.fixtures, "Replay fixture file");
  c->add_option("--seed", co.seed, "Stub seed")->capture_default_str();
  c->add_option("--out", co.out, "Output directory (default runs/<timestamp>-seed<N>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*g) cmd_generate(gen, out);
    else if (*e) cmd_evaluate(ev, out);
    else if (*b) cmd_baseline(bl, out);
    else if (*s) cmd_scale(sc, out);
    else if (*r) cmd_render(rd, out);
    else if (*c) cmd_coherence(co, out);
    return kOk;
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsageError;
  } catch (const Error& ex) {
    err << "error [" << errc_name(ex.code()) << "]: " << ex.what() << "\n";
    return kDomainError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kDomainError;
  }
}

}  // namespace storyforge::cli
