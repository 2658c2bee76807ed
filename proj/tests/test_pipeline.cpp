#include <gtest/gtest.h>

#include "storyforge/bundle.hpp"
#include "storyforge/pipeline.hpp"
#include "storyforge/stub_backend.hpp"

using namespace storyforge;

namespace {

const std::string kFixtures = STORYFORGE_FIXTURES;

// Owns everything a Session refers to.
struct Harness {
  PipelineConfig cfg;
  ScriptedBackend backend;
  GenerationTrace trace;
  Session session{cfg, backend, trace};

  explicit Harness(std::vector<std::string> script) : backend(std::move(script)) {}
};

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::BadConfig;
}

const std::string kStory = "First paragraph.\n\nSecond paragraph.\n\nThird paragraph.";
const std::string kLegend = "{'Protagonist': '@', 'Antagonist': '#', 'Grass': 'g', 'Tree': 'T', 'Chest': 'C', 'Hut': 'H'}";

WorldInputs simple_inputs() {
  WorldInputs in;
  in.legend = parse_legend(kLegend);
  in.walkable = {'g', '@'};
  in.important = {'C'};
  return in;
}

}  // namespace

TEST(Config, ValidateAndSnapshot) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.paragraph_range(), "4-5");
  const auto snap = cfg.snapshot();
  EXPECT_EQ(snap["max_refinement_rounds"], 3);
  EXPECT_EQ(snap["astar_iteration_cap"], 1000);
  EXPECT_TRUE(snap.contains("prompt_version"));
  cfg.max_refinement_rounds = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = PipelineConfig{};
  cfg.submap_size = 8;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = PipelineConfig{};
  cfg.min_paragraphs = 6;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Helpers, SplitParagraphs) {
  EXPECT_EQ(detail::split_paragraphs("a\nb\n\n\n c \n\n").size(), 2u);
  EXPECT_TRUE(detail::split_paragraphs("  \n\n").empty());
}

TEST(Helpers, ClassifyObjective) {
  EXPECT_EQ(classify_objective("Defeat the sorcerer"), ObjectiveKind::DefeatEnemy);
  EXPECT_EQ(classify_objective("Find the exit of the labyrinth"), ObjectiveKind::ExitMaze);
  EXPECT_EQ(classify_objective("Survive waves of wolves"), ObjectiveKind::SurviveWaves);
  EXPECT_EQ(classify_objective("Talk to the hermit"), ObjectiveKind::ChatWithNpc);
  EXPECT_EQ(classify_objective("Gather five herbs"), ObjectiveKind::CollectItems);
  EXPECT_EQ(classify_objective("Find the hidden chest"), ObjectiveKind::CollectItems);
  EXPECT_EQ(classify_objective("Ponder the stars"), ObjectiveKind::ChatWithNpc);
}

TEST(Story, MalformedAfterAllRounds) {
  Harness h({"", "just one paragraph", "still one"});
  EXPECT_EQ(code_of([&] { generate_story(h.session); }), Errc::MalformedStory);
  ASSERT_EQ(h.trace.count("story"), 3u);
  EXPECT_NE(h.trace.records()[0].prompt, h.trace.records()[1].prompt);
  EXPECT_EQ(h.trace.records()[2].round, 3);
}

TEST(Story, RetrySucceeds) {
  Harness h({"one", kStory});
  const auto r = generate_story(h.session);
  EXPECT_EQ(r.story.paragraphs.size(), 3u);
  EXPECT_EQ(r.story.n_objectives, 8);
  ASSERT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.history[1].content, kStory);
  EXPECT_EQ(h.trace.records()[0].parse_outcome.substr(0, 14), "MalformedStory");
  EXPECT_EQ(h.trace.records()[1].parse_outcome, "ok");
}

TEST(WorldInputs, LegendMissingAntagonist) {
  const std::string bad = "{'Protagonist': '@', 'Grass': 'g'}";
  Harness h({"Protagonist (@) - hero", "- Grass", bad, bad, bad});
  StorySpec story;
  EXPECT_EQ(code_of([&] { extract_world_inputs(h.session, story, {}); }), Errc::MissingReserved);
  EXPECT_EQ(h.trace.count("tile_mapping"), 3u);
}

TEST(WorldInputs, WalkableWithUnknownChar) {
  Harness h({"Protagonist (@) - hero\nAntagonist (#) - villain", "- Grass", kLegend, "['g', 'Z']", "['g', 'Z']", "['g', 'Z']"});
  StorySpec story;
  EXPECT_EQ(code_of([&] { extract_world_inputs(h.session, story, {}); }), Errc::UnknownTile);
  EXPECT_EQ(h.trace.count("walkable"), 3u);
}

TEST(WorldInputs, HappyPath) {
  Harness h({"Protagonist (@) - Rowan\nAntagonist (#) - Vorath\nNPC (&) - Bram", "- Grass\n- Tree", kLegend,
             "['g', 'Grass']", "['C', 'H']"});
  StorySpec story;
  const std::vector<Message> history{{"user", "story?"}, {"assistant", kStory}};
  const auto in = extract_world_inputs(h.session, story, history);
  EXPECT_EQ(in.walkable, (TileSet{'g', '@'}));
  EXPECT_EQ(in.important, (std::vector<char>{'C', 'H'}));
  EXPECT_EQ(story.protagonist, "Protagonist (@) - Rowan");
  EXPECT_EQ(story.antagonist, "Antagonist (#) - Vorath");
  EXPECT_EQ(story.npcs, (std::vector<std::string>{"NPC (&) - Bram"}));
  // the conversation grows: each stage sees every earlier exchange
  EXPECT_EQ(h.trace.records()[0].history.size(), 2u);
  EXPECT_EQ(h.trace.records()[3].history.size(), 8u);
}

TEST(Sanitize, FillsUnknownAndLiftsStart) {
  const auto in = simple_inputs();
  std::size_t replaced = 0;
  const auto [g, marker] = sanitize_world(TileGrid({"ggTg", "g@?", "ggggg"}), in, replaced);
  EXPECT_EQ(replaced, 1u);
  EXPECT_EQ(marker, (Cell{1, 1}));
  EXPECT_TRUE(g.is_rectangular());
  EXPECT_EQ(g.row(1), "ggggg");
}

TEST(ObjectiveDict, Errors) {
  EXPECT_EQ(code_of([] { parse_objective_dict("no dictionary here"); }), Errc::NoDict);
  EXPECT_EQ(code_of([] { parse_objective_dict("{}"); }), Errc::EmptyObjectives);
  EXPECT_EQ(code_of([] { parse_objective_dict("{'Protagonist': ['@', 1, 1]}"); }), Errc::EmptyObjectives);
  EXPECT_EQ(code_of([] { parse_objective_dict("{'Open chest': 'C'}"); }), Errc::BadFormat);
}

TEST(ObjectiveDict, ReadsStart) {
  const auto [obs, start] = parse_objective_dict("Sure!\n{'Protagonist': ['@', 3, 4], 'Open chest': ['C', 1, 2]}");
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs[0].anchor, "C");
  EXPECT_EQ(obs[0].position, (Cell{1, 2}));
  EXPECT_EQ(start, (Cell{3, 4}));
}

TEST(Realize, RepairsOutOfBoundsAndStampsAnchor) {
  const auto in = simple_inputs();
  const TileGrid world({"gggg", "gTTg", "gggg"});
  const std::vector<ProposedObjective> props{{"Open the chest", "C", {99, 99}}, {"Defeat the villain", "#", {0, 0}}};
  const auto p = realize_objectives(world, in.legend, in.walkable, props, Cell{2, 0});
  EXPECT_EQ(p.start, (Cell{2, 0}));
  EXPECT_EQ(p.grid.at({2, 0}), '@');
  ASSERT_EQ(p.objectives.size(), 2u);
  EXPECT_EQ(p.objectives[0].position, (Cell{2, 3}));
  EXPECT_EQ(p.grid.at({2, 3}), 'C');
  EXPECT_EQ(p.objectives[0].kind, ObjectiveKind::CollectItems);
  EXPECT_EQ(p.objectives[1].position, (Cell{0, 0}));
  EXPECT_EQ(p.objectives[1].kind, ObjectiveKind::DefeatEnemy);
}

TEST(Realize, ExactlyOneDefeat) {
  const auto in = simple_inputs();
  const TileGrid world({"ggggg", "ggggg", "ggggg"});
  const std::vector<ProposedObjective> none{{"Talk to the hut", "H", {0, 0}}};
  const auto a = realize_objectives(world, in.legend, in.walkable, none, std::nullopt);
  ASSERT_EQ(a.objectives.size(), 2u);
  EXPECT_EQ(a.objectives[1].kind, ObjectiveKind::DefeatEnemy);
  EXPECT_EQ(a.objectives[1].anchor, '#');
  EXPECT_EQ(a.start, (Cell{1, 2}));

  const std::vector<ProposedObjective> many{
      {"Defeat the guard", "T", {0, 0}}, {"Defeat the villain", "#", {0, 4}}, {"Fight wolves", "g", {2, 2}}};
  const auto b = realize_objectives(world, in.legend, in.walkable, many, Cell{2, 0});
  int defeats = 0;
  for (const auto& o : b.objectives) defeats += o.kind == ObjectiveKind::DefeatEnemy ? 1 : 0;
  EXPECT_EQ(defeats, 1);
  EXPECT_EQ(b.objectives[1].kind, ObjectiveKind::DefeatEnemy);
  EXPECT_EQ(b.objectives[0].kind, ObjectiveKind::SurviveWaves);
}

TEST(Realize, DistinctCells) {
  const auto in = simple_inputs();
  const TileGrid world({"ggg", "ggg"});
  const std::vector<ProposedObjective> props{
      {"Open chest", "C", {0, 0}}, {"Open chest two", "C", {0, 0}}, {"Defeat", "#", {0, 0}}};
  const auto p = realize_objectives(world, in.legend, in.walkable, props, Cell{0, 0});
  std::set<Cell> cells{p.start};
  for (const auto& o : p.objectives) EXPECT_TRUE(cells.insert(o.position).second);
}

TEST(World, AllRoundsInvalid) {
  const std::string walled = "```\nggggg\nTTTTT\nTTCTT\n```";
  const std::string placement = "{'Protagonist': ['@', 0, 0], 'Open the chest': ['C', 2, 2], 'Defeat': ['#', 0, 4]}";
  std::vector<std::string> script;
  for (int i = 0; i < 3; ++i) {
    script.push_back(walled);
    script.push_back(placement);
    script.push_back("The chest is walled in.");
  }
  Harness h(script);
  const auto w = generate_world(h.session, simple_inputs(), {});
  EXPECT_FALSE(w.valid);
  EXPECT_EQ(w.rounds, 3);
  EXPECT_EQ(w.problems.size(), 1u);
  EXPECT_EQ(h.trace.count("critique"), 3u);
  // later rounds carry the earlier maps and the problems
  const auto& third = h.trace.records()[6];
  EXPECT_EQ(third.stage, "world");
  EXPECT_NE(third.prompt.find("Map 2:"), std::string::npos);
  EXPECT_NE(third.prompt.find("unreachable"), std::string::npos);
  EXPECT_EQ(h.trace.records()[0].verdict, "invalid: 1 objective(s)");
}

TEST(World, SearchCapCountsAsInvalid) {
  const std::string open = "```\ngggggggggg\ngggggggggg\ngggggggggg\ngggggggggg\n```";
  const std::string placement = "{'Protagonist': ['@', 0, 0], 'Defeat': ['#', 3, 9]}";
  Harness h({open, placement, "ok"});
  h.cfg.max_refinement_rounds = 1;
  h.cfg.astar_iteration_cap = 3;
  const auto w = generate_world(h.session, simple_inputs(), {});
  EXPECT_FALSE(w.valid);
  ASSERT_EQ(w.problems.size(), 1u);
  EXPECT_NE(w.problems[0].find("search limit"), std::string::npos);
}

TEST(World, UnreadableEveryRound) {
  Harness h({"no fence", "still none", "nope"});
  EXPECT_EQ(code_of([&] { generate_world(h.session, simple_inputs(), {}); }), Errc::ParseFailure);
  EXPECT_EQ(h.trace.count("world"), 3u);
}

TEST(Scaling, DropsReservedAndAbsentClampsSize) {
  Harness h({"['@', '#', 'H', 'Q', 'T']", "{'H': 40, 'T': 1}"});
  const TileGrid g({"gHg", "gTg", "g@#"});
  const auto plan = select_scaling(h.session, g, parse_legend(kLegend + ""), {});
  EXPECT_EQ(plan.to_scale, (std::vector<char>{'H', 'T'}));
  EXPECT_EQ(plan.sizes.at('H'), 3);
  EXPECT_EQ(plan.sizes.at('T'), 2);
  EXPECT_NE(h.trace.records()[0].parse_outcome.find("dropped [@#Q]"), std::string::npos);
}

TEST(Scaling, UnparseableGivesEmptyPlan) {
  Harness h({"none", "none", "none"});
  const auto plan = select_scaling(h.session, TileGrid({"gH"}), parse_legend(kLegend), {});
  EXPECT_TRUE(plan.empty());
}

TEST(Structure, ParsesFencedJson) {
  const auto t = fallback_template('H', 3);
  const std::string reply = "Here you go:\n```json\n" + to_json(t).dump() + "\n```";
  EXPECT_EQ(parse_structure(reply, 'H', 3), t);
  EXPECT_EQ(code_of([&] { parse_structure(reply, 'H', 4); }), Errc::BadFormat);
  EXPECT_EQ(code_of([] { parse_structure("no json", 'H', 3); }), Errc::ParseFailure);
  EXPECT_EQ(code_of([] { parse_structure("{bad json}", 'H', 3); }), Errc::ParseFailure);
}

TEST(Trace, JsonlAndFixtures) {
  GenerationTrace t;
  TraceRecord a;
  a.stage = "story";
  a.digest = "d1";
  a.response = "r";
  t.add(a);
  t.add(a);
  a.digest = "d2";
  a.map_revision = "gg\n";
  t.add(a);
  const auto lines = t.to_jsonl();
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 3);
  const auto last = nlohmann::json::parse(lines.substr(lines.rfind('\n', lines.size() - 2) + 1));
  EXPECT_EQ(last["seq"], 2);
  EXPECT_EQ(last["map_revision"], "gg\n");
  EXPECT_EQ(t.replay_fixtures().size(), 2u);
}

TEST(Pipeline, ForestReplayRefinesOnce) {
  auto backend = ReplayBackend::from_file(kFixtures + "/forest-01.json");
  PipelineConfig cfg;
  cfg.backend = "replay";
  cfg.rng_seed = 7;
  const auto r = run_pipeline(cfg, backend);
  const auto& b = r.bundle;
  EXPECT_EQ(b.validity.world_rounds, 2);
  EXPECT_TRUE(b.validity.initial_valid);
  EXPECT_TRUE(b.validity.valid);
  EXPECT_EQ(b.objectives.size(), 8u);
  EXPECT_EQ(r.trace.count("world"), 2u);
  EXPECT_EQ(r.trace.records()[6].verdict.substr(0, 7), "invalid");
  // the malformed tower reply is retried once
  EXPECT_EQ(r.trace.count("structure"), 3u);
  EXPECT_EQ(dump_bundle(b), dump_bundle(load_bundle(kFixtures + "/forest-01.bundle.json")));
}

TEST(Pipeline, ReplayWithDifferentSeedStillMatchesPrompts) {
  // only stamping and sub-maps use the seed; prompts are unchanged
  auto backend = ReplayBackend::from_file(kFixtures + "/forest-01.json");
  PipelineConfig cfg;
  cfg.backend = "replay";
  cfg.rng_seed = 8;
  EXPECT_NO_THROW(run_pipeline(cfg, backend));
}

TEST(Pipeline, ReplayDriftIsAnError) {
  auto backend = ReplayBackend::from_file(kFixtures + "/forest-01.json");
  PipelineConfig cfg;
  cfg.n_objectives = 7;
  GenerationTrace trace;
  EXPECT_EQ(code_of([&] { build_level(cfg, backend, trace); }), Errc::BackendError);
  EXPECT_EQ(trace.records().size(), 0u);
}

TEST(Pipeline, TraceSurvivesFailure) {
  ScriptedBackend backend({kStory, "chars"});
  PipelineConfig cfg;
  GenerationTrace trace;
  EXPECT_THROW(build_level(cfg, backend, trace), Error);
  EXPECT_EQ(trace.records().size(), 2u);
}

TEST(Pipeline, StubRunIsDeterministicAndStructured) {
  PipelineConfig cfg;
  cfg.rng_seed = 3;
  StubBackend a(3), b(3);
  const auto r1 = run_pipeline(cfg, a);
  const auto r2 = run_pipeline(cfg, b);
  EXPECT_EQ(dump_bundle(r1.bundle), dump_bundle(r2.bundle));
  EXPECT_EQ(r1.trace.to_jsonl(), r2.trace.to_jsonl());

  const auto& bundle = r1.bundle;
  EXPECT_TRUE(bundle.grid.is_rectangular());
  for (const auto& row : bundle.grid.row_strings()) {
    for (char c : row) EXPECT_TRUE(bundle.legend.contains(c)) << c;
  }
  EXPECT_EQ(bundle.objectives.size(), 8u);
  EXPECT_EQ(bundle.grid.at(bundle.start), '@');
  EXPECT_EQ(bundle.portals.size(), bundle.submaps.size());
  for (const auto& m : bundle.submaps) EXPECT_TRUE(m.connected()) << m.id;
  EXPECT_EQ(bundle.structures.size(), bundle.placements.size());
}

TEST(Pipeline, SafeScalingKeepsObjectivesReachable) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PipelineConfig cfg;
    cfg.rng_seed = seed;
    cfg.safe_scaling = true;
    StubBackend backend(seed);
    const auto r = run_pipeline(cfg, backend);
    if (r.bundle.validity.initial_valid) {
      EXPECT_TRUE(r.bundle.validity.valid) << seed;
    }
  }
}

TEST(Similarity, NeedsEmbeddings) {
  ScriptedBackend scripted({"x"});
  auto b = load_bundle(kFixtures + "/forest-01.bundle.json");
  EXPECT_EQ(code_of([&] { reconstructed_similarity(b, scripted); }), Errc::EmbedUnsupported);
  StubBackend stub(1);
  GenerationTrace trace;
  const double s = reconstructed_similarity(b, stub, &trace);
  EXPECT_GE(s, -1.0);
  EXPECT_LE(s, 1.0);
  EXPECT_EQ(trace.count("reconstruction"), 1u);
}
