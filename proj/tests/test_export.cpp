#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "storyforge/bundle.hpp"
#include "storyforge/export.hpp"

using namespace storyforge;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kFixtures = STORYFORGE_FIXTURES;

TileLegend small_legend() {
  return TileLegend::from_entries({{"Protagonist", '@'},
                                   {"Antagonist", '#'},
                                   {"Grass", '.'},
                                   {"River", 'R'},
                                   {"Tree", 'T'},
                                   {"Hermit NPC", '&'},
                                   {"Cabin", 'H'}});
}

}  // namespace

TEST(BlockWorld, SortsAndDeduplicates) {
  const BlockWorld w({{2, 0, 1, "a"}, {0, 1, 0, "b"}, {0, 0, 0, "c"}, {2, 0, 1, "d"}});
  ASSERT_EQ(w.blocks().size(), 3u);
  EXPECT_EQ(w.blocks()[0], (Voxel{0, 0, 0, "c"}));
  EXPECT_EQ(w.blocks()[1], (Voxel{0, 1, 0, "b"}));
  EXPECT_EQ(w.blocks()[2], (Voxel{2, 0, 1, "d"}));
  EXPECT_EQ(w.palette(), (std::set<std::string>{"b", "c", "d"}));
  const auto b = w.bounds();
  EXPECT_EQ(b.max_x, 2);
  EXPECT_EQ(b.max_y, 1);
  EXPECT_EQ(b.max_z, 1);
  EXPECT_THROW(BlockWorld({{0, 0, 0, ""}}), Error);
}

TEST(FallbackBlock, Keywords) {
  EXPECT_EQ(fallback_block("Rushing River"), "water");
  EXPECT_EQ(fallback_block("Old Oak Tree"), "oak_log");
  EXPECT_EQ(fallback_block("sand dune"), "sand");
  EXPECT_EQ(fallback_block("Zorblax"), "stone");
}

TEST(BlockTable, RolesAndOverrides) {
  const auto legend = small_legend();
  const TileSet walk{'.', 'R', '@'};
  const auto t = build_block_table(legend, walk, '.', {{"Tree", "birch_log"}});
  EXPECT_EQ(t.size(), legend.size());
  EXPECT_EQ(t.at('.'), (TileBlock{"grass_block", std::nullopt}));
  EXPECT_EQ(t.at('R'), (TileBlock{"water", std::nullopt}));
  EXPECT_EQ(t.at('T'), (TileBlock{"grass_block", std::string("birch_log")}));
  EXPECT_EQ(t.at('&'), (TileBlock{"grass_block", std::nullopt}));
  EXPECT_EQ(t.at('@'), (TileBlock{"grass_block", std::nullopt}));
  EXPECT_EQ(t.at('#'), (TileBlock{"grass_block", std::nullopt}));
}

TEST(TilesToBlocks, LayersAndStructures) {
  const auto legend = small_legend();
  const TileSet walk{'.', '@'};
  const auto table = build_block_table(legend, walk, '.');
  const TileGrid g({"@.T", "HH.", "HH#"});
  const auto tmpl = fallback_template('H', 2);
  std::vector<Voxel> voxels;
  for (auto v : tmpl.voxels) {
    v.z += 1;
    voxels.push_back(v);
  }
  const std::set<Cell> footprint{{1, 0}, {1, 1}, {2, 0}, {2, 1}};
  const auto w = tiles_to_blocks(g, table, voxels, footprint, 64);
  std::size_t ground = 0, surface = 0;
  for (const auto& b : w.blocks()) {
    if (b.y == 64) ++ground;
    if (b.y == 65 && b.x == 2 && b.z == 0) {
      EXPECT_EQ(b.block, "oak_log");
      ++surface;
    }
  }
  EXPECT_EQ(ground, 9u);
  EXPECT_EQ(surface, 1u);
  EXPECT_EQ(w.bounds().max_y, 64 + 1 + 3);

  const TileGrid unknown({"Z"});
  try {
    tiles_to_blocks(unknown, table, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingBlockMapping);
  }
}

TEST(BlockJson, RoundTripAndStableBytes) {
  const BlockWorld w({{3, 0, 1, "grass_block"}, {0, 5, 2, "oak \"log\""}, {-1, 0, 0, "water"}});
  const auto text = export_block_json(w);
  EXPECT_EQ(import_block_json(text), w);
  EXPECT_EQ(export_block_json(import_block_json(text)), text);
  EXPECT_EQ(export_block_json(BlockWorld()), "[]\n");
  EXPECT_THROW(import_block_json("{\"x\":1}"), Error);
  EXPECT_THROW(import_block_json("[{\"x\":1}]"), Error);
  EXPECT_THROW(import_block_json("not json"), Error);
}

TEST(Render, TileGridPixels) {
  const auto legend = small_legend();
  const TileGrid g({"@.", "TR"});
  const auto img = render_topdown(g, legend, 3);
  EXPECT_EQ(img.width, 6);
  EXPECT_EQ(img.height, 6);
  EXPECT_EQ(img.at(0, 0), img.at(2, 2));
  EXPECT_NE(img.at(0, 0), img.at(3, 0));
  const auto ppm = img.to_ppm();
  const std::string header = "P6\n6 6\n255\n";
  EXPECT_EQ(ppm.substr(0, header.size()), header);
  EXPECT_EQ(ppm.size(), header.size() + 6 * 6 * 3);
  EXPECT_THROW(render_topdown(TileGrid(), legend), Error);
}

TEST(Render, BlockWorldUsesTopBlock) {
  const BlockWorld w({{0, 0, 0, "grass_block"}, {0, 1, 0, "water"}, {1, 0, 0, "sand"}});
  const auto img = render_topdown(w, 1);
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.height, 1);
  EXPECT_EQ(img.at(0, 0), color_for("water"));
  EXPECT_EQ(img.at(1, 0), color_for("sand"));
  EXPECT_EQ(color_for("some_block"), color_for("some_block"));
}

TEST(Golden, BundleRoundTripsByteForByte) {
  const auto text = slurp(kFixtures + "/forest-01.bundle.json");
  ASSERT_FALSE(text.empty());
  const auto b = load_bundle(kFixtures + "/forest-01.bundle.json");
  EXPECT_EQ(dump_bundle(b), text);
  EXPECT_EQ(bundle_from_json(to_json(b)), b);
}

TEST(Golden, BlocksMatchBundle) {
  const auto text = slurp(kFixtures + "/forest-01.blocks.json");
  const auto b = load_bundle(kFixtures + "/forest-01.bundle.json");
  EXPECT_EQ(export_block_json(b.world), text);
  EXPECT_EQ(import_block_json(text), b.world);
}

TEST(Golden, RenderMatchesBundle) {
  const auto b = load_bundle(kFixtures + "/forest-01.bundle.json");
  EXPECT_EQ(render_topdown(b.grid, b.legend, 8).to_ppm(), slurp(kFixtures + "/forest-01.render.ppm"));
}

TEST(Bundle, EvaluatesAndRejectsBadJson) {
  const auto b = load_bundle(kFixtures + "/forest-01.bundle.json");
  const auto ev = evaluate_bundle(b, "forest-01");
  EXPECT_EQ(ev.valid, b.validity.valid);
  EXPECT_EQ(ev.area, b.grid.cell_count());
  auto j = to_json(b);
  j.erase("grid");
  EXPECT_THROW(bundle_from_json(j), Error);
  j = to_json(b);
  j["start"] = "nope";
  EXPECT_THROW(bundle_from_json(j), Error);
  EXPECT_THROW(load_bundle("/nonexistent/bundle.json"), Error);
}
