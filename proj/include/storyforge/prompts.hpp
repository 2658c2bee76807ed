#pragma once

// Prompt templates. Placeholders are written {name} and filled by render().
// The first seven templates are the published prompts kept word for word,
// typos included; the rest cover stages those prompts leave implicit.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace storyforge::prompts {

inline constexpr std::string_view kVersion = "1";

inline constexpr std::string_view kStory =
    "Write a {n_paragraphs} paragraph story which has characters including the protagonist trying to achieve "
    "something and the antagonist wanting to stop the protagonist. There should be {n_objectives} objectives for "
    "the protagonist in the story. One of them should be to defeat the antagonist somehow. You should describe the "
    "environments that those objectives happen. You can add some NPCs in the story.";

inline constexpr std::string_view kCharacters =
    "Let's use the above story to create a 2D game. Write a specific description of each character which can be "
    "used as a prompt to generate sprites for the characters.";

inline constexpr std::string_view kTiles =
    "Create an exhaustive list of tiles needed to create the environment. Some tile can occupy more than one space.";

inline constexpr std::string_view kTileMapping =
    "Imagine each tile maps to an alphabet or a character. For environment, use alphabets and for characters use "
    "special characters. Create it in a single Python Dictionary style. Return only and only a Python Dictionary "
    "and nothing else in your response. Don't return it in a Python response. Names should be the Keys and "
    "alphabets or characters should be the Values. Protagonist should always strictly be '@' and the antagonist "
    "should always strictly be '#'.";

inline constexpr std::string_view kWorld =
    " Using the following tile to character mapping:{tile_map_dict}. Create an entire world on a tile-based grid. "
    "Do not create things that would need more than one tile. Also, following characters are important to "
    "place:{important_tiles_list}, walkable tiles:{walkable_tiles_list}. Do not place the protagonist, the "
    "antagonist and the interactive objects of the story right now. Only create the world right now. Create it is "
    "a string format with three backticks to start and end with (```) and not in a list format.\"";

inline constexpr std::string_view kObjectivePlacement =
    "You are a great planner in 2D game. You plan objectives for the protagonist of the game. All objectives "
    "should match the goals extracted from the story. One of them should be to defeat the antagonist somehow. "
    "Other objectives can be: finding the exit of a complex labyrinth, finding a chest in the map, surviving waves "
    "of enemies, or gathering some items in the map. Return a Python dictionary of the objective as the key and a "
    "tile that achieves the objective and the position of the tile. For example `Objective': ['A', 6, 1]. Only "
    "return a Python dictionary. Do not return a python response.";

inline constexpr std::string_view kScalingSelection =
    "Given the story, a 2D map {tile_map}, and a dictionary {des2not} where each key is a tile's description and "
    "each value is the notation for that tile in the map, identify which tile notations in the map need to be "
    "scaled? A tile is considered scaled if it should occupy more than one grid cell, such as a 'house' tile. # "
    "Please avoid selecting adjacent tiles of the same type and frequent tiles. Please avoid scaling # and @ Return "
    "a Python list of tiles, formatted as a list of scaled tile notations (e.g., [a,b]])";

// ---------------------------------------------------------------------------

inline constexpr std::string_view kWalkable =
    "Using the tile to character mapping {tile_map_dict}, list the characters of every tile the protagonist can "
    "walk on. Return only a Python list of characters, for example ['g', 'p'].";

inline constexpr std::string_view kImportant =
    "Using the tile to character mapping {tile_map_dict}, list the characters of the tiles that are important to "
    "the story's objectives and must appear in the world. Return only a Python list of characters.";

inline constexpr std::string_view kObjectiveContext =
    "\nThe map (row 0 is the top line, column 0 the leftmost character; positions are [tile, row, column]):\n"
    "```\n{tile_map}```\nTile to character mapping: {tile_map_dict}\nThere should be {n_objectives} objectives. "
    "Also add the key 'Protagonist' with ['@', row, column] for the starting position of the protagonist.";

inline constexpr std::string_view kRefinement =
    "\nYour previous maps are listed below as references; improve on them. Problems found in the last map: "
    "{problems}\n{previous_maps}";

inline constexpr std::string_view kCritique =
    "Evaluate this map for navigability, balance and overall quality as a game level. Walkable tiles: "
    "{walkable_tiles_list}.\n```\n{tile_map}```";

inline constexpr std::string_view kScalingSizes =
    "For each of these tile notations {scaled_tiles}, give the side length in grid cells of the square area the "
    "tile should occupy on the map {tile_map}. Return only a Python dictionary from notation to an integer size, "
    "for example {'H': 3}.";

inline constexpr std::string_view kStructure =
    "Design a Minecraft structure for the tile '{tile_name}' (notation {tile}) that fits the story. It must fill "
    "a {size} by {size} footprint. Return only JSON of the form {\"tile\": \"{tile}\", \"footprint\": {size}, "
    "\"entrances\": [[row, col]], \"voxels\": [{\"x\": 0, \"y\": 0, \"z\": 0, \"block\": \"stone_bricks\"}]} where "
    "x is the column offset, z the row offset, y the height above the ground, and entrances are footprint border "
    "cells the player can walk through.";

inline constexpr std::string_view kBlockMapping =
    "Translate each tile of the mapping {tile_map_dict} into a single Minecraft block id that represents it in "
    "this story's environment. Return only a Python dictionary from tile name to block id, for example "
    "{'Grass': 'grass_block'}.";

inline constexpr std::string_view kReconstruction =
    "The following JSON lists every block of a Minecraft level as {x, y, z, block} records. Write the 4-5 "
    "paragraph story this level was built for, including the protagonist, the antagonist and the objectives.\n"
    "{block_json}";

inline constexpr std::string_view kRetry =
    "\nYour previous answer could not be used ({error}). Answer again and follow the requested format exactly.";

/// Replace every {key} with its value. Unknown braces are left alone.
inline std::string render(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    if (tmpl[i] == '{') {
      for (const auto& [key, value] : values) {
        const std::string token = "{" + key + "}";
        if (tmpl.compare(i, token.size(), token) == 0) {
          out += value;
          i += token.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[i++];
  }
  return out;
}

}  // namespace storyforge::prompts
