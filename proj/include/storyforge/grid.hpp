#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "storyforge/core.hpp"
#include "storyforge/literal.hpp"

namespace storyforge {

inline constexpr char kProtagonist = '@';
inline constexpr char kAntagonist = '#';

using TileSet = std::set<char>;

inline bool is_tile_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u > 0x20 && u < 0x7f;
}

// ---------------------------------------------------------------------------
// TileGrid

/// Character grid, origin top-left. Rows may be ragged until padded.
class TileGrid {
 public:
  TileGrid() = default;
  explicit TileGrid(std::vector<std::string> rows) : rows_(std::move(rows)) {}
  TileGrid(int rows, int cols, char fill)
      : rows_(static_cast<std::size_t>(rows), std::string(static_cast<std::size_t>(cols), fill)) {}

  int rows() const noexcept { return static_cast<int>(rows_.size()); }

  /// Width of the longest row.
  int cols() const noexcept {
    std::size_t w = 0;
    for (const auto& r : rows_) w = std::max(w, r.size());
    return static_cast<int>(w);
  }

  Extent extent() const noexcept { return Extent{rows(), cols()}; }
  bool empty() const noexcept { return rows_.empty(); }

  bool is_rectangular() const noexcept {
    return std::all_of(rows_.begin(), rows_.end(),
                       [&](const std::string& r) { return r.size() == rows_.front().size(); });
  }

  bool in_bounds(Cell c) const noexcept {
    return c.row >= 0 && c.row < rows() && c.col >= 0 &&
           c.col < static_cast<int>(rows_[static_cast<std::size_t>(c.row)].size());
  }

  char at(Cell c) const {
    if (!in_bounds(c)) throw Error(Errc::OutOfBounds, to_string(c));
    return rows_[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)];
  }

  void set(Cell c, char ch) {
    if (!in_bounds(c)) throw Error(Errc::OutOfBounds, to_string(c));
    rows_[static_cast<std::size_t>(c.row)][static_cast<std::size_t>(c.col)] = ch;
  }

  const std::vector<std::string>& row_strings() const noexcept { return rows_; }
  const std::string& row(int r) const { return rows_.at(static_cast<std::size_t>(r)); }

  std::string text() const {
    std::string out;
    for (const auto& r : rows_) {
      out += r;
      out += '\n';
    }
    return out;
  }

  std::size_t cell_count() const noexcept {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
  }

  friend bool operator==(const TileGrid&, const TileGrid&) = default;

 private:
  std::vector<std::string> rows_;
};

// ---------------------------------------------------------------------------
// TileLegend

/// Injective tile-name -> character map. '@' and '#' are always present.
class TileLegend {
 public:
  using Entry = std::pair<std::string, char>;

  TileLegend() = default;

  /// Validates and builds a legend; entries keep their order.
  static TileLegend from_entries(std::vector<Entry> entries) {
    std::map<char, std::string> seen;
    for (const auto& [name, ch] : entries) {
      if (!is_tile_char(ch)) throw Error(Errc::MultiCharValue, name);
      if (auto it = seen.find(ch); it != seen.end()) {
        throw Error(Errc::DuplicateChar, it->second + ", " + name);
      }
      seen.emplace(ch, name);
    }
    if (!seen.contains(kProtagonist)) throw Error(Errc::MissingReserved, "'@'");
    if (!seen.contains(kAntagonist)) throw Error(Errc::MissingReserved, "'#'");
    TileLegend legend;
    legend.entries_ = std::move(entries);
    return legend;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  bool contains(char c) const noexcept {
    return std::any_of(entries_.begin(), entries_.end(), [c](const Entry& e) { return e.second == c; });
  }

  std::optional<std::string> name_of(char c) const {
    for (const auto& [name, ch] : entries_) {
      if (ch == c) return name;
    }
    return std::nullopt;
  }

  std::optional<char> char_of(std::string_view name) const {
    for (const auto& [n, ch] : entries_) {
      if (n == name) return ch;
    }
    return std::nullopt;
  }

  TileSet chars() const {
    TileSet out;
    for (const auto& e : entries_) out.insert(e.second);
    return out;
  }

  /// Returns a copy with one more entry (validated).
  TileLegend with_entry(std::string name, char c) const {
    auto entries = entries_;
    entries.emplace_back(std::move(name), c);
    return from_entries(std::move(entries));
  }

  friend bool operator==(const TileLegend&, const TileLegend&) = default;

 private:
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Classification

enum class TileRole : std::uint8_t {
  Walkable = 0,
  Unwalkable = 1,
  Objective = 2,
  NeedsScaling = 3,
  Scaled = 4,
};

class TileClassification {
 public:
  TileClassification() = default;
  explicit TileClassification(Extent extent, TileRole fill = TileRole::Walkable)
      : extent_(extent), labels_(extent.area(), fill) {}

  Extent extent() const noexcept { return extent_; }
  TileRole at(Cell c) const { return labels_.at(extent_.index(c)); }
  void set(Cell c, TileRole r) { labels_.at(extent_.index(c)) = r; }

  /// Rows of digits 0-4, the on-disk form.
  std::vector<std::string> digit_rows() const {
    std::vector<std::string> out;
    for (int r = 0; r < extent_.rows; ++r) {
      std::string line;
      for (int c = 0; c < extent_.cols; ++c) {
        line += static_cast<char>('0' + static_cast<int>(at({r, c})));
      }
      out.push_back(std::move(line));
    }
    return out;
  }

  static TileClassification from_digit_rows(const std::vector<std::string>& rows) {
    const Extent e{static_cast<int>(rows.size()), rows.empty() ? 0 : static_cast<int>(rows[0].size())};
    TileClassification out(e);
    for (int r = 0; r < e.rows; ++r) {
      if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != e.cols) {
        throw Error(Errc::BadFormat, "ragged classification");
      }
      for (int c = 0; c < e.cols; ++c) {
        const char d = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        if (d < '0' || d > '4') throw Error(Errc::BadFormat, "label out of range");
        out.set({r, c}, static_cast<TileRole>(d - '0'));
      }
    }
    return out;
  }

  friend bool operator==(const TileClassification&, const TileClassification&) = default;

 private:
  Extent extent_{};
  std::vector<TileRole> labels_;
};

// ---------------------------------------------------------------------------
// Objectives and story

enum class ObjectiveKind { DefeatEnemy, ChatWithNpc, ExitMaze, SurviveWaves, CollectItems };

constexpr std::string_view kind_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::DefeatEnemy: return "DefeatEnemy";
    case ObjectiveKind::ChatWithNpc: return "ChatWithNpc";
    case ObjectiveKind::ExitMaze: return "ExitMaze";
    case ObjectiveKind::SurviveWaves: return "SurviveWaves";
    case ObjectiveKind::CollectItems: return "CollectItems";
  }
  return "ChatWithNpc";
}

inline ObjectiveKind kind_from_name(std::string_view s) {
  for (auto k : {ObjectiveKind::DefeatEnemy, ObjectiveKind::ChatWithNpc, ObjectiveKind::ExitMaze,
                 ObjectiveKind::SurviveWaves, ObjectiveKind::CollectItems}) {
    if (kind_name(k) == s) return k;
  }
  throw Error(Errc::BadFormat, "unknown objective kind '" + std::string(s) + "'");
}

/// Kinds realized in a separate sub-map behind a portal.
constexpr bool is_submapped(ObjectiveKind k) {
  return k == ObjectiveKind::ExitMaze || k == ObjectiveKind::SurviveWaves ||
         k == ObjectiveKind::CollectItems;
}

struct Objective {
  std::string description;
  ObjectiveKind kind = ObjectiveKind::ChatWithNpc;
  char anchor = '?';
  Cell position;

  friend bool operator==(const Objective&, const Objective&) = default;
};

struct StorySpec {
  std::vector<std::string> paragraphs;
  int n_objectives = 8;
  std::string protagonist;
  std::string antagonist;
  std::vector<std::string> npcs;
  std::string environment;

  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
      if (i) out += "\n\n";
      out += paragraphs[i];
    }
    return out;
  }

  friend bool operator==(const StorySpec&, const StorySpec&) = default;
};

// ---------------------------------------------------------------------------
// Wire-format parsers

namespace detail {

inline std::string rstrip(std::string_view s) {
  std::size_t n = s.size();
  while (n > 0 && std::isspace(static_cast<unsigned char>(s[n - 1]))) --n;
  return std::string(s.substr(0, n));
}

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace detail

/// Grid inside the first ``` fence. The rest of the opening fence line is an
/// info string and is dropped; blank lines at either end are trimmed.
inline TileGrid parse_grid(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) throw Error(Errc::NoFence, "no ``` block");
  const auto close = text.find("```", open + 3);
  if (close == std::string_view::npos) throw Error(Errc::NoFence, "unterminated ``` block");

  std::string_view body = text.substr(open + 3, close - open - 3);
  const auto first_nl = body.find('\n');
  body = first_nl == std::string_view::npos ? std::string_view{} : body.substr(first_nl + 1);

  std::vector<std::string> rows;
  std::size_t start = 0;
  while (start <= body.size()) {
    const auto nl = body.find('\n', start);
    const auto line = body.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    rows.push_back(detail::rstrip(line));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  auto first = std::find_if(rows.begin(), rows.end(), [](const std::string& r) { return !r.empty(); });
  rows.erase(rows.begin(), first);
  if (rows.empty()) throw Error(Errc::EmptyGrid, "fence holds no rows");
  return TileGrid(std::move(rows));
}

/// Dictionary-literal tile mapping, e.g. {'Grass': 'g', 'Protagonist': '@'}.
inline TileLegend parse_legend(std::string_view text) {
  const auto lit = find_python_literal(text, '{');
  if (!lit || !lit->is_object()) throw Error(Errc::NoDict, "no dictionary literal");
  std::vector<TileLegend::Entry> entries;
  for (const auto& [name, value] : lit->items()) {
    const std::string v = value.is_string() ? value.get<std::string>() : value.dump();
    if (v.size() != 1) throw Error(Errc::MultiCharValue, name);
    entries.emplace_back(name, v[0]);
  }
  return TileLegend::from_entries(std::move(entries));
}

/// Inverse of parse_legend.
inline std::string render_legend(const TileLegend& legend) {
  auto quote = [](std::string_view s) {
    const char q = s.find('\'') == std::string_view::npos ? '\'' : '"';
    std::string out(1, q);
    for (char c : s) {
      if (c == '\\' || c == q) out += '\\';
      out += c;
    }
    out += q;
    return out;
  };
  std::string out = "{";
  bool first = true;
  for (const auto& [name, ch] : legend.entries()) {
    if (!first) out += ", ";
    first = false;
    out += quote(name) + ": " + quote(std::string(1, ch));
  }
  out += "}";
  return out;
}

/// List of single characters, e.g. ['g', '.'] or [g, .].
inline std::vector<char> parse_char_list(std::string_view text) {
  const auto lit = find_python_literal(text, '[');
  if (!lit || !lit->is_array()) throw Error(Errc::ParseFailure, "no list literal");
  std::vector<char> out;
  for (const auto& v : *lit) {
    const std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (s.size() != 1) throw Error(Errc::MultiCharValue, s);
    if (std::find(out.begin(), out.end(), s[0]) == out.end()) out.push_back(s[0]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid operations

inline TileGrid pad_to_rectangle(const TileGrid& grid, char fill) {
  const auto width = static_cast<std::size_t>(grid.cols());
  std::vector<std::string> rows = grid.row_strings();
  for (auto& r : rows) r.resize(width, fill);
  return TileGrid(std::move(rows));
}

inline std::map<char, std::size_t> tile_frequencies(const TileGrid& grid) {
  std::map<char, std::size_t> out;
  for (const auto& r : grid.row_strings()) {
    for (char c : r) ++out[c];
  }
  return out;
}

/// Most frequent walkable character present in the grid, ties to the lowest
/// code point. Falls back to the lowest walkable character, then to the most
/// frequent character overall.
inline char default_fill(const TileGrid& grid, const TileSet& walkable) {
  const auto freqs = tile_frequencies(grid);
  std::optional<std::pair<std::size_t, char>> best;
  for (const auto& [c, n] : freqs) {
    if (!walkable.contains(c)) continue;
    if (!best || n > best->first) best = std::pair{n, c};
  }
  if (best) return best->second;
  if (!walkable.empty()) return *walkable.begin();
  for (const auto& [c, n] : freqs) {
    if (!best || n > best->first) best = std::pair{n, c};
  }
  return best ? best->second : '.';
}

/// Per-cell roles. Precedence: objective (or protected) cell -> 2, to-scale
/// char -> 3, walkable char -> 0, anything else -> 1. Label 4 only comes from
/// scaling.
inline TileClassification classify_tiles(const TileGrid& grid, const TileSet& walkable,
                                         std::span<const Objective> objectives,
                                         const TileSet& to_scale,
                                         std::span<const Cell> protected_cells = {}) {
  const Extent e = grid.extent();
  TileClassification out(e);
  for (int r = 0; r < e.rows; ++r) {
    for (int c = 0; c < e.cols; ++c) {
      const Cell cell{r, c};
      const char ch = grid.in_bounds(cell) ? grid.at(cell) : '\0';
      TileRole role = TileRole::Unwalkable;
      if (to_scale.contains(ch)) role = TileRole::NeedsScaling;
      else if (walkable.contains(ch)) role = TileRole::Walkable;
      out.set(cell, role);
    }
  }
  for (const auto& o : objectives) {
    if (!e.contains(o.position)) throw Error(Errc::OutOfBounds, o.description + " at " + to_string(o.position));
    out.set(o.position, TileRole::Objective);
  }
  for (const auto& p : protected_cells) {
    if (!e.contains(p)) throw Error(Errc::OutOfBounds, to_string(p));
    out.set(p, TileRole::Objective);
  }
  return out;
}

/// Passability predicate over a grid from a set of walkable characters.
struct WalkableChars {
  const TileGrid* grid;
  const TileSet* walkable;
  bool operator()(Cell c) const { return grid->in_bounds(c) && walkable->contains(grid->at(c)); }
};

// ---------------------------------------------------------------------------
// Level text format: one row per line, plus a legend sidecar.

inline std::string write_level_text(const TileGrid& grid) { return grid.text(); }

inline TileGrid read_level_text(std::string_view text) {
  std::vector<std::string> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    rows.push_back(detail::rstrip(text.substr(start, nl - start)));
    start = nl + 1;
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw Error(Errc::EmptyGrid, "level file has no rows");
  return TileGrid(std::move(rows));
}

}  // namespace storyforge
