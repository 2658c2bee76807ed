#pragma once

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyforge/core.hpp"
#include "storyforge/grid.hpp"
#include "storyforge/pathfind.hpp"

namespace storyforge {

/// H = -sum p_i log2 p_i over the distinct characters of the grid.
inline double shannon_entropy(const TileGrid& grid) {
  const auto freqs = tile_frequencies(grid);
  const std::size_t total = grid.cell_count();
  if (total == 0) throw Error(Errc::EmptyGrid, "entropy of empty grid");
  double h = 0.0;
  for (const auto& [c, n] : freqs) {
    const double p = static_cast<double>(n) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

inline std::size_t tile_type_count(const TileGrid& grid) { return tile_frequencies(grid).size(); }

template <CellPredicate Passable>
std::size_t unwalkable_count(Extent extent, const Passable& passable) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < extent.area(); ++i) {
    if (!passable(extent.cell(i))) ++n;
  }
  return n;
}

/// Fraction of cells whose character is not walkable.
inline double unwalkable_ratio(const TileGrid& grid, const TileSet& walkable) {
  if (grid.cell_count() == 0) throw Error(Errc::EmptyGrid, "UTR of empty grid");
  std::size_t n = 0;
  for (const auto& r : grid.row_strings()) {
    for (char c : r) n += walkable.contains(c) ? 0 : 1;
  }
  return static_cast<double>(n) / static_cast<double>(grid.cell_count());
}

/// Mean start-to-objective step count, or nullopt when any objective is
/// unreachable (such maps are excluded from ASPAO aggregation).
template <CellPredicate Passable>
std::optional<double> aspao(Extent extent, const Passable& passable, Cell start, std::span<const Cell> objectives) {
  if (objectives.empty()) return std::nullopt;
  const auto dist = bfs_distances(extent, passable, start);
  double sum = 0.0;
  for (const Cell o : objectives) {
    const auto d = distance_to_target(dist, extent, o);
    if (!d) return std::nullopt;
    sum += *d;
  }
  return sum / static_cast<double>(objectives.size());
}

inline std::optional<double> aspao(const TileGrid& grid, const TileSet& walkable, Cell start,
                                   std::span<const Cell> objectives) {
  return aspao(grid.extent(), WalkableChars{&grid, &walkable}, start, objectives);
}

struct MapEvaluation {
  std::string map_id;
  std::size_t area = 0;
  std::size_t unwalkable_area = 0;
  bool valid = false;
  double utr = 0.0;
  std::size_t vutr_numerator = 0;
  double entropy = 0.0;
  std::size_t tile_type_count = 0;
  std::optional<double> aspao;

  double vutr() const { return area == 0 ? 0.0 : static_cast<double>(vutr_numerator) / static_cast<double>(area); }
};

template <CellPredicate Passable>
MapEvaluation evaluate_map(std::string id, const TileGrid& grid, const Passable& passable, Cell start,
                           std::span<const Cell> objectives) {
  if (grid.cell_count() == 0) throw Error(Errc::EmptyGrid, id);
  MapEvaluation ev;
  ev.map_id = std::move(id);
  const Extent e = grid.extent();
  ev.area = e.area();
  ev.unwalkable_area = unwalkable_count(e, passable);
  ev.valid = connectivity_check(e, passable, start, objectives).valid;
  ev.utr = static_cast<double>(ev.unwalkable_area) / static_cast<double>(ev.area);
  ev.vutr_numerator = ev.valid ? ev.unwalkable_area : 0;
  ev.entropy = shannon_entropy(grid);
  ev.tile_type_count = tile_type_count(grid);
  ev.aspao = ev.valid ? aspao(e, passable, start, objectives) : std::nullopt;
  return ev;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

/// Population standard deviation.
inline MeanStd mean_std(std::span<const double> xs) {
  MeanStd out;
  out.n = xs.size();
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

struct VutrSummary {
  double corpus = 0.0;       // sum C_m U_m / sum A_m
  MeanStd per_map;           // C_m U_m / A_m
};

inline VutrSummary corpus_vutr(std::span<const MapEvaluation> evals) {
  if (evals.empty()) throw Error(Errc::EmptyCorpus, "no maps");
  std::size_t num = 0, den = 0;
  std::vector<double> per_map;
  for (const auto& ev : evals) {
    num += ev.vutr_numerator;
    den += ev.area;
    per_map.push_back(ev.vutr());
  }
  return VutrSummary{static_cast<double>(num) / static_cast<double>(den), mean_std(per_map)};
}

/// S = sum w_i R_i / sum R_i.
inline double composite_score(std::span<const double> votes, std::span<const double> weights) {
  if (votes.size() != weights.size()) throw Error(Errc::BadConfig, "votes and weights differ in length");
  const double total = std::accumulate(votes.begin(), votes.end(), 0.0);
  if (total <= 0.0) throw Error(Errc::NoVotes, "no votes");
  double s = 0.0;
  for (std::size_t i = 0; i < votes.size(); ++i) s += weights[i] * votes[i];
  return s / total;
}

/// w_i = k - i for ranks i = 1..k.
inline std::vector<double> rank_weights(int k) {
  std::vector<double> w;
  for (int i = 1; i <= k; ++i) w.push_back(static_cast<double>(k - i));
  return w;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw Error(Errc::BadConfig, "embedding length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(Errc::BadConfig, "zero-length embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------
// Corpus report

struct CorpusReport {
  std::vector<MapEvaluation> maps;
  MeanStd entropy;
  MeanStd tile_types;
  MeanStd playability;
  MeanStd utr;
  MeanStd aspao;  // valid maps only
  VutrSummary vutr;
  /// Unnormalized sum of per-map UTR, kept for debugging.
  double utr_sum_raw = 0.0;
};

inline CorpusReport build_report(std::vector<MapEvaluation> maps) {
  if (maps.empty()) throw Error(Errc::EmptyCorpus, "no maps");
  CorpusReport rep;
  std::vector<double> ent, types, play, utr, asp;
  for (const auto& m : maps) {
    ent.push_back(m.entropy);
    types.push_back(static_cast<double>(m.tile_type_count));
    play.push_back(m.valid ? 1.0 : 0.0);
    utr.push_back(m.utr);
    rep.utr_sum_raw += m.utr;
    if (m.aspao) asp.push_back(*m.aspao);
  }
  rep.entropy = mean_std(ent);
  rep.tile_types = mean_std(types);
  rep.playability = mean_std(play);
  rep.utr = mean_std(utr);
  rep.aspao = mean_std(asp);
  rep.vutr = corpus_vutr(maps);
  rep.maps = std::move(maps);
  return rep;
}

inline nlohmann::json to_json(const MapEvaluation& m) {
  nlohmann::json j;
  j["map_id"] = m.map_id;
  j["area"] = m.area;
  j["unwalkable_area"] = m.unwalkable_area;
  j["valid"] = m.valid;
  j["utr"] = m.utr;
  j["vutr"] = m.vutr();
  j["vutr_numerator"] = m.vutr_numerator;
  j["entropy"] = m.entropy;
  j["tile_type_count"] = m.tile_type_count;
  j["aspao"] = m.aspao ? nlohmann::json(*m.aspao) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const MeanStd& s) { return {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}}; }

inline nlohmann::json to_json(const CorpusReport& r) {
  nlohmann::json j;
  j["maps"] = nlohmann::json::array();
  for (const auto& m : r.maps) j["maps"].push_back(to_json(m));
  j["aggregate"] = {
      {"tile_type_number", to_json(r.tile_types)},
      {"shannon_entropy", to_json(r.entropy)},
      {"playability", to_json(r.playability)},
      {"utr", to_json(r.utr)},
      {"vutr", to_json(r.vutr.per_map)},
      {"aspao", to_json(r.aspao)},
  };
  j["corpus_vutr"] = r.vutr.corpus;
  j["debug"] = {{"utr_sum_raw", r.utr_sum_raw}};
  return j;
}

/// Aligned text table: one row per metric, "mean +/- std".
inline std::string render_table(const CorpusReport& r) {
  auto fmt = [](const MeanStd& s) {
    char buf[64];
    if (s.n == 0) return std::string("n/a");
    std::snprintf(buf, sizeof buf, "%.2f +/- %.2f", s.mean, s.stddev);
    return std::string(buf);
  };
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"Tile Type Number", fmt(r.tile_types)},
      {"Shannon Entropy", fmt(r.entropy)},
      {"Playability", fmt(r.playability)},
      {"UTR", fmt(r.utr)},
      {"VUTR", fmt(r.vutr.per_map)},
      {"ASPAO", fmt(r.aspao)},
  };
  std::size_t w0 = 6, w1 = 11;
  for (const auto& [k, v] : rows) {
    w0 = std::max(w0, k.size());
    w1 = std::max(w1, v.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w0)) << "Metric" << "  " << "Mean +/- Std" << '\n';
  os << std::string(w0, '-') << "  " << std::string(w1, '-') << '\n';
  for (const auto& [k, v] : rows) os << std::setw(static_cast<int>(w0)) << k << "  " << v << '\n';
  char buf[96];
  std::snprintf(buf, sizeof buf, "maps: %zu  corpus VUTR: %.4f\n", r.maps.size(), r.vutr.corpus);
  os << buf;
  return os.str();
}

}  // namespace storyforge
