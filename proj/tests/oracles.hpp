#pragma once

// Independent reference computations used to check the library. None of
// these call into storyforge algorithms; they work on plain strings.

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Rows = std::vector<std::string>;
using RC = std::pair<int, int>;

/// Shortest step count between two cells over cells whose char is in `walk`,
/// or -1. The start cell is always usable.
inline int bfs_distance(const Rows& g, const std::string& walk, RC s, RC t) {
  const int R = static_cast<int>(g.size()), C = static_cast<int>(g[0].size());
  std::vector<std::vector<int>> d(R, std::vector<int>(C, -1));
  std::deque<RC> q{s};
  d[s.first][s.second] = 0;
  while (!q.empty()) {
    auto [r, c] = q.front();
    q.pop_front();
    if (RC{r, c} == t) return d[r][c];
    const int dr[] = {1, -1, 0, 0}, dc[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nc < 0 || nr >= R || nc >= C || d[nr][nc] >= 0) continue;
      if (walk.find(g[nr][nc]) == std::string::npos) continue;
      d[nr][nc] = d[r][c] + 1;
      q.push_back({nr, nc});
    }
  }
  return -1;
}

/// Every cell flooded from `s` (start always included).
inline std::set<RC> flood(const Rows& g, const std::string& walk, RC s) {
  const int R = static_cast<int>(g.size()), C = static_cast<int>(g[0].size());
  std::set<RC> seen{s};
  std::vector<RC> stack{s};
  while (!stack.empty()) {
    auto [r, c] = stack.back();
    stack.pop_back();
    for (RC n : {RC{r + 1, c}, RC{r - 1, c}, RC{r, c + 1}, RC{r, c - 1}}) {
      if (n.first < 0 || n.second < 0 || n.first >= R || n.second >= C) continue;
      if (walk.find(g[n.first][n.second]) == std::string::npos || seen.count(n)) continue;
      seen.insert(n);
      stack.push_back(n);
    }
  }
  return seen;
}

/// A target counts as reached when it or a 4-neighbour is flooded.
inline bool reaches(const std::set<RC>& flooded, RC t) {
  for (RC n : {t, RC{t.first + 1, t.second}, RC{t.first - 1, t.second}, RC{t.first, t.second + 1}, RC{t.first, t.second - 1}}) {
    if (flooded.count(n)) return true;
  }
  return false;
}

/// Distance to a target under the adjacency rule: 0/own distance when the
/// cell itself is reachable, else 1 + nearest flooded neighbour.
inline int target_distance(const Rows& g, const std::string& walk, RC s, RC t) {
  if (walk.find(g[t.first][t.second]) != std::string::npos || t == s) {
    const int d = bfs_distance(g, walk, s, t);
    if (d >= 0) return d;
  }
  int best = -1;
  const int R = static_cast<int>(g.size()), C = static_cast<int>(g[0].size());
  for (RC n : {RC{t.first + 1, t.second}, RC{t.first - 1, t.second}, RC{t.first, t.second + 1}, RC{t.first, t.second - 1}}) {
    if (n.first < 0 || n.second < 0 || n.first >= R || n.second >= C) continue;
    if (walk.find(g[n.first][n.second]) == std::string::npos && n != s) continue;
    const int d = bfs_distance(g, walk, s, n);
    if (d >= 0 && (best < 0 || d + 1 < best)) best = d + 1;
  }
  return best;
}

inline long double entropy(const Rows& g) {
  std::map<char, long double> n;
  long double total = 0;
  for (const auto& r : g) {
    for (char c : r) {
      n[c] += 1;
      total += 1;
    }
  }
  long double h = 0;
  for (const auto& [c, k] : n) h -= (k / total) * std::log2(k / total);
  return h;
}

struct OraclePlacement {
  char tile;
  RC top_left;
  int size;
  long score;
};

/// Sequential exhaustive search for the scaling algorithm: one row-major scan,
/// labels are '0'..'4' strings, `sizes` keys are the tiles to scale.
/// Frequencies come from the original grid.
inline std::vector<OraclePlacement> scale(Rows g, Rows labels, const std::map<char, int>& sizes) {
  const int R = static_cast<int>(g.size()), C = static_cast<int>(g[0].size());
  std::map<char, long> freq;
  for (const auto& r : g) {
    for (char c : r) ++freq[c];
  }
  const Rows original = g;
  std::vector<OraclePlacement> out;
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      const char t = g[i][j];
      if (!sizes.count(t) || labels[i][j] != '3') continue;
      const int s = sizes.at(t);
      std::optional<OraclePlacement> best;
      // every in-bounds s x s window that contains (i, j)
      for (int m = 0; m + s <= R; ++m) {
        for (int n = 0; n + s <= C; ++n) {
          if (!(m <= i && i < m + s && n <= j && j < n + s)) continue;
          long score = 0;
          bool ok = true;
          for (int a = m; a < m + s && ok; ++a) {
            for (int b = n; b < n + s; ++b) {
              if (labels[a][b] == '2' || labels[a][b] == '4') {
                ok = false;
                break;
              }
              score += freq[original[a][b]];
            }
          }
          if (!ok) continue;
          if (!best || score > best->score) best = OraclePlacement{t, {m, n}, s, score};
        }
      }
      if (!best) continue;
      for (int a = best->top_left.first; a < best->top_left.first + s; ++a) {
        for (int b = best->top_left.second; b < best->top_left.second + s; ++b) {
          g[a][b] = t;
          labels[a][b] = '4';
        }
      }
      out.push_back(*best);
    }
  }
  return out;
}

inline Rows random_rows(std::mt19937& gen, int rows, int cols, const std::string& alphabet, double first_weight) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(1, alphabet.size() - 1);
  Rows g(rows, std::string(cols, alphabet[0]));
  for (auto& r : g) {
    for (char& c : r) c = u(gen) < first_weight ? alphabet[0] : alphabet[pick(gen)];
  }
  return g;
}

}  // namespace oracle
