#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace storyforge {

enum class Errc {
  NoFence,
  EmptyGrid,
  NoDict,
  DuplicateChar,
  MissingReserved,
  MultiCharValue,
  OutOfBounds,
  NotFound,
  MissingTemplate,
  EmptyCorpus,
  NoVotes,
  BadSize,
  MalformedStory,
  BackendError,
  ParseFailure,
  UnknownTile,
  EmptyObjectives,
  EmbedUnsupported,
  MissingBlockMapping,
  EmptyInput,
  BadConfig,
  BadFormat,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::NoFence: return "NoFence";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::NoDict: return "NoDict";
    case Errc::DuplicateChar: return "DuplicateChar";
    case Errc::MissingReserved: return "MissingReserved";
    case Errc::MultiCharValue: return "MultiCharValue";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::NotFound: return "NotFound";
    case Errc::MissingTemplate: return "MissingTemplate";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::NoVotes: return "NoVotes";
    case Errc::BadSize: return "BadSize";
    case Errc::MalformedStory: return "MalformedStory";
    case Errc::BackendError: return "BackendError";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::UnknownTile: return "UnknownTile";
    case Errc::EmptyObjectives: return "EmptyObjectives";
    case Errc::EmbedUnsupported: return "EmbedUnsupported";
    case Errc::MissingBlockMapping: return "MissingBlockMapping";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::BadConfig: return "BadConfig";
    case Errc::BadFormat: return "BadFormat";
  }
  return "Unknown";
}

/// Every domain failure in the library is reported as an Error carrying an
/// Errc, so callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) +
                           (detail.empty() ? "" : ": " + detail)),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

/// Zero-based (row, col); row grows downward, col to the right.
struct Cell {
  int row = 0;
  int col = 0;

  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

inline std::string to_string(Cell c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

struct Extent {
  int rows = 0;
  int cols = 0;

  constexpr bool contains(Cell c) const noexcept {
    return c.row >= 0 && c.col >= 0 && c.row < rows && c.col < cols;
  }
  constexpr std::size_t area() const noexcept {
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  constexpr std::size_t index(Cell c) const noexcept {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(c.col);
  }
  constexpr Cell cell(std::size_t i) const noexcept {
    return Cell{static_cast<int>(i / static_cast<std::size_t>(cols)),
                static_cast<int>(i % static_cast<std::size_t>(cols))};
  }

  friend constexpr bool operator==(const Extent&, const Extent&) = default;
};

// Neighbor order N, S, W, E. Every search in the library uses it.
inline constexpr Cell kSteps[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

constexpr Cell operator+(Cell a, Cell b) noexcept {
  return Cell{a.row + b.row, a.col + b.col};
}

/// Seeded generator with portable derived distributions. std::mt19937_64 is
/// bit-exact across standard libraries; the std:: distributions are not, so
/// bounded draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [lo, hi] by rejection sampling.
  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next());
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return lo + static_cast<std::int64_t>(x % span);
  }

  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(n) - 1));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace storyforge
