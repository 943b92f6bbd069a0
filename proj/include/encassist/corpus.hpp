#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "encassist/label.hpp"

namespace encassist {

enum class Source : int { sst_local = 0, dynasent_r1 = 1, dynasent_r2 = 2 };

inline constexpr std::size_t kNumSources = 3;
inline constexpr std::array<Source, kNumSources> kAllSources = {
    Source::dynasent_r1, Source::dynasent_r2, Source::sst_local};

std::string_view to_string(Source source) noexcept;
Source parse_source(std::string_view text);

/// Human-readable dataset name ("DynaSent R1", "SST-3").
std::string_view display_name(Source source) noexcept;

struct Review {
  std::string id;
  std::string text;
  Label label = Label::neutral;
  Source source = Source::sst_local;

  friend bool operator==(const Review&, const Review&) = default;
};

struct SplitStats {
  std::size_t total = 0;
  std::array<std::size_t, kNumLabels> label_counts{};
  std::array<std::size_t, kNumSources> source_counts{};  // indexed by static_cast<int>(Source)

  std::size_t count(Label label) const { return label_counts[index_of(label)]; }
  std::size_t count(Source source) const { return source_counts[static_cast<std::size_t>(source)]; }
  /// Percent of total on a 0-100 scale; 0 for an empty split.
  double percent(Label label) const;
  double percent(Source source) const;
};

/// Reads line-delimited {"text", "label", "source"[, "id"]} records. Five-way
/// SST labels are collapsed. Missing ids become `<source>_<ordinal>` with the
/// ordinal zero-padded to six digits and counted per source within the file.
std::vector<Review> read_reviews(std::istream& in);
std::vector<Review> read_reviews(const std::filesystem::path& path);

void write_reviews(std::ostream& out, const std::vector<Review>& reviews);
void write_reviews(const std::filesystem::path& path, const std::vector<Review>& reviews);

/// Concatenates the sources in the given order and applies a seeded
/// Fisher-Yates shuffle. Throws DuplicateIdError listing every colliding id.
std::vector<Review> merge_datasets(
    const std::vector<std::pair<std::string, std::vector<Review>>>& sources, std::uint64_t seed);

SplitStats split_stats(const std::vector<Review>& split);

/// Label distribution row plus source contribution table, in the layout of
/// the merged-dataset summary tables.
std::string format_stats(const SplitStats& stats, std::string_view split_name);

/// Duplicates random minority-class members until every class matches the
/// majority count. Originals keep their order and come first; duplicates get
/// ids `<id>#dup<n>`. Throws Error if any class is empty.
std::vector<Review> oversample_balance(const std::vector<Review>& split, std::uint64_t seed);

}  // namespace encassist
