#include "encassist/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "encassist/error.hpp"
#include "encassist/jsonl.hpp"
#include "encassist/numfmt.hpp"
#include "encassist/rng.hpp"

namespace encassist {

std::string_view to_string(Source source) noexcept {
  switch (source) {
    case Source::sst_local: return "sst_local";
    case Source::dynasent_r1: return "dynasent_r1";
    case Source::dynasent_r2: return "dynasent_r2";
  }
  return "unknown";
}

std::string_view display_name(Source source) noexcept {
  switch (source) {
    case Source::sst_local: return "SST-3";
    case Source::dynasent_r1: return "DynaSent R1";
    case Source::dynasent_r2: return "DynaSent R2";
  }
  return "unknown";
}

Source parse_source(std::string_view text) {
  if (text == "sst_local") return Source::sst_local;
  if (text == "dynasent_r1") return Source::dynasent_r1;
  if (text == "dynasent_r2") return Source::dynasent_r2;
  throw IngestError("unknown source \"" + std::string(text) + "\"");
}

double SplitStats::percent(Label label) const {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(count(label)) / static_cast<double>(total);
}

double SplitStats::percent(Source source) const {
  return total == 0 ? 0.0
                    : 100.0 * static_cast<double>(count(source)) / static_cast<double>(total);
}

namespace {

std::string padded_ordinal(std::size_t ordinal) {
  std::string digits = std::to_string(ordinal);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return digits;
}

std::string required_string(const json& record, const char* field, std::size_t line) {
  const auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw IngestError("line " + std::to_string(line) + ": missing string field \"" + field + "\"");
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<Review> read_reviews(std::istream& in) {
  std::vector<Review> reviews;
  std::array<std::size_t, kNumSources> ordinals{};
  for_each_jsonl(in, [&](const json& record, std::size_t line) {
    Review review;
    review.text = required_string(record, "text", line);
    if (review.text.empty()) {
      throw IngestError("line " + std::to_string(line) + ": empty text");
    }
    const std::string label = required_string(record, "label", line);
    const std::string source = required_string(record, "source", line);
    try {
      review.label = parse_label_any(label);
      review.source = parse_source(source);
    } catch (const IngestError& e) {
      throw IngestError("line " + std::to_string(line) + ": " + e.what());
    }
    auto& ordinal = ordinals[static_cast<std::size_t>(review.source)];
    if (const auto it = record.find("id"); it != record.end() && it->is_string()) {
      review.id = it->get<std::string>();
    } else {
      review.id = std::string(to_string(review.source)) + "_" + padded_ordinal(ordinal);
    }
    ++ordinal;
    reviews.push_back(std::move(review));
  });
  return reviews;
}

std::vector<Review> read_reviews(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  return read_reviews(in);
}

void write_reviews(std::ostream& out, const std::vector<Review>& reviews) {
  for (const auto& review : reviews) {
    json record = {{"id", review.id},
                   {"text", review.text},
                   {"label", to_string(review.label)},
                   {"source", to_string(review.source)}};
    out << record.dump() << '\n';
  }
}

void write_reviews(const std::filesystem::path& path, const std::vector<Review>& reviews) {
  std::ostringstream buffer;
  write_reviews(buffer, reviews);
  write_file_atomic(path, buffer.str());
}

std::vector<Review> merge_datasets(
    const std::vector<std::pair<std::string, std::vector<Review>>>& sources, std::uint64_t seed) {
  std::vector<Review> merged;
  std::size_t total = 0;
  for (const auto& [name, reviews] : sources) total += reviews.size();
  merged.reserve(total);

  std::unordered_set<std::string> seen;
  std::set<std::string> collisions;
  for (const auto& [name, reviews] : sources) {
    for (const auto& review : reviews) {
      if (!seen.insert(review.id).second) collisions.insert(review.id);
      merged.push_back(review);
    }
  }
  if (!collisions.empty()) {
    std::string list;
    for (const auto& id : collisions) {
      if (!list.empty()) list += ", ";
      list += id;
    }
    throw DuplicateIdError("duplicate ids across sources: " + list);
  }
  fisher_yates(merged.begin(), merged.end(), seed);
  return merged;
}

SplitStats split_stats(const std::vector<Review>& split) {
  SplitStats stats;
  stats.total = split.size();
  for (const auto& review : split) {
    ++stats.label_counts[index_of(review.label)];
    ++stats.source_counts[static_cast<std::size_t>(review.source)];
  }
  return stats;
}

namespace {

std::string with_commas(std::size_t value) {
  std::string digits = std::to_string(value);
  for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) {
    digits.insert(static_cast<std::size_t>(i), ",");
  }
  return digits;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_stats(const SplitStats& stats, std::string_view split_name) {
  std::ostringstream out;
  out << "Label distribution\n";
  out << pad_right("Split", 12) << pad_left("Negative", 10) << pad_left("Neutral", 10)
      << pad_left("Positive", 10) << pad_left("Total", 10) << '\n';
  out << pad_right(std::string(split_name), 12);
  for (Label label : kAllLabels) out << pad_left(with_commas(stats.count(label)), 10);
  out << pad_left(with_commas(stats.total), 10) << '\n';
  out << pad_right("Share (%)", 12);
  for (Label label : kAllLabels) out << pad_left(fixed(stats.percent(label), 2), 10);
  out << pad_left(stats.total == 0 ? "0.00" : "100.00", 10) << "\n\n";

  out << "Source contribution\n";
  out << pad_right("Dataset", 14) << pad_left("Samples", 10) << pad_left("Percent (%)", 13) << '\n';
  for (Source source : kAllSources) {
    out << pad_right(std::string(display_name(source)), 14)
        << pad_left(with_commas(stats.count(source)), 10)
        << pad_left(fixed(stats.percent(source), 2), 13) << '\n';
  }
  out << pad_right("Total", 14) << pad_left(with_commas(stats.total), 10)
      << pad_left(stats.total == 0 ? "0.00" : "100.00", 13) << '\n';
  return out.str();
}

std::vector<Review> oversample_balance(const std::vector<Review>& split, std::uint64_t seed) {
  if (split.empty()) throw Error("oversample_balance: empty split");
  std::array<std::vector<std::size_t>, kNumLabels> members;
  for (std::size_t i = 0; i < split.size(); ++i) {
    members[index_of(split[i].label)].push_back(i);
  }
  std::size_t majority = 0;
  for (Label label : kAllLabels) {
    if (members[index_of(label)].empty()) {
      throw Error("oversample_balance: class " + std::string(to_string(label)) +
                  " has no examples");
    }
    majority = std::max(majority, members[index_of(label)].size());
  }

  std::vector<Review> balanced = split;
  SplitMix64 rng(seed);
  std::map<std::string, std::size_t> dup_counter;
  for (Label label : kAllLabels) {
    const auto& pool = members[index_of(label)];
    for (std::size_t added = pool.size(); added < majority; ++added) {
      Review copy = split[pool[rng.below(pool.size())]];
      copy.id += "#dup" + std::to_string(dup_counter[copy.id]++);
      balanced.push_back(std::move(copy));
    }
  }
  return balanced;
}

}  // namespace encassist
