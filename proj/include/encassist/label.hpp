#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace encassist {

/// Three-way sentiment label. The enumerator order is the canonical class
/// order used for probability triples and tie-breaks everywhere.
enum class Label : int { negative = 0, neutral = 1, positive = 2 };

/// SST five-way label, before collapsing.
enum class Label5 : int {
  negative = 0,
  somewhat_negative = 1,
  neutral = 2,
  somewhat_positive = 3,
  positive = 4,
};

inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {Label::negative, Label::neutral,
                                                            Label::positive};

constexpr std::size_t index_of(Label label) noexcept { return static_cast<std::size_t>(label); }

std::string_view to_string(Label label) noexcept;
std::string_view to_string(Label5 label) noexcept;

/// Parses "negative" / "neutral" / "positive". Throws IngestError naming the value.
Label parse_label(std::string_view text);

/// Parses the SST spellings ("somewhat negative", ...). Throws IngestError.
Label5 parse_label5(std::string_view text);

/// Accepts either vocabulary; five-way values are collapsed.
Label parse_label_any(std::string_view text);

Label collapse_sst5(Label5 label) noexcept;

/// argmax over a (negative, neutral, positive) triple, ties to the lower class.
Label argmax_label(const std::array<double, kNumLabels>& probs) noexcept;

}  // namespace encassist
