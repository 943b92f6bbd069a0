#include "encassist/label.hpp"

#include <string>

#include "encassist/error.hpp"

namespace encassist {

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::negative: return "negative";
    case Label::neutral: return "neutral";
    case Label::positive: return "positive";
  }
  return "unknown";
}

std::string_view to_string(Label5 label) noexcept {
  switch (label) {
    case Label5::negative: return "negative";
    case Label5::somewhat_negative: return "somewhat negative";
    case Label5::neutral: return "neutral";
    case Label5::somewhat_positive: return "somewhat positive";
    case Label5::positive: return "positive";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "negative") return Label::negative;
  if (text == "neutral") return Label::neutral;
  if (text == "positive") return Label::positive;
  throw IngestError("unknown label \"" + std::string(text) + "\"");
}

Label5 parse_label5(std::string_view text) {
  if (text == "negative") return Label5::negative;
  if (text == "somewhat negative") return Label5::somewhat_negative;
  if (text == "neutral") return Label5::neutral;
  if (text == "somewhat positive") return Label5::somewhat_positive;
  if (text == "positive") return Label5::positive;
  throw IngestError("unknown five-way label \"" + std::string(text) + "\"");
}

Label parse_label_any(std::string_view text) {
  try {
    return collapse_sst5(parse_label5(text));
  } catch (const IngestError&) {
    throw IngestError("unknown label \"" + std::string(text) + "\"");
  }
}

Label collapse_sst5(Label5 label) noexcept {
  switch (label) {
    case Label5::negative:
    case Label5::somewhat_negative: return Label::negative;
    case Label5::neutral: return Label::neutral;
    case Label5::somewhat_positive:
    case Label5::positive: return Label::positive;
  }
  return Label::neutral;
}

Label argmax_label(const std::array<double, kNumLabels>& probs) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumLabels; ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<Label>(best);
}

}  // namespace encassist
