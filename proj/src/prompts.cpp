#include "encassist/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>

#include "encassist/error.hpp"
#include "encassist/jsonl.hpp"

namespace encassist {

std::string_view to_string(SignatureKind kind) noexcept {
  switch (kind) {
    case SignatureKind::Basic: return "Basic";
    case SignatureKind::Label: return "Label";
    case SignatureKind::Probs: return "Probs";
    case SignatureKind::LabelProbs: return "LabelProbs";
    case SignatureKind::TopExamples: return "TopExamples";
    case SignatureKind::BalancedExamples: return "BalancedExamples";
    case SignatureKind::AllContext: return "AllContext";
  }
  return "unknown";
}

SignatureKind parse_signature(std::string_view name) {
  for (SignatureKind kind : kAllSignatures) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown signature \"" + std::string(name) + "\"");
}

bool needs_encoder_label(SignatureKind kind) noexcept {
  return kind != SignatureKind::Basic && kind != SignatureKind::Probs;
}

bool needs_probs(SignatureKind kind) noexcept {
  return kind == SignatureKind::Probs || kind == SignatureKind::LabelProbs ||
         kind == SignatureKind::AllContext;
}

bool needs_examples(SignatureKind kind) noexcept {
  return kind == SignatureKind::TopExamples || kind == SignatureKind::BalancedExamples ||
         kind == SignatureKind::AllContext;
}

std::string_view to_string(FtTemplateKind kind) noexcept {
  switch (kind) {
    case FtTemplateKind::FT_M: return "FT-M";
    case FtTemplateKind::FT: return "FT";
    case FtTemplateKind::FT_L: return "FT-L";
  }
  return "unknown";
}

FtTemplateKind parse_ft_template(std::string_view name) {
  if (name == "FT-M") return FtTemplateKind::FT_M;
  if (name == "FT") return FtTemplateKind::FT;
  if (name == "FT-L") return FtTemplateKind::FT_L;
  throw ConfigError("unknown fine-tune template \"" + std::string(name) + "\"");
}

std::vector<ExampleLine> to_example_lines(const std::vector<RetrievedExample>& retrieved) {
  std::vector<ExampleLine> lines;
  lines.reserve(retrieved.size());
  for (const auto& example : retrieved) lines.push_back({example.label, example.text});
  return lines;
}

namespace {

constexpr std::string_view kInstruction =
    "Classify the sentiment of a review as either 'negative', 'neutral', or 'positive'.";
constexpr std::string_view kSeparator = "\n\n---\n\n";
constexpr std::string_view kFormatHeader = "Follow the following format.\n\n";

enum class Field {
  examples,
  review,
  decision,
  neg_prob,
  neu_prob,
  pos_prob,
  classification,
};

struct FieldSpec {
  Field field;
  std::string_view name;
  std::string_view description;
};

constexpr std::string_view kProbSuffix = " from a model fine-tuned on sentiment";

constexpr FieldSpec kExamples{Field::examples, "Examples",
                              "A list of examples that demonstrate different sentiment classes."};
constexpr FieldSpec kReview{Field::review, "Review", "The review text to classify."};
constexpr FieldSpec kDecision{
    Field::decision, "Classifier Decision",
    "The sentiment classification proposed by a model fine-tuned on sentiment."};
constexpr FieldSpec kNegProb{Field::neg_prob, "Negative Probability",
                             "Probability the review is negative"};
constexpr FieldSpec kNeuProb{Field::neu_prob, "Neutral Probability",
                             "Probability the review is neutral"};
constexpr FieldSpec kPosProb{Field::pos_prob, "Positive Probability",
                             "Probability the review is positive"};
constexpr FieldSpec kClassification{
    Field::classification, "Classification",
    "One word representing the sentiment classification: 'negative', 'neutral', or 'positive' "
    "(do not repeat the field name, do not use 'mixed')"};

struct Layout {
  std::vector<FieldSpec> fields;
  // Fields separated by a blank line rather than a single newline.
  bool spaced = false;
  // Probability descriptions carry the "from a model fine-tuned" suffix.
  bool long_prob_descriptions = false;
};

Layout layout_for(SignatureKind kind) {
  switch (kind) {
    case SignatureKind::Basic: return {{kReview, kClassification}, false, false};
    case SignatureKind::Label: return {{kReview, kDecision, kClassification}, false, false};
    case SignatureKind::Probs:
      return {{kReview, kNegProb, kNeuProb, kPosProb, kClassification}, true, true};
    case SignatureKind::LabelProbs:
      return {{kReview, kDecision, kNegProb, kNeuProb, kPosProb, kClassification}, true, false};
    case SignatureKind::TopExamples:
    case SignatureKind::BalancedExamples:
      return {{kExamples, kReview, kDecision, kClassification}, true, false};
    case SignatureKind::AllContext:
      return {{kExamples, kReview, kDecision, kNegProb, kNeuProb, kPosProb, kClassification},
              true,
              false};
  }
  return {};
}

bool is_prob(Field field) {
  return field == Field::neg_prob || field == Field::neu_prob || field == Field::pos_prob;
}

[[noreturn]] void missing(std::string_view field, SignatureKind kind) {
  throw RenderError("signature " + std::string(to_string(kind)) + " requires " +
                    std::string(field));
}

std::string instance_value(Field field, SignatureKind kind, const PromptContext& ctx) {
  switch (field) {
    case Field::review:
      if (ctx.review.empty()) missing("review", kind);
      return ctx.review;
    case Field::decision:
      if (!ctx.encoder_label) missing("encoder_label", kind);
      return std::string(to_string(*ctx.encoder_label));
    case Field::neg_prob:
    case Field::neu_prob:
    case Field::pos_prob: {
      if (!ctx.probs) missing("probs", kind);
      const auto index = static_cast<std::size_t>(field) - static_cast<std::size_t>(Field::neg_prob);
      return format_percent((*ctx.probs)[index]);
    }
    case Field::examples: {
      if (!ctx.examples || ctx.examples->empty()) missing("examples", kind);
      std::string lines;
      for (const auto& example : *ctx.examples) {
        lines += "\n- ";
        lines += to_string(example.label);
        lines += ": ";
        lines += example.text;
      }
      return lines;
    }
    case Field::classification: return {};
  }
  return {};
}

}  // namespace

RenderedPrompt render(SignatureKind kind, const PromptContext& ctx) {
  const Layout layout = layout_for(kind);
  const std::string_view field_sep = layout.spaced ? "\n\n" : "\n";

  std::string user(kInstruction);
  user += kSeparator;
  user += kFormatHeader;
  for (std::size_t i = 0; i < layout.fields.size(); ++i) {
    const auto& spec = layout.fields[i];
    if (i > 0) user += field_sep;
    user += spec.name;
    user += ": ";
    user += spec.description;
    if (is_prob(spec.field) && layout.long_prob_descriptions) user += kProbSuffix;
  }
  user += kSeparator;
  for (std::size_t i = 0; i < layout.fields.size(); ++i) {
    const auto& spec = layout.fields[i];
    if (i > 0) user += field_sep;
    user += spec.name;
    user += ':';
    if (spec.field == Field::classification) continue;
    const std::string value = instance_value(spec.field, kind, ctx);
    // Examples start on the next line; every other value follows a space.
    if (spec.field != Field::examples) user += ' ';
    user += value;
  }
  return {std::string(kAssistantSystem), std::move(user)};
}

FineTuneRecord render_ft(FtTemplateKind kind, std::string_view review, Label gold,
                         std::optional<Label> encoder_label) {
  PromptContext ctx;
  ctx.review = std::string(review);
  const std::string assistant(to_string(gold));
  switch (kind) {
    case FtTemplateKind::FT_M:
      return {std::string(kMinimalSystem), std::string(review), assistant};
    case FtTemplateKind::FT: {
      auto prompt = render(SignatureKind::Basic, ctx);
      return {std::move(prompt.system), std::move(prompt.user), assistant};
    }
    case FtTemplateKind::FT_L: {
      if (!encoder_label) throw RenderError("FT-L requires an encoder label");
      ctx.encoder_label = encoder_label;
      auto prompt = render(SignatureKind::Label, ctx);
      return {std::move(prompt.system), std::move(prompt.user), assistant};
    }
  }
  throw RenderError("unknown fine-tune template");
}

std::string to_jsonl_line(const FineTuneRecord& record) {
  const json line = {
      {"messages", json::array({{{"role", "system"}, {"content", record.system}},
                                {{"role", "user"}, {"content", record.user}},
                                {{"role", "assistant"}, {"content", record.assistant}}})}};
  return line.dump();
}

std::size_t export_ft_jsonl(const std::vector<Review>& dataset, FtTemplateKind kind,
                            const EncoderBackend* backend, std::ostream& out) {
  if (kind == FtTemplateKind::FT_L && backend == nullptr) {
    throw ConfigError("FT-L export requires an encoder backend");
  }
  std::size_t written = 0;
  for (const auto& review : dataset) {
    std::optional<Label> encoder_label;
    if (kind == FtTemplateKind::FT_L) {
      try {
        encoder_label = backend->predict(review.text, review.id).label;
      } catch (const std::exception& e) {
        throw Error("export aborted at review \"" + review.id + "\": " + e.what());
      }
    }
    out << to_jsonl_line(render_ft(kind, review.text, review.label, encoder_label)) << '\n';
    ++written;
  }
  return written;
}

Label parse_classification(std::string_view completion) {
  const auto trim = [](std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return std::string_view{};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
  };
  std::string_view body = trim(completion);
  constexpr std::string_view kPrefix = "classification:";
  if (body.size() >= kPrefix.size()) {
    std::string head(body.substr(0, kPrefix.size()));
    std::transform(head.begin(), head.end(), head.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (head == kPrefix) body = trim(body.substr(kPrefix.size()));
  }
  std::string lowered(body);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lowered == "negative") return Label::negative;
  if (lowered == "neutral") return Label::neutral;
  if (lowered == "positive") return Label::positive;
  if (lowered == "mixed") throw RefusedLabel(std::string(completion));
  throw UnparseableCompletion(std::string(completion));
}

}  // namespace encassist
