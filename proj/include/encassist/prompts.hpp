#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "encassist/corpus.hpp"
#include "encassist/encoder.hpp"
#include "encassist/label.hpp"
#include "encassist/retriever.hpp"

namespace encassist {

enum class SignatureKind {
  Basic,
  Label,
  Probs,
  LabelProbs,
  TopExamples,
  BalancedExamples,
  AllContext,
};

inline constexpr SignatureKind kAllSignatures[] = {
    SignatureKind::Basic,       SignatureKind::Label,            SignatureKind::Probs,
    SignatureKind::LabelProbs,  SignatureKind::TopExamples,      SignatureKind::BalancedExamples,
    SignatureKind::AllContext};

std::string_view to_string(SignatureKind kind) noexcept;
SignatureKind parse_signature(std::string_view name);

bool needs_encoder_label(SignatureKind kind) noexcept;
bool needs_probs(SignatureKind kind) noexcept;
bool needs_examples(SignatureKind kind) noexcept;

enum class FtTemplateKind { FT_M, FT, FT_L };

std::string_view to_string(FtTemplateKind kind) noexcept;
FtTemplateKind parse_ft_template(std::string_view name);

inline constexpr std::string_view kAssistantSystem = "You are a sentiment analysis assistant.";
inline constexpr std::string_view kMinimalSystem =
    "You are a model that classifies the sentiment of a review as either 'positive', "
    "'neutral', or 'negative'.";

struct ExampleLine {
  Label label = Label::neutral;
  std::string text;
};

struct PromptContext {
  std::string review;
  std::optional<Label> encoder_label;
  std::optional<ProbTriple> probs;
  std::optional<std::vector<ExampleLine>> examples;
};

std::vector<ExampleLine> to_example_lines(const std::vector<RetrievedExample>& retrieved);

struct RenderedPrompt {
  std::string system;
  std::string user;
};

struct FineTuneRecord {
  std::string system;
  std::string user;
  std::string assistant;
};

/// Throws RenderError naming the missing field and the signature.
RenderedPrompt render(SignatureKind kind, const PromptContext& ctx);

/// Throws RenderError for FT-L without an encoder label.
FineTuneRecord render_ft(FtTemplateKind kind, std::string_view review, Label gold,
                         std::optional<Label> encoder_label = std::nullopt);

/// One chat-format line: {"messages": [system, user, assistant]}.
std::string to_jsonl_line(const FineTuneRecord& record);

/// Writes one record per review, in order, and returns the count. FT-L
/// queries `backend` for each review's label; any failure is rethrown as an
/// Error naming the review id.
std::size_t export_ft_jsonl(const std::vector<Review>& dataset, FtTemplateKind kind,
                            const EncoderBackend* backend, std::ostream& out);

/// Trims, strips a leading "Classification:", lowercases and matches a label.
/// Throws RefusedLabel for "mixed" and UnparseableCompletion otherwise.
Label parse_classification(std::string_view completion);

}  // namespace encassist
