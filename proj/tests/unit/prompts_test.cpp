#include <gtest/gtest.h>

#include <sstream>

#include "encassist/error.hpp"
#include "encassist/prompts.hpp"
#include "encassist/rng.hpp"
#include "fixtures.hpp"
#include "synthetic.hpp"
#include "template_cases.hpp"

using namespace encassist;
using namespace encassist::testing;

namespace {

std::size_t occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t count = 0;
  for (auto at = haystack.find(needle); at != std::string::npos; at = haystack.find(needle, at + 1)) {
    ++count;
  }
  return count;
}

}  // namespace

TEST(Prompts, SignatureGoldenFiles) {
  for (const auto& c : signature_cases()) {
    const auto prompt = render(c.kind, c.context);
    EXPECT_EQ(prompt.system, "You are a sentiment analysis assistant.") << c.fixture;
    EXPECT_EQ(prompt.user, read_fixture("templates/" + c.fixture)) << c.fixture;
  }
}

TEST(Prompts, FineTuneGoldenFiles) {
  for (const auto& c : fine_tune_cases()) {
    const json expected = json::parse(read_fixture("templates/" + c.fixture));
    const auto record = render_ft(c.kind, c.review, c.gold, c.encoder_label);
    EXPECT_EQ(record.system, expected.at("system").get<std::string>()) << c.fixture;
    EXPECT_EQ(record.user, expected.at("user").get<std::string>()) << c.fixture;
    EXPECT_EQ(record.assistant, expected.at("assistant").get<std::string>()) << c.fixture;
  }
}

TEST(Prompts, FineTuneUserMatchesInferencePrompt) {
  PromptContext ctx;
  ctx.review = "Service was slow.";
  EXPECT_EQ(render_ft(FtTemplateKind::FT, ctx.review, Label::negative).user,
            render(SignatureKind::Basic, ctx).user);
  ctx.encoder_label = Label::neutral;
  EXPECT_EQ(render_ft(FtTemplateKind::FT_L, ctx.review, Label::negative, Label::neutral).user,
            render(SignatureKind::Label, ctx).user);
}

TEST(Prompts, MissingContextIsRenderError) {
  PromptContext ctx;
  ctx.review = "x";
  EXPECT_THROW(render(SignatureKind::Label, ctx), RenderError);
  EXPECT_THROW(render(SignatureKind::Probs, ctx), RenderError);
  ctx.encoder_label = Label::positive;
  EXPECT_THROW(render(SignatureKind::TopExamples, ctx), RenderError);
  ctx.examples = std::vector<ExampleLine>{};
  EXPECT_THROW(render(SignatureKind::BalancedExamples, ctx), RenderError);
  EXPECT_THROW(render(SignatureKind::Basic, PromptContext{}), RenderError);
  EXPECT_THROW(render_ft(FtTemplateKind::FT_L, "x", Label::neutral), RenderError);
}

TEST(Prompts, ProbabilityOutOfRangeRejected) {
  PromptContext ctx;
  ctx.review = "x";
  ctx.probs = ProbTriple{1.2, 0.0, 0.0};
  EXPECT_THROW(render(SignatureKind::Probs, ctx), RangeError);
}

TEST(Prompts, ContextValuesAppearOnceInTheirFieldLines) {
  const auto corpus = synthetic_corpus({40, 21, 0.3});
  SplitMix64 rng(4);
  for (SignatureKind kind : kAllSignatures) {
    for (std::size_t i = 0; i + 3 < corpus.size(); i += 4) {
      PromptContext ctx;
      ctx.review = corpus[i].text;
      const auto label = static_cast<Label>(rng.below(3));
      ctx.encoder_label = label;
      const double a = rng.uniform(), b = rng.uniform() * (1 - a);
      ctx.probs = ProbTriple{a, b, 1 - a - b};
      ctx.examples = std::vector<ExampleLine>{{corpus[i + 1].label, corpus[i + 1].text},
                                              {corpus[i + 2].label, corpus[i + 2].text}};
      const std::string user = render(kind, ctx).user;
      EXPECT_EQ(user, render(kind, ctx).user);
      EXPECT_EQ(occurrences(user, "\nReview: " + ctx.review + "\n"), 1u);
      EXPECT_EQ(occurrences(user, ctx.review), 1u);
      if (needs_encoder_label(kind)) {
        EXPECT_EQ(occurrences(user, "\nClassifier Decision: " + std::string(to_string(label)) + "\n"), 1u);
      } else {
        EXPECT_EQ(occurrences(user, "Classifier Decision"), 0u);
      }
      if (needs_probs(kind)) {
        EXPECT_EQ(occurrences(user, "\nNegative Probability: " + format_percent((*ctx.probs)[0]) + "\n"), 1u);
        EXPECT_EQ(occurrences(user, "\nNeutral Probability: " + format_percent((*ctx.probs)[1]) + "\n"), 1u);
        EXPECT_EQ(occurrences(user, "\nPositive Probability: " + format_percent((*ctx.probs)[2]) + "\n"), 1u);
      }
      if (needs_examples(kind)) {
        for (const auto& e : *ctx.examples) {
          EXPECT_EQ(occurrences(user, "\n- " + std::string(to_string(e.label)) + ": " + e.text + "\n"), 1u);
        }
      } else {
        EXPECT_EQ(occurrences(user, "Examples:"), 0u);
      }
      EXPECT_TRUE(user.size() >= 15 && user.substr(user.size() - 15) == "Classification:");
    }
  }
}

TEST(Prompts, SignatureNamesRoundTrip) {
  for (SignatureKind kind : kAllSignatures) EXPECT_EQ(parse_signature(to_string(kind)), kind);
  EXPECT_THROW(parse_signature("Fancy"), ConfigError);
  for (auto kind : {FtTemplateKind::FT_M, FtTemplateKind::FT, FtTemplateKind::FT_L}) {
    EXPECT_EQ(parse_ft_template(to_string(kind)), kind);
  }
  EXPECT_EQ(to_string(FtTemplateKind::FT_M), "FT-M");
}

TEST(ParseClassification, AcceptsLabelsWithOptionalPrefix) {
  EXPECT_EQ(parse_classification("negative"), Label::negative);
  EXPECT_EQ(parse_classification("Classification: positive\n"), Label::positive);
  EXPECT_EQ(parse_classification("  NEUTRAL "), Label::neutral);
  EXPECT_EQ(parse_classification("classification:negative"), Label::negative);
  for (Label l : kAllLabels) {
    EXPECT_EQ(parse_classification(render_ft(FtTemplateKind::FT, "x", l).assistant), l);
  }
}

TEST(ParseClassification, RefusedAndUnparseable) {
  EXPECT_THROW(parse_classification("mixed"), RefusedLabel);
  EXPECT_THROW(parse_classification("Classification: Mixed"), RefusedLabel);
  try {
    parse_classification("I think it is positive");
    FAIL();
  } catch (const UnparseableCompletion& e) {
    EXPECT_EQ(e.raw(), "I think it is positive");
  }
  EXPECT_THROW(parse_classification(""), UnparseableCompletion);
  EXPECT_THROW(parse_classification("positive."), UnparseableCompletion);
}

TEST(ExportFt, WritesRecordsInInputOrder) {
  const auto split = synthetic_corpus({12, 6, 0.1});
  std::ostringstream out;
  EXPECT_EQ(export_ft_jsonl(split, FtTemplateKind::FT, nullptr, out), 12u);
  std::istringstream in(out.str());
  std::size_t i = 0;
  for_each_jsonl(in, [&](const json& line, std::size_t) {
    const auto& messages = line.at("messages");
    ASSERT_EQ(messages.size(), 3u);
    EXPECT_EQ(messages[0].at("role"), "system");
    EXPECT_NE(messages[1].at("content").get<std::string>().find(split[i].text), std::string::npos);
    EXPECT_EQ(messages[2].at("content"), to_string(split[i].label));
    ++i;
  });
  EXPECT_EQ(i, 12u);
}

TEST(ExportFt, LabelTemplateNeedsBackend) {
  std::ostringstream out;
  EXPECT_THROW(export_ft_jsonl(synthetic_corpus({3, 1, 0.0}), FtTemplateKind::FT_L, nullptr, out),
               ConfigError);
}

TEST(ExportFt, LabelTemplateUsesEncoderPrediction) {
  const auto split = synthetic_corpus({30, 6, 0.3});
  const auto model = toy_train(split, 32, 3, 1);
  std::ostringstream out;
  export_ft_jsonl(split, FtTemplateKind::FT_L, &model, out);
  std::istringstream in(out.str());
  std::size_t i = 0;
  for_each_jsonl(in, [&](const json& line, std::size_t) {
    const std::string user = line["messages"][1]["content"];
    const std::string decision(to_string(model.predict(split[i].text).label));
    EXPECT_NE(user.find("\nClassifier Decision: " + decision + "\n"), std::string::npos);
    ++i;
  });
}
