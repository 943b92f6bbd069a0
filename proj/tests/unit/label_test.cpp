#include <gtest/gtest.h>

#include "encassist/error.hpp"
#include "encassist/label.hpp"

using namespace encassist;

TEST(Label, RoundTripsCanonicalNames) {
  for (Label label : kAllLabels) EXPECT_EQ(parse_label(to_string(label)), label);
}

TEST(Label, RejectsUnknownAndMixedCase) {
  EXPECT_THROW(parse_label("Positive"), IngestError);
  EXPECT_THROW(parse_label("mixed"), IngestError);
  EXPECT_THROW(parse_label(""), IngestError);
}

TEST(Label, CollapsesFiveWayLabels) {
  EXPECT_EQ(parse_label_any("somewhat negative"), Label::negative);
  EXPECT_EQ(parse_label_any("negative"), Label::negative);
  EXPECT_EQ(parse_label_any("neutral"), Label::neutral);
  EXPECT_EQ(parse_label_any("somewhat positive"), Label::positive);
  EXPECT_EQ(parse_label_any("positive"), Label::positive);
  EXPECT_THROW(parse_label_any("very positive"), IngestError);
}

TEST(Label, ArgmaxBreaksTiesTowardLowerClass) {
  EXPECT_EQ(argmax_label({0.2, 0.5, 0.3}), Label::neutral);
  EXPECT_EQ(argmax_label({0.4, 0.4, 0.2}), Label::negative);
  EXPECT_EQ(argmax_label({0.2, 0.4, 0.4}), Label::neutral);
  EXPECT_EQ(argmax_label({1.0 / 3, 1.0 / 3, 1.0 / 3}), Label::negative);
}
