//
// Copyright 2026 The Distill Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "distill_audit/trace.h"

#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "distill_audit/trace_file.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace distill_audit {
namespace {

using ::testing::HasSubstr;
using ::testing::SizeIs;

constexpr char kGenerationLine[] =
    R"({"kind":"generation","question_id":"q1","question_text":"2+2?",)"
    R"("label":"member","model_id":"m","decode":{"strategy":"greedy",)"
    R"("max_tokens":16,"system_prompt":"sys"},)"
    R"("generated":[{"t":"4","lp":-0.01},{"t":".","lp":0.0}]})";

std::string Message(const absl::Status& status) {
  return std::string(status.message());
}

TEST(ProbOfTest, ZeroLogprobIsCertain) {
  EXPECT_EQ(ProbOf(TokenProb{"x", 0.0}), 1.0);
}

TEST(ProbOfTest, MinusLogTwoIsHalf) {
  EXPECT_DOUBLE_EQ(ProbOf(TokenProb{"x", -std::log(2.0)}), 0.5);
}

TEST(ProbOfTest, MatchesArbitraryPrecisionExp) {
  // exp(-2) to 50 digits: 0.13533528323661269189399949497248440340763...
  EXPECT_NEAR(ProbOf(TokenProb{"x", -2.0}), 0.1353352832366126918939994949,
              1e-16);
}

TEST(ProbOfTest, StrictlyIncreasingAndBounded) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lp(-50.0, 0.0);
  for (int i = 0; i < 1000; ++i) {
    double a = lp(rng);
    double b = lp(rng);
    if (a > b) std::swap(a, b);
    const double pa = ProbOf(TokenProb{"", a});
    const double pb = ProbOf(TokenProb{"", b});
    EXPECT_GT(pa, 0.0);
    EXPECT_LE(pb, 1.0);
    if (a < b) {
      EXPECT_LE(pa, pb);
    }
  }
}

TEST(ParseTraceFileTest, EmptyStreamGivesNoRecords) {
  auto records = ParseTraceText("");
  ASSERT_TRUE(records.ok());
  EXPECT_TRUE(records->empty());
}

TEST(ParseTraceFileTest, ParsesGenerationRecord) {
  auto records = ParseTraceText(std::string(kGenerationLine) + "\n");
  ASSERT_TRUE(records.ok()) << records.status();
  ASSERT_THAT(*records, SizeIs(1));
  const auto& trace = std::get<GenerationTrace>((*records)[0]);
  EXPECT_EQ(trace.question_id, "q1");
  EXPECT_EQ(trace.label, Label::kMember);
  EXPECT_EQ(trace.decode.max_tokens, 16);
  ASSERT_THAT(trace.generated, SizeIs(2));
  EXPECT_EQ(trace.generated[0].text, "4");
  EXPECT_EQ(trace.generated[0].logprob, -0.01);
  EXPECT_EQ(trace.generated[1].logprob, 0.0);
}

TEST(ParseTraceFileTest, PositiveLogprobNamesLine) {
  std::string text = std::string(kGenerationLine) + "\n";
  std::string bad = kGenerationLine;
  bad.replace(bad.find("\"q1\""), 4, "\"q2\"");
  bad.replace(bad.find("-0.01"), 5, "0.5");
  auto records = ParseTraceText(text + bad + "\n");
  ASSERT_FALSE(records.ok());
  EXPECT_TRUE(absl::IsInvalidArgument(records.status()));
  EXPECT_THAT(Message(records.status()), HasSubstr("line 2"));
  EXPECT_THAT(Message(records.status()), HasSubstr("<= 0"));
}

TEST(ParseTraceFileTest, MalformedLineNamesLine) {
  auto records = ParseTraceText("\n{\"kind\": \"generation\",\n");
  ASSERT_FALSE(records.ok());
  EXPECT_THAT(Message(records.status()), HasSubstr("line 2"));
}

TEST(ParseTraceFileTest, RejectsDuplicateQuestionId) {
  std::string text = std::string(kGenerationLine) + "\n" + kGenerationLine;
  auto records = ParseTraceText(text);
  ASSERT_FALSE(records.ok());
  EXPECT_THAT(Message(records.status()), HasSubstr("duplicate question_id"));
}

TEST(ParseTraceFileTest, SameIdAcrossKindsAndVariantsIsFine) {
  const std::string text = std::string(kGenerationLine) + "\n" +
      R"({"kind":"input","question_id":"q1","text":"Ab","variant":"original","input_tokens":[{"t":"A","lp":null},{"t":"b","lp":-1.5}]})"
      "\n"
      R"({"kind":"input","question_id":"q1","text":"ab","variant":"lowercased","input_tokens":[{"t":"a","lp":null},{"t":"b","lp":-1.0}]})"
      "\n"
      R"({"kind":"input","question_id":"q1","text":"Ac","variant":"neighbor","input_tokens":[null,{"t":"c","lp":-2.0}]})"
      "\n"
      R"({"kind":"input","question_id":"q1","text":"Ad","variant":"neighbor","input_tokens":[null,{"t":"d","lp":-2.0}]})"
      "\n";
  auto records = ParseTraceText(text);
  ASSERT_TRUE(records.ok()) << records.status();
  EXPECT_THAT(*records, SizeIs(5));
  const auto& neighbor = std::get<InputTrace>((*records)[3]);
  EXPECT_FALSE(neighbor.input_tokens[0].logprob.has_value());
  EXPECT_EQ(neighbor.variant, Variant::kNeighbor);
}

TEST(ParseTraceFileTest, RejectsNullLogprobAfterFirstSlot) {
  auto records = ParseTraceText(
      R"({"kind":"input","question_id":"q","text":"ab","variant":"original","input_tokens":[{"t":"a","lp":null},{"t":"b","lp":null}]})");
  ASSERT_FALSE(records.ok());
  EXPECT_THAT(Message(records.status()), HasSubstr("first input token"));
}

TEST(ParseTraceFileTest, RejectsVocabStatsLengthMismatch) {
  auto records = ParseTraceText(
      R"({"kind":"input","question_id":"q","text":"ab","variant":"original","input_tokens":[{"t":"a","lp":null},{"t":"b","lp":-1}],"vocab_stats":[{"mu":-1,"sigma":1}]})");
  ASSERT_FALSE(records.ok());
  EXPECT_THAT(Message(records.status()), HasSubstr("vocab_stats"));
}

TEST(ParseTraceFileTest, RejectsNegativeSigma) {
  auto records = ParseTraceText(
      R"({"kind":"input","question_id":"q","text":"a","variant":"original","input_tokens":[{"t":"a","lp":null}],"vocab_stats":[{"mu":-1,"sigma":-0.5}]})");
  ASSERT_FALSE(records.ok());
  EXPECT_THAT(Message(records.status()), HasSubstr("sigma"));
}

TEST(ParseTraceFileTest, RejectsUnknownKindLabelAndStrategy) {
  EXPECT_FALSE(ParseTraceText(R"({"kind":"other","question_id":"q"})").ok());
  std::string label = kGenerationLine;
  label.replace(label.find("member"), 6, "maybe");
  EXPECT_FALSE(ParseTraceText(label).ok());
  std::string strategy = kGenerationLine;
  strategy.replace(strategy.find("greedy"), 6, "beam");
  EXPECT_FALSE(ParseTraceText(strategy).ok());
  std::string max_tokens = kGenerationLine;
  max_tokens.replace(max_tokens.find("16"), 2, "0");
  EXPECT_FALSE(ParseTraceText(max_tokens).ok());
}

TEST(ParseTraceFileTest, MissingTokenTextIsAnErrorButEmptyTextIsNot) {
  std::string empty = kGenerationLine;
  empty.replace(empty.find(R"("t":"4")"), 7, R"("t":"")");
  EXPECT_TRUE(ParseTraceText(empty).ok());
  std::string missing = kGenerationLine;
  missing.replace(missing.find(R"("t":"4",)"), 8, "");
  EXPECT_FALSE(ParseTraceText(missing).ok());
}

TEST(ParseTraceFileTest, EmptyGenerationIsValid) {
  std::string text = kGenerationLine;
  const size_t start = text.find("[{");
  text.replace(start, text.rfind("]") - start + 1, "[]");
  auto records = ParseTraceText(text);
  ASSERT_TRUE(records.ok()) << records.status();
  EXPECT_TRUE(std::get<GenerationTrace>((*records)[0]).generated.empty());
}

TEST(ParseTraceFileTest, PreservesUnknownFields) {
  std::string text = kGenerationLine;
  text.insert(text.size() - 1, R"(,"zz_note":{"a":[1,2]},"an_extra":"x")");
  auto records = ParseTraceText(text);
  ASSERT_TRUE(records.ok()) << records.status();
  EXPECT_EQ(WriteTraceText(*records), text + "\n");
}

TEST(WriteTraceFileTest, EmptyListWritesNothing) {
  EXPECT_EQ(WriteTraceText({}), "");
}

TEST(WriteTraceFileTest, OneTraceIsOneLine) {
  std::vector<TraceRecord> records = {testing::TraceFromProbs({0.5, 1.0})};
  const std::string text = WriteTraceText(records);
  ASSERT_FALSE(text.empty());
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}

TEST(WriteTraceFileTest, FieldOrderFollowsFormat) {
  std::vector<TraceRecord> records = {testing::TraceFromProbs({1.0})};
  const std::string text = WriteTraceText(records);
  EXPECT_EQ(text.find("{\"kind\":\"generation\",\"question_id\""), 0u);
  EXPECT_LT(text.find("\"decode\""), text.find("\"generated\""));
}

// Round trip: parse(write(r)) == r, and re-writing reproduces the bytes.
TEST(TraceRoundTripTest, RandomRecordsRoundTripBitExactly) {
  std::mt19937_64 rng(20260101);
  std::vector<TraceRecord> records;
  for (int i = 0; i < 100; ++i) {
    const std::string id = "q" + std::to_string(i);
    if (i % 3 == 0) {
      records.push_back(testing::RandomInputTrace(rng, 40, id, i % 2 == 0));
    } else {
      records.push_back(testing::RandomGenerationTrace(rng, 60, id));
    }
  }
  const std::string text = WriteTraceText(records);
  auto parsed = ParseTraceText(text);
  ASSERT_TRUE(parsed.ok()) << parsed.status();
  ASSERT_EQ(parsed->size(), records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ((*parsed)[i], records[i]) << "record " << i;
  }
  EXPECT_EQ(WriteTraceText(*parsed), text);
  // Logprobs survive bit for bit, including the sign of zero.
  for (size_t i = 0; i < records.size(); ++i) {
    if (const auto* g = std::get_if<GenerationTrace>(&records[i])) {
      const auto& back = std::get<GenerationTrace>((*parsed)[i]);
      for (size_t t = 0; t < g->generated.size(); ++t) {
        EXPECT_EQ(std::signbit(g->generated[t].logprob),
                  std::signbit(back.generated[t].logprob));
      }
    }
  }
}

// Seeded fuzzing: valid records always parse; a single invariant violation
// is always rejected.
TEST(TraceValidationFuzzTest, RejectsExactlyInvalidRecords) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; ++i) {
    const std::string id = "f" + std::to_string(i);
    TraceRecord valid = (i % 2 == 0)
        ? TraceRecord(testing::RandomGenerationTrace(rng, 30, id))
        : TraceRecord(testing::RandomInputTrace(rng, 30, id, i % 4 == 1));
    ASSERT_TRUE(ParseTraceText(SerializeTraceRecord(valid)).ok()) << i;

    TraceRecord broken = valid;
    bool mutated = false;
    if (auto* g = std::get_if<GenerationTrace>(&broken)) {
      switch (i % 3) {
        case 0:
          if (!g->generated.empty()) {
            g->generated[rng() % g->generated.size()].logprob = 0.25;
            mutated = true;
          }
          break;
        case 1:
          g->decode.max_tokens = -static_cast<int64_t>(rng() % 10);
          mutated = true;
          break;
        default:
          g->question_id.clear();
          mutated = true;
          break;
      }
    } else {
      auto& input = std::get<InputTrace>(broken);
      if (input.input_tokens.size() > 1 && i % 3 == 0) {
        input.input_tokens.back().logprob.reset();
        mutated = true;
      } else if (input.input_tokens.size() > 1 && i % 3 == 1) {
        input.input_tokens.back().logprob = 1e-3;
        mutated = true;
      } else if (input.vocab_stats.has_value()) {
        input.vocab_stats->push_back(VocabStat{0.0, 1.0});
        mutated = true;
      }
    }
    if (!mutated) continue;
    EXPECT_FALSE(ValidateTraceRecord(broken).ok()) << i;
    EXPECT_FALSE(ParseTraceText(SerializeTraceRecord(broken)).ok()) << i;
  }
}

}  // namespace
}  // namespace distill_audit
