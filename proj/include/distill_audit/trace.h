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

#ifndef DISTILL_AUDIT_TRACE_H_
#define DISTILL_AUDIT_TRACE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"

namespace distill_audit {

// System prompt used by default for generation requests. Prompt framing
// shifts token probabilities, so it is part of every cache key.
inline constexpr std::string_view kDefaultSystemPrompt =
    "You are Qwen, created by Alibaba Cloud. You are a helpful assistant.";

enum class Label { kMember, kNonmember, kUnknown };
enum class Variant { kOriginal, kLowercased, kNeighbor };
enum class DecodeStrategy { kGreedy };

// Whether members are expected on the low or the high side of a score.
enum class Orientation { kMemberLow, kMemberHigh };

std::string_view LabelName(Label label);
absl::StatusOr<Label> ParseLabel(std::string_view name);
std::string_view VariantName(Variant variant);
absl::StatusOr<Variant> ParseVariant(std::string_view name);
std::string_view OrientationName(Orientation orientation);
absl::StatusOr<Orientation> ParseOrientation(std::string_view name);
std::string_view DecodeStrategyName(DecodeStrategy strategy);
absl::StatusOr<DecodeStrategy> ParseDecodeStrategy(std::string_view name);

// A generated token and the natural log of the probability the model
// assigned to it. An empty `text` is legal: the producer wrote the field
// explicitly, which is the empty-token marker.
struct TokenProb {
  std::string text;
  double logprob = 0.0;

  friend bool operator==(const TokenProb&, const TokenProb&) = default;
};

// Token of an input sequence. The first token has no conditioning prefix
// and carries no logprob; every other slot must.
struct InputToken {
  std::string text;
  std::optional<double> logprob;

  friend bool operator==(const InputToken&, const InputToken&) = default;
};

// Mean and standard deviation of next-token log-probabilities over the
// vocabulary at one input position.
struct VocabStat {
  double mu = 0.0;
  double sigma = 0.0;

  friend bool operator==(const VocabStat&, const VocabStat&) = default;
};

struct DecodeParams {
  DecodeStrategy strategy = DecodeStrategy::kGreedy;
  int64_t max_tokens = 1024;
  std::string system_prompt = std::string(kDefaultSystemPrompt);

  friend bool operator==(const DecodeParams&, const DecodeParams&) = default;
};

struct GenerationTrace {
  std::string question_id;
  std::string question_text;
  Label label = Label::kUnknown;
  std::string model_id;
  DecodeParams decode;
  std::vector<TokenProb> generated;
  // Unknown fields of the source record, kept for round-tripping.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  friend bool operator==(const GenerationTrace&,
                         const GenerationTrace&) = default;
};

struct InputTrace {
  std::string question_id;
  std::string text;
  Variant variant = Variant::kOriginal;
  std::vector<InputToken> input_tokens;
  std::optional<std::vector<VocabStat>> vocab_stats;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  friend bool operator==(const InputTrace&, const InputTrace&) = default;
};

using TraceRecord = std::variant<GenerationTrace, InputTrace>;

struct DetectorScore {
  std::string question_id;
  std::string detector;
  double score = 0.0;
  Orientation orientation = Orientation::kMemberLow;

  friend bool operator==(const DetectorScore&, const DetectorScore&) = default;
};

// Probability of a token, exp(logprob), in (0, 1].
double ProbOf(const TokenProb& token);

absl::Status ValidateTokenProb(const TokenProb& token);
absl::Status ValidateDecodeParams(const DecodeParams& decode);
absl::Status ValidateGenerationTrace(const GenerationTrace& trace);
absl::Status ValidateInputTrace(const InputTrace& trace);
absl::Status ValidateTraceRecord(const TraceRecord& record);

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_TRACE_H_
