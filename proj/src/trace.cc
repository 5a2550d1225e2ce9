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
#include <string>

#include "distill_audit/text_util.h"

namespace distill_audit {

std::string_view LabelName(Label label) {
  switch (label) {
    case Label::kMember:
      return "member";
    case Label::kNonmember:
      return "nonmember";
    case Label::kUnknown:
      return "unknown";
  }
  return "unknown";
}

absl::StatusOr<Label> ParseLabel(std::string_view name) {
  if (name == "member") return Label::kMember;
  if (name == "nonmember") return Label::kNonmember;
  if (name == "unknown") return Label::kUnknown;
  return absl::InvalidArgumentError(StrCat("unknown label '", name, "'"));
}

std::string_view VariantName(Variant variant) {
  switch (variant) {
    case Variant::kOriginal:
      return "original";
    case Variant::kLowercased:
      return "lowercased";
    case Variant::kNeighbor:
      return "neighbor";
  }
  return "original";
}

absl::StatusOr<Variant> ParseVariant(std::string_view name) {
  if (name == "original") return Variant::kOriginal;
  if (name == "lowercased") return Variant::kLowercased;
  if (name == "neighbor") return Variant::kNeighbor;
  return absl::InvalidArgumentError(
      StrCat("unknown input variant '", name, "'"));
}

std::string_view OrientationName(Orientation orientation) {
  return orientation == Orientation::kMemberLow ? "member_low" : "member_high";
}

absl::StatusOr<Orientation> ParseOrientation(std::string_view name) {
  if (name == "member_low") return Orientation::kMemberLow;
  if (name == "member_high") return Orientation::kMemberHigh;
  return absl::InvalidArgumentError(
      StrCat("unknown orientation '", name, "'"));
}

std::string_view DecodeStrategyName(DecodeStrategy strategy) {
  switch (strategy) {
    case DecodeStrategy::kGreedy:
      return "greedy";
  }
  return "greedy";
}

absl::StatusOr<DecodeStrategy> ParseDecodeStrategy(std::string_view name) {
  if (name == "greedy") return DecodeStrategy::kGreedy;
  return absl::InvalidArgumentError(
      StrCat("unsupported decode strategy '", name, "'"));
}

double ProbOf(const TokenProb& token) { return std::exp(token.logprob); }

namespace {

absl::Status CheckLogprob(double logprob, size_t index) {
  if (!std::isfinite(logprob)) {
    return absl::InvalidArgumentError(
        StrCat("token ", index, ": logprob must be finite"));
  }
  if (logprob > 0.0) {
    return absl::InvalidArgumentError(StrCat(
        "token ", index, ": logprob must be <= 0 (got ", logprob, ")"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::Status ValidateTokenProb(const TokenProb& token) {
  return CheckLogprob(token.logprob, 0);
}

absl::Status ValidateDecodeParams(const DecodeParams& decode) {
  if (decode.max_tokens <= 0) {
    return absl::InvalidArgumentError(StrCat(
        "decode.max_tokens must be positive (got ", decode.max_tokens, ")"));
  }
  return absl::OkStatus();
}

absl::Status ValidateGenerationTrace(const GenerationTrace& trace) {
  if (trace.question_id.empty()) {
    return absl::InvalidArgumentError("question_id must be non-empty");
  }
  if (absl::Status s = ValidateDecodeParams(trace.decode); !s.ok()) return s;
  for (size_t i = 0; i < trace.generated.size(); ++i) {
    if (absl::Status s = CheckLogprob(trace.generated[i].logprob, i); !s.ok()) {
      return s;
    }
  }
  return absl::OkStatus();
}

absl::Status ValidateInputTrace(const InputTrace& trace) {
  if (trace.question_id.empty()) {
    return absl::InvalidArgumentError("question_id must be non-empty");
  }
  for (size_t i = 0; i < trace.input_tokens.size(); ++i) {
    const auto& logprob = trace.input_tokens[i].logprob;
    if (!logprob.has_value()) {
      if (i != 0) {
        return absl::InvalidArgumentError(StrCat(
            "token ", i, ": only the first input token may lack a logprob"));
      }
      continue;
    }
    if (absl::Status s = CheckLogprob(*logprob, i); !s.ok()) return s;
  }
  if (trace.vocab_stats.has_value()) {
    const auto& stats = *trace.vocab_stats;
    if (stats.size() != trace.input_tokens.size()) {
      return absl::InvalidArgumentError(StrCat(
          "vocab_stats has ", stats.size(), " entries but input_tokens has ",
          trace.input_tokens.size()));
    }
    for (size_t i = 0; i < stats.size(); ++i) {
      if (!std::isfinite(stats[i].mu) || !std::isfinite(stats[i].sigma)) {
        return absl::InvalidArgumentError(
            StrCat("vocab_stats ", i, ": values must be finite"));
      }
      if (stats[i].sigma < 0.0) {
        return absl::InvalidArgumentError(
            StrCat("vocab_stats ", i, ": sigma must be >= 0"));
      }
    }
  }
  return absl::OkStatus();
}

absl::Status ValidateTraceRecord(const TraceRecord& record) {
  if (const auto* g = std::get_if<GenerationTrace>(&record)) {
    return ValidateGenerationTrace(*g);
  }
  return ValidateInputTrace(std::get<InputTrace>(record));
}

}  // namespace distill_audit
