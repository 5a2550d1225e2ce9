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

#ifndef DISTILL_AUDIT_DETECTORS_H_
#define DISTILL_AUDIT_DETECTORS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distill_audit/trace.h"
#include "json.hpp"

namespace distill_audit {

// Detector names as they appear in score files and reports.
inline constexpr std::string_view kTbd = "tbd";
inline constexpr std::string_view kGeneratedPerplexity = "generated_perplexity";
inline constexpr std::string_view kGeneratedMinK = "generated_min_k";
inline constexpr std::string_view kGeneratedMeanProb = "generated_mean_prob";
inline constexpr std::string_view kPerplexity = "perplexity";
inline constexpr std::string_view kZlib = "zlib";
inline constexpr std::string_view kLowercase = "lowercase";
inline constexpr std::string_view kMinK = "min_k";
inline constexpr std::string_view kMinKPlusPlus = "min_k_pp";
inline constexpr std::string_view kNeighbor = "neighbor";

inline constexpr int64_t kDefaultGeneratedLimit = 1000;
inline constexpr double kNearDeterministicThreshold = 0.99;
inline constexpr int64_t kNearDeterministicLimit = 300;
// Lower bound applied to the vocabulary standard deviation in Min-K%++.
inline constexpr double kMinKPlusPlusSigmaFloor = 1e-6;
// DEFLATE settings behind the zlib detector. Reports record them.
inline constexpr int kZlibLevel = 6;

// Token Probability Deviation parameters: reference probability, exponent
// applied to each deviation, and number of leading tokens considered.
struct TbdParams {
  double tau = 1.0;
  double alpha = 0.6;
  int64_t m = 300;
};

struct MinKParams {
  double k_percent = 20.0;
  // Token cap for the generated-token variant; unset means
  // kDefaultGeneratedLimit. Input-token Min-K ignores it.
  std::optional<int64_t> limit;
};

absl::Status ValidateTbdParams(const TbdParams& params);
absl::Status ValidateMinKParams(const MinKParams& params);

// All registered detector names, generation detectors first.
std::span<const std::string_view> AllDetectors();
bool IsGenerationDetector(std::string_view detector);
absl::StatusOr<Orientation> DetectorOrientation(std::string_view detector);

// Token Probability Deviation. Over the first min(m, n) generated tokens,
// tokens with probability strictly below tau are outliers; the score is the
// mean of (tau - p)^alpha over outliers, and 0 when there are none. Lower
// scores point to members.
absl::StatusOr<DetectorScore> TbdScore(const GenerationTrace& trace,
                                       const TbdParams& params);

// exp(mean NLL) over the first `limit` generated tokens.
absl::StatusOr<DetectorScore> GeneratedPerplexity(const GenerationTrace& trace,
                                                  int64_t limit);

// Mean logprob of the max(1, floor(k% * n)) lowest-logprob tokens among the
// first `limit` generated tokens.
absl::StatusOr<DetectorScore> GeneratedMinK(const GenerationTrace& trace,
                                            const MinKParams& params);

// Mean token probability over the first `limit` generated tokens.
absl::StatusOr<DetectorScore> GeneratedMeanProb(const GenerationTrace& trace,
                                                int64_t limit);

absl::StatusOr<DetectorScore> InputPerplexity(const InputTrace& trace);

// Total NLL of the scored input tokens divided by the zlib-compressed size
// of the text in bytes.
absl::StatusOr<DetectorScore> ZlibScore(const InputTrace& trace);

// perplexity(original) / perplexity(lowered). `lowered` must be the same
// question with Utf8Lowercase(original.text).
absl::StatusOr<DetectorScore> LowercaseScore(const InputTrace& original,
                                             const InputTrace& lowered);

absl::StatusOr<DetectorScore> MinKScore(const InputTrace& trace,
                                        const MinKParams& params);

// Min-K% over per-position z-scores (logprob - mu) / max(sigma, 1e-6).
// Needs vocab_stats; returns FailedPrecondition without them.
absl::StatusOr<DetectorScore> MinKPlusPlusScore(const InputTrace& trace,
                                                const MinKParams& params);

// meanNLL(original) minus the average meanNLL of the neighbor texts.
absl::StatusOr<DetectorScore> NeighborScore(
    const InputTrace& original, std::span<const InputTrace> neighbors);

// Fraction of the first `limit` generated tokens with probability at least
// `threshold`.
absl::StatusOr<double> NearDeterministicFraction(
    const GenerationTrace& trace, double threshold = kNearDeterministicThreshold,
    int64_t limit = kNearDeterministicLimit);

// Size in bytes of `text` compressed with DEFLATE in a zlib container at
// kZlibLevel.
size_t ZlibCompressedSize(std::string_view text);

// A detector together with the parameters it runs with.
struct DetectorSpec {
  std::string detector;
  TbdParams tbd;
  MinKParams min_k;
  // Token cap for generated_perplexity and generated_mean_prob.
  int64_t limit = kDefaultGeneratedLimit;

  // Parameters that affect this detector, for reports and digests.
  nlohmann::ordered_json ParamsJson() const;
};

absl::Status ValidateDetectorSpec(const DetectorSpec& spec);

// Input traces that belong to one question.
struct InputBundle {
  const InputTrace* original = nullptr;
  const InputTrace* lowercased = nullptr;
  std::vector<InputTrace> neighbors;
};

absl::StatusOr<DetectorScore> ScoreGeneration(const DetectorSpec& spec,
                                              const GenerationTrace& trace);
absl::StatusOr<DetectorScore> ScoreInputs(const DetectorSpec& spec,
                                          const InputBundle& bundle);

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_DETECTORS_H_
