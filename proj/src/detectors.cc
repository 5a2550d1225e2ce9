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

#include "distill_audit/detectors.h"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "distill_audit/status_macros.h"
#include "distill_audit/text_util.h"

namespace distill_audit {
namespace {

constexpr std::array<std::string_view, 10> kAllDetectors = {
    kTbd,        kGeneratedPerplexity, kGeneratedMinK, kGeneratedMeanProb,
    kPerplexity, kZlib,                kLowercase,     kMinK,
    kMinKPlusPlus, kNeighbor};

absl::Status EmptyGeneration(const GenerationTrace& trace) {
  return absl::InvalidArgumentError(
      StrCat(trace.question_id, ": no generated tokens"));
}

absl::Status CheckLimit(int64_t limit) {
  if (limit <= 0) {
    return absl::InvalidArgumentError(
        StrCat("token limit must be positive (got ", limit, ")"));
  }
  return absl::OkStatus();
}

std::span<const TokenProb> Leading(const GenerationTrace& trace,
                                   int64_t limit) {
  const size_t n = std::min<size_t>(trace.generated.size(),
                                    static_cast<size_t>(limit));
  return std::span<const TokenProb>(trace.generated).first(n);
}

// Logprobs of the input slots that carry one.
std::vector<double> ScoredLogprobs(const InputTrace& trace) {
  std::vector<double> out;
  out.reserve(trace.input_tokens.size());
  for (const InputToken& token : trace.input_tokens) {
    if (token.logprob.has_value()) out.push_back(*token.logprob);
  }
  return out;
}

absl::StatusOr<double> MeanNll(const InputTrace& trace) {
  const std::vector<double> logprobs = ScoredLogprobs(trace);
  if (logprobs.empty()) {
    return absl::InvalidArgumentError(
        StrCat(trace.question_id, ": input has no scored tokens"));
  }
  double total = 0.0;
  for (double lp : logprobs) total -= lp;
  return total / static_cast<double>(logprobs.size());
}

size_t SelectedCount(double k_percent, size_t n) {
  const auto selected = static_cast<size_t>(
      std::floor(k_percent * static_cast<double>(n) / 100.0));
  return std::clamp<size_t>(selected, 1, n);
}

// Mean of the SelectedCount(k, n) smallest values.
double MeanOfLowest(std::vector<double> values, double k_percent) {
  const size_t count = SelectedCount(k_percent, values.size());
  std::partial_sort(values.begin(), values.begin() + count, values.end());
  double total = 0.0;
  for (size_t i = 0; i < count; ++i) total += values[i];
  return total / static_cast<double>(count);
}

DetectorScore MakeScore(const std::string& question_id,
                        std::string_view detector, double score) {
  return DetectorScore{question_id, std::string(detector), score,
                       *DetectorOrientation(detector)};
}

}  // namespace

absl::Status ValidateTbdParams(const TbdParams& params) {
  if (!(params.tau > 0.0 && params.tau <= 1.0)) {
    return absl::InvalidArgumentError(
        StrCat("tau must be in (0, 1] (got ", params.tau, ")"));
  }
  if (!(params.alpha > 0.0) || !std::isfinite(params.alpha)) {
    return absl::InvalidArgumentError(
        StrCat("alpha must be positive (got ", params.alpha, ")"));
  }
  if (params.m <= 0) {
    return absl::InvalidArgumentError(
        StrCat("m must be positive (got ", params.m, ")"));
  }
  return absl::OkStatus();
}

absl::Status ValidateMinKParams(const MinKParams& params) {
  if (!(params.k_percent > 0.0 && params.k_percent <= 100.0)) {
    return absl::InvalidArgumentError(StrCat(
        "k_percent must be in (0, 100] (got ", params.k_percent, ")"));
  }
  if (params.limit.has_value()) return CheckLimit(*params.limit);
  return absl::OkStatus();
}

std::span<const std::string_view> AllDetectors() { return kAllDetectors; }

bool IsGenerationDetector(std::string_view detector) {
  return detector == kTbd || detector == kGeneratedPerplexity ||
         detector == kGeneratedMinK || detector == kGeneratedMeanProb;
}

absl::StatusOr<Orientation> DetectorOrientation(std::string_view detector) {
  if (detector == kTbd || detector == kGeneratedPerplexity ||
      detector == kPerplexity || detector == kZlib || detector == kLowercase ||
      detector == kNeighbor) {
    return Orientation::kMemberLow;
  }
  if (detector == kGeneratedMinK || detector == kGeneratedMeanProb ||
      detector == kMinK || detector == kMinKPlusPlus) {
    return Orientation::kMemberHigh;
  }
  return absl::NotFoundError(StrCat("unknown detector '", detector, "'"));
}

absl::StatusOr<DetectorScore> TbdScore(const GenerationTrace& trace,
                                       const TbdParams& params) {
  DA_RETURN_IF_ERROR(ValidateTbdParams(params));
  if (trace.generated.empty()) return EmptyGeneration(trace);
  double total = 0.0;
  int64_t outliers = 0;
  for (const TokenProb& token : Leading(trace, params.m)) {
    const double p = ProbOf(token);
    if (p < params.tau) {
      ++outliers;
      total += std::pow(params.tau - p, params.alpha);
    }
  }
  // A fully saturated prefix has no outliers; that is the strongest member
  // signal.
  const double score =
      outliers == 0 ? 0.0 : total / static_cast<double>(outliers);
  return MakeScore(trace.question_id, kTbd, score);
}

absl::StatusOr<DetectorScore> GeneratedPerplexity(const GenerationTrace& trace,
                                                  int64_t limit) {
  DA_RETURN_IF_ERROR(CheckLimit(limit));
  if (trace.generated.empty()) return EmptyGeneration(trace);
  const auto tokens = Leading(trace, limit);
  double nll = 0.0;
  for (const TokenProb& token : tokens) nll -= token.logprob;
  return MakeScore(trace.question_id, kGeneratedPerplexity,
                   std::exp(nll / static_cast<double>(tokens.size())));
}

absl::StatusOr<DetectorScore> GeneratedMinK(const GenerationTrace& trace,
                                            const MinKParams& params) {
  DA_RETURN_IF_ERROR(ValidateMinKParams(params));
  if (trace.generated.empty()) return EmptyGeneration(trace);
  std::vector<double> logprobs;
  for (const TokenProb& token :
       Leading(trace, params.limit.value_or(kDefaultGeneratedLimit))) {
    logprobs.push_back(token.logprob);
  }
  return MakeScore(trace.question_id, kGeneratedMinK,
                   MeanOfLowest(std::move(logprobs), params.k_percent));
}

absl::StatusOr<DetectorScore> GeneratedMeanProb(const GenerationTrace& trace,
                                                int64_t limit) {
  DA_RETURN_IF_ERROR(CheckLimit(limit));
  if (trace.generated.empty()) return EmptyGeneration(trace);
  const auto tokens = Leading(trace, limit);
  double total = 0.0;
  for (const TokenProb& token : tokens) total += ProbOf(token);
  return MakeScore(trace.question_id, kGeneratedMeanProb,
                   total / static_cast<double>(tokens.size()));
}

absl::StatusOr<DetectorScore> InputPerplexity(const InputTrace& trace) {
  DA_ASSIGN_OR_RETURN(double mean_nll, MeanNll(trace));
  return MakeScore(trace.question_id, kPerplexity, std::exp(mean_nll));
}

size_t ZlibCompressedSize(std::string_view text) {
  uLongf size = compressBound(static_cast<uLong>(text.size()));
  std::vector<Bytef> buffer(size);
  compress2(buffer.data(), &size, reinterpret_cast<const Bytef*>(text.data()),
            static_cast<uLong>(text.size()), kZlibLevel);
  return static_cast<size_t>(size);
}

absl::StatusOr<DetectorScore> ZlibScore(const InputTrace& trace) {
  if (trace.text.empty()) {
    return absl::InvalidArgumentError(
        StrCat(trace.question_id, ": zlib score needs non-empty text"));
  }
  double total_nll = 0.0;
  for (double lp : ScoredLogprobs(trace)) total_nll -= lp;
  return MakeScore(
      trace.question_id, kZlib,
      total_nll / static_cast<double>(ZlibCompressedSize(trace.text)));
}

absl::StatusOr<DetectorScore> LowercaseScore(const InputTrace& original,
                                             const InputTrace& lowered) {
  if (original.question_id != lowered.question_id ||
      lowered.text != Utf8Lowercase(original.text)) {
    return absl::InvalidArgumentError(StrCat(
        original.question_id,
        ": lowercased trace does not match the original text"));
  }
  DA_ASSIGN_OR_RETURN(double original_nll, MeanNll(original));
  DA_ASSIGN_OR_RETURN(double lowered_nll, MeanNll(lowered));
  return MakeScore(original.question_id, kLowercase,
                   std::exp(original_nll) / std::exp(lowered_nll));
}

absl::StatusOr<DetectorScore> MinKScore(const InputTrace& trace,
                                        const MinKParams& params) {
  DA_RETURN_IF_ERROR(ValidateMinKParams(params));
  std::vector<double> logprobs = ScoredLogprobs(trace);
  if (logprobs.empty()) {
    return absl::InvalidArgumentError(
        StrCat(trace.question_id, ": input has no scored tokens"));
  }
  return MakeScore(trace.question_id, kMinK,
                   MeanOfLowest(std::move(logprobs), params.k_percent));
}

absl::StatusOr<DetectorScore> MinKPlusPlusScore(const InputTrace& trace,
                                                const MinKParams& params) {
  DA_RETURN_IF_ERROR(ValidateMinKParams(params));
  if (!trace.vocab_stats.has_value()) {
    return absl::FailedPreconditionError(StrCat(
        trace.question_id, ": min_k_pp needs vocab_stats, which are absent"));
  }
  const auto& stats = *trace.vocab_stats;
  if (stats.size() != trace.input_tokens.size()) {
    return absl::InvalidArgumentError(
        StrCat(trace.question_id, ": vocab_stats length mismatch"));
  }
  std::vector<double> z;
  for (size_t i = 0; i < trace.input_tokens.size(); ++i) {
    const auto& logprob = trace.input_tokens[i].logprob;
    if (!logprob.has_value()) continue;
    z.push_back((*logprob - stats[i].mu) /
                std::max(stats[i].sigma, kMinKPlusPlusSigmaFloor));
  }
  if (z.empty()) {
    return absl::InvalidArgumentError(
        StrCat(trace.question_id, ": input has no scored tokens"));
  }
  return MakeScore(trace.question_id, kMinKPlusPlus,
                   MeanOfLowest(std::move(z), params.k_percent));
}

absl::StatusOr<DetectorScore> NeighborScore(
    const InputTrace& original, std::span<const InputTrace> neighbors) {
  if (neighbors.empty()) {
    return absl::InvalidArgumentError(
        StrCat(original.question_id, ": no neighbor traces"));
  }
  DA_ASSIGN_OR_RETURN(double original_nll, MeanNll(original));
  double neighbor_total = 0.0;
  for (const InputTrace& neighbor : neighbors) {
    DA_ASSIGN_OR_RETURN(double nll, MeanNll(neighbor));
    neighbor_total += nll;
  }
  return MakeScore(
      original.question_id, kNeighbor,
      original_nll - neighbor_total / static_cast<double>(neighbors.size()));
}

absl::StatusOr<double> NearDeterministicFraction(const GenerationTrace& trace,
                                                 double threshold,
                                                 int64_t limit) {
  DA_RETURN_IF_ERROR(CheckLimit(limit));
  if (trace.generated.empty()) return EmptyGeneration(trace);
  const auto tokens = Leading(trace, limit);
  size_t saturated = 0;
  for (const TokenProb& token : tokens) {
    if (ProbOf(token) >= threshold) ++saturated;
  }
  return static_cast<double>(saturated) / static_cast<double>(tokens.size());
}

nlohmann::ordered_json DetectorSpec::ParamsJson() const {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  if (detector == kTbd) {
    params["tau"] = tbd.tau;
    params["alpha"] = tbd.alpha;
    params["m"] = tbd.m;
  } else if (detector == kGeneratedPerplexity ||
             detector == kGeneratedMeanProb) {
    params["limit"] = limit;
  } else if (detector == kGeneratedMinK) {
    params["k_percent"] = min_k.k_percent;
    params["limit"] = min_k.limit.value_or(kDefaultGeneratedLimit);
  } else if (detector == kMinK || detector == kMinKPlusPlus) {
    params["k_percent"] = min_k.k_percent;
  } else if (detector == kZlib) {
    params["container"] = "zlib";
    params["level"] = kZlibLevel;
  }
  return params;
}

absl::Status ValidateDetectorSpec(const DetectorSpec& spec) {
  DA_RETURN_IF_ERROR(DetectorOrientation(spec.detector).status());
  DA_RETURN_IF_ERROR(ValidateTbdParams(spec.tbd));
  DA_RETURN_IF_ERROR(ValidateMinKParams(spec.min_k));
  return CheckLimit(spec.limit);
}

absl::StatusOr<DetectorScore> ScoreGeneration(const DetectorSpec& spec,
                                              const GenerationTrace& trace) {
  if (spec.detector == kTbd) return TbdScore(trace, spec.tbd);
  if (spec.detector == kGeneratedPerplexity) {
    return GeneratedPerplexity(trace, spec.limit);
  }
  if (spec.detector == kGeneratedMinK) return GeneratedMinK(trace, spec.min_k);
  if (spec.detector == kGeneratedMeanProb) {
    return GeneratedMeanProb(trace, spec.limit);
  }
  return absl::InvalidArgumentError(StrCat(
      "'", spec.detector, "' does not score generation traces"));
}

absl::StatusOr<DetectorScore> ScoreInputs(const DetectorSpec& spec,
                                          const InputBundle& bundle) {
  if (bundle.original == nullptr) {
    return absl::FailedPreconditionError(StrCat(
        spec.detector, " needs an original input trace, which is absent"));
  }
  const InputTrace& original = *bundle.original;
  if (spec.detector == kPerplexity) return InputPerplexity(original);
  if (spec.detector == kZlib) return ZlibScore(original);
  if (spec.detector == kMinK) return MinKScore(original, spec.min_k);
  if (spec.detector == kMinKPlusPlus) {
    return MinKPlusPlusScore(original, spec.min_k);
  }
  if (spec.detector == kLowercase) {
    if (bundle.lowercased == nullptr) {
      return absl::FailedPreconditionError(StrCat(
          original.question_id, ": lowercase needs a lowercased input trace"));
    }
    return LowercaseScore(original, *bundle.lowercased);
  }
  if (spec.detector == kNeighbor) {
    if (bundle.neighbors.empty()) {
      return absl::FailedPreconditionError(StrCat(
          original.question_id, ": neighbor needs neighbor input traces"));
    }
    return NeighborScore(original, bundle.neighbors);
  }
  return absl::InvalidArgumentError(
      StrCat("'", spec.detector, "' does not score input traces"));
}

}  // namespace distill_audit
