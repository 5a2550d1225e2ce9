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

#include "distill_audit/simulator.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>

#include "distill_audit/status_macros.h"
#include "distill_audit/text_util.h"

namespace distill_audit {
namespace {

constexpr double kMinProb = 1e-12;

bool InUnit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

absl::Status ValidateSimParams(const SimParams& params) {
  if (params.n_tokens <= 0) {
    return absl::InvalidArgumentError("n_tokens must be positive");
  }
  if (!InUnit(params.member_sat) || !InUnit(params.nonmember_sat)) {
    return absl::InvalidArgumentError("saturation rates must be in [0, 1]");
  }
  if (!(params.sat_epsilon_scale > 0.0) ||
      !std::isfinite(params.sat_epsilon_scale)) {
    return absl::InvalidArgumentError("sat_epsilon_scale must be positive");
  }
  if (!(params.beta_a > 0.0) || !(params.beta_b > 0.0) ||
      !std::isfinite(params.beta_a) || !std::isfinite(params.beta_b)) {
    return absl::InvalidArgumentError("beta shape parameters must be positive");
  }
  if (!(params.drift >= 0.0) || !std::isfinite(params.drift)) {
    return absl::InvalidArgumentError("drift must be >= 0");
  }
  return absl::OkStatus();
}

nlohmann::ordered_json SimParamsToJson(const SimParams& params) {
  return nlohmann::ordered_json{
      {"n_tokens", params.n_tokens},
      {"member_sat", params.member_sat},
      {"nonmember_sat", params.nonmember_sat},
      {"sat_epsilon_scale", params.sat_epsilon_scale},
      {"beta_a", params.beta_a},
      {"beta_b", params.beta_b},
      {"drift", params.drift},
  };
}

absl::StatusOr<GenerationTrace> SimulateTrace(Label label,
                                              const SimParams& params,
                                              uint64_t seed) {
  DA_RETURN_IF_ERROR(ValidateSimParams(params));
  if (label == Label::kUnknown) {
    return absl::InvalidArgumentError("simulated traces need a label");
  }
  const bool member = label == Label::kMember;
  boost::random::mt19937_64 rng(seed);
  boost::random::exponential_distribution<double> epsilon(
      1.0 / params.sat_epsilon_scale);
  boost::random::beta_distribution<double> low(params.beta_a, params.beta_b);

  GenerationTrace trace;
  const std::string tag = member ? "m" : "n";
  trace.question_id = fmt::format("sim-{}-{:016x}", tag, seed);
  trace.question_text = StrCat("Synthetic ", LabelName(label),
                                     " question ", seed);
  trace.label = label;
  trace.model_id = "simulator";
  trace.decode.max_tokens = params.n_tokens;
  trace.generated.reserve(static_cast<size_t>(params.n_tokens));
  for (int64_t i = 0; i < params.n_tokens; ++i) {
    double rate = params.member_sat;
    if (!member) {
      const double decay = std::max(
          0.0, 1.0 - static_cast<double>(i) / static_cast<double>(kDriftHorizon));
      rate = std::clamp(params.nonmember_sat - params.drift * decay, 0.0, 1.0);
    }
    boost::random::bernoulli_distribution<double> saturated(rate);
    double p = saturated(rng) ? 1.0 - epsilon(rng) : low(rng);
    p = std::clamp(p, kMinProb, 1.0);
    p = static_cast<double>(static_cast<float>(p));
    trace.generated.push_back(
        TokenProb{StrCat("t", i), std::min(0.0, std::log(p))});
  }
  return trace;
}

uint64_t DatasetTraceSeed(uint64_t master_seed, uint64_t index) {
  uint64_t z = master_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

absl::StatusOr<std::vector<GenerationTrace>> SimulateDataset(
    int64_t n_members, int64_t n_nonmembers, const SimParams& params,
    uint64_t master_seed) {
  DA_RETURN_IF_ERROR(ValidateSimParams(params));
  if (n_members < 1 || n_nonmembers < 1) {
    return absl::InvalidArgumentError(
        "simulated datasets need at least one trace per class");
  }
  std::vector<GenerationTrace> traces;
  traces.reserve(static_cast<size_t>(n_members + n_nonmembers));
  for (int64_t i = 0; i < n_members + n_nonmembers; ++i) {
    const Label label = i < n_members ? Label::kMember : Label::kNonmember;
    DA_ASSIGN_OR_RETURN(
        GenerationTrace trace,
        SimulateTrace(label, params,
                      DatasetTraceSeed(master_seed, static_cast<uint64_t>(i))));
    traces.push_back(std::move(trace));
  }
  return traces;
}

}  // namespace distill_audit
