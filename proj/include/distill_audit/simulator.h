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

#ifndef DISTILL_AUDIT_SIMULATOR_H_
#define DISTILL_AUDIT_SIMULATOR_H_

#include <cstdint>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distill_audit/trace.h"
#include "json.hpp"

namespace distill_audit {

// Synthetic generator of member / non-member token-probability traces.
//
// Each position is independently near-deterministic with the label's
// saturation rate, else drawn from Beta(beta_a, beta_b). Near-deterministic
// probabilities are 1 - Exp(mean = sat_epsilon_scale). For non-members the
// saturation rate is lowered by `drift` at the first token, decaying
// linearly to zero at kDriftHorizon. Probabilities are clamped to (0, 1] and
// rounded to single precision, as serving stacks report them, so a
// probability of exactly 1 (logprob 0) can occur.
//
// Defaults are artifact choices, not calibrated to any real model.
struct SimParams {
  int64_t n_tokens = 400;
  double member_sat = 0.85;
  double nonmember_sat = 0.55;
  double sat_epsilon_scale = 0.002;
  double beta_a = 2.0;
  double beta_b = 2.0;
  double drift = 0.15;
};

inline constexpr int64_t kDriftHorizon = 300;

absl::Status ValidateSimParams(const SimParams& params);

nlohmann::ordered_json SimParamsToJson(const SimParams& params);

// Deterministic per (label, params, seed). `label` must be member or
// nonmember.
absl::StatusOr<GenerationTrace> SimulateTrace(Label label,
                                              const SimParams& params,
                                              uint64_t seed);

// Seed of the i-th trace of a dataset (SplitMix64 over a counter).
uint64_t DatasetTraceSeed(uint64_t master_seed, uint64_t index);

// n_members member traces followed by n_nonmembers non-member traces.
absl::StatusOr<std::vector<GenerationTrace>> SimulateDataset(
    int64_t n_members, int64_t n_nonmembers, const SimParams& params,
    uint64_t master_seed);

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_SIMULATOR_H_
