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

#ifndef DISTILL_AUDIT_SWEEP_H_
#define DISTILL_AUDIT_SWEEP_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distill_audit/detectors.h"
#include "distill_audit/evaluation.h"
#include "distill_audit/trace.h"

namespace distill_audit {

// A one-dimensional grid over one detector parameter: "alpha", "m", "tau",
// "k" (Min-K percentage) or "limit".
struct SweepGrid {
  std::string parameter;
  std::vector<double> values;
};

// Default grids: m = 50..1000 step 50, alpha = 0.1..1.5 step 0.1,
// tau = 0.1..1.0 step 0.1, k = {5, 10, 20, ..., 100}, limit = m's grid.
absl::StatusOr<SweepGrid> DefaultGrid(std::string_view parameter);

// Parses "start:stop:step" (inclusive) or a comma-separated list.
absl::StatusOr<std::vector<double>> ParseGridValues(std::string_view text);

// Applies `value` of `parameter` to a copy of `base`.
absl::StatusOr<DetectorSpec> ApplyGridValue(const DetectorSpec& base,
                                            std::string_view parameter,
                                            double value);

struct SweepPoint {
  std::string name;
  std::string parameter;
  double value = 0.0;
  DetectorSpec spec;
  std::optional<EvalReport> report;
  // Set when the point could not be evaluated.
  std::string failure;
  // Traces skipped while scoring (question_id: reason).
  std::vector<std::string> skipped;
};

// Scores labeled generation traces with `spec` and evaluates them. Traces
// the detector cannot score are skipped and listed in the point.
SweepPoint EvaluatePoint(std::span<const GenerationTrace> traces,
                         const DetectorSpec& spec, const EvalSettings& settings,
                         std::string name = "", std::string parameter = "",
                         double value = 0.0);

// One point per grid value, in grid order; evaluation runs in parallel over
// points. Per-point failures are recorded in the point, not returned.
absl::StatusOr<std::vector<SweepPoint>> Sweep(
    std::span<const GenerationTrace> traces, const DetectorSpec& base,
    const SweepGrid& grid, const EvalSettings& settings);

// The component ablation: mean probability over the first 1000 tokens,
// mean probability over the first 300, deviation with alpha = 1, and
// deviation with alpha = 0.6 (all with tau = 1).
std::vector<SweepPoint> AblationSweep(std::span<const GenerationTrace> traces,
                                      const EvalSettings& settings);

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_SWEEP_H_
