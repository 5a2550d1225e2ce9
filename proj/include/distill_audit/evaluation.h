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

#ifndef DISTILL_AUDIT_EVALUATION_H_
#define DISTILL_AUDIT_EVALUATION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distill_audit/trace.h"
#include "json.hpp"

namespace distill_audit {

// One operating point of the empirical ROC curve. Under member_low a
// question is called a member when score < threshold; under member_high
// when score > threshold. Thresholds include +/-infinity sentinels.
struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

// Mann-Whitney AUC with half credit for ties: under member_low,
// P(member < nonmember) + P(member == nonmember) / 2. O(N log N).
absl::StatusOr<double> Auc(std::span<const double> member_scores,
                           std::span<const double> nonmember_scores,
                           Orientation orientation);

// Exact empirical ROC curve, sorted by fpr then tpr, starting at (0, 0) and
// ending at (1, 1). Repeated operating points are collapsed.
absl::StatusOr<std::vector<RocPoint>> RocCurve(
    std::span<const double> member_scores,
    std::span<const double> nonmember_scores, Orientation orientation);

// Trapezoidal area under a curve produced by RocCurve.
double TrapezoidArea(std::span<const RocPoint> roc);

// Largest TPR over thresholds whose empirical FPR is at most `budget`.
absl::StatusOr<double> TprAtFpr(std::span<const double> member_scores,
                                std::span<const double> nonmember_scores,
                                Orientation orientation, double budget);

// Deterministic permutation of [0, n) for `seed` (Fisher-Yates over
// mt19937_64 with rejection sampling, identical on every platform).
std::vector<size_t> SeededPermutation(size_t n, uint64_t seed);

struct SplitResult {
  // Indices into the input list.
  std::vector<size_t> member_pool;
  std::vector<size_t> nonmember_pool;
  std::vector<size_t> eval_members;
  std::vector<size_t> eval_nonmembers;
};

// Shuffles `n` items with `seed`, puts the first floor(ratio * n) into the
// member (training) pool and the rest into the non-member pool, then draws
// a balanced evaluation set of `eval_size` per class (default: the smaller
// pool).
absl::StatusOr<SplitResult> BalancedSplit(
    size_t n, double ratio, uint64_t seed,
    std::optional<size_t> eval_size = std::nullopt);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int64_t member_count = 0;
  int64_t nonmember_count = 0;
};

inline constexpr int kHistogramBins = 50;

// Uniform bins over the joint score range.
std::vector<HistogramBin> ScoreHistogram(std::span<const double> member_scores,
                                         std::span<const double> nonmember_scores,
                                         int bins = kHistogramBins);

struct EvalSettings {
  std::vector<double> fpr_budgets = {0.01};
  int histogram_bins = kHistogramBins;
  // Run metadata copied into every report (config digest, seed, ...).
  nlohmann::ordered_json context = nlohmann::ordered_json::object();
};

struct EvalReport {
  std::string detector;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  Orientation orientation = Orientation::kMemberLow;
  double auc = 0.0;
  // (budget, tpr) in the order of EvalSettings::fpr_budgets.
  std::vector<std::pair<double, double>> tpr_at;
  std::vector<RocPoint> roc;
  std::vector<HistogramBin> histogram;
  int64_t n_members = 0;
  int64_t n_nonmembers = 0;
  std::string settings_digest;
  nlohmann::ordered_json context = nlohmann::ordered_json::object();
  std::vector<std::string> notes;
};

absl::StatusOr<EvalReport> Evaluate(std::string detector,
                                    nlohmann::ordered_json params,
                                    Orientation orientation,
                                    std::span<const double> member_scores,
                                    std::span<const double> nonmember_scores,
                                    const EvalSettings& settings);

// Groups scores by detector and evaluates each against `labels`. Every
// scored question must be labeled member or nonmember. `params` supplies
// per-detector parameters for the reports. Reports come back sorted by
// detector name.
absl::StatusOr<std::vector<EvalReport>> EvaluateScores(
    std::span<const DetectorScore> scores,
    const std::map<std::string, Label>& labels,
    const std::map<std::string, nlohmann::ordered_json>& params,
    const EvalSettings& settings);

nlohmann::ordered_json ReportToJson(const EvalReport& report);

// Flat CSV, one row per report. All reports must share the same budgets.
std::string ReportsCsvHeader(std::span<const double> budgets);
std::string ReportCsvRow(const EvalReport& report, std::string_view grid_param,
                         std::string_view grid_value);

// bin_lo,bin_hi,member_count,nonmember_count
std::string HistogramCsv(const EvalReport& report);

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_EVALUATION_H_
