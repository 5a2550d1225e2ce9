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

#include "distill_audit/evaluation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "distill_audit/detectors.h"
#include "distill_audit/status_macros.h"
#include "distill_audit/text_util.h"

namespace distill_audit {
namespace {

using Json = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

absl::Status CheckScores(std::span<const double> member_scores,
                         std::span<const double> nonmember_scores) {
  if (member_scores.empty()) {
    return absl::InvalidArgumentError("no member scores");
  }
  if (nonmember_scores.empty()) {
    return absl::InvalidArgumentError("no non-member scores");
  }
  for (auto scores : {member_scores, nonmember_scores}) {
    for (double s : scores) {
      if (!std::isfinite(s)) {
        return absl::InvalidArgumentError(
            StrCat("non-finite score ", s));
      }
    }
  }
  return absl::OkStatus();
}

struct Labeled {
  double score;
  bool member;
};

std::vector<Labeled> SortedJoint(std::span<const double> member_scores,
                                 std::span<const double> nonmember_scores) {
  std::vector<Labeled> joint;
  joint.reserve(member_scores.size() + nonmember_scores.size());
  for (double s : member_scores) joint.push_back({s, true});
  for (double s : nonmember_scores) joint.push_back({s, false});
  std::sort(joint.begin(), joint.end(),
            [](const Labeled& a, const Labeled& b) { return a.score < b.score; });
  return joint;
}

std::string ThresholdString(double threshold) {
  if (threshold == kInf) return "inf";
  if (threshold == -kInf) return "-inf";
  return FormatDouble(threshold);
}

Json ThresholdJson(double threshold) {
  if (std::isinf(threshold)) return Json(ThresholdString(threshold));
  return Json(threshold);
}

std::string CsvQuote(std::string_view field) {
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

absl::StatusOr<double> Auc(std::span<const double> member_scores,
                           std::span<const double> nonmember_scores,
                           Orientation orientation) {
  DA_RETURN_IF_ERROR(CheckScores(member_scores, nonmember_scores));
  const std::vector<Labeled> joint =
      SortedJoint(member_scores, nonmember_scores);
  // Twice the midrank sum of members, kept integral.
  int64_t twice_member_ranks = 0;
  size_t start = 0;
  while (start < joint.size()) {
    size_t end = start;
    int64_t members_in_group = 0;
    while (end < joint.size() && joint[end].score == joint[start].score) {
      if (joint[end].member) ++members_in_group;
      ++end;
    }
    const auto twice_midrank = static_cast<int64_t>(start + end + 1);
    twice_member_ranks += members_in_group * twice_midrank;
    start = end;
  }
  const auto n_m = static_cast<int64_t>(member_scores.size());
  const auto n_n = static_cast<int64_t>(nonmember_scores.size());
  // Twice the Mann-Whitney U of the members (pairs with member > nonmember,
  // ties counted once).
  const int64_t twice_u = twice_member_ranks - n_m * (n_m + 1);
  const int64_t twice_pairs = 2 * n_m * n_n;
  const int64_t numerator =
      orientation == Orientation::kMemberHigh ? twice_u : twice_pairs - twice_u;
  return static_cast<double>(numerator) / static_cast<double>(twice_pairs);
}

absl::StatusOr<std::vector<RocPoint>> RocCurve(
    std::span<const double> member_scores,
    std::span<const double> nonmember_scores, Orientation orientation) {
  DA_RETURN_IF_ERROR(CheckScores(member_scores, nonmember_scores));
  std::vector<Labeled> joint = SortedJoint(member_scores, nonmember_scores);
  if (orientation == Orientation::kMemberHigh) {
    std::reverse(joint.begin(), joint.end());
  }
  const double n_m = static_cast<double>(member_scores.size());
  const double n_n = static_cast<double>(nonmember_scores.size());
  const double first_sentinel =
      orientation == Orientation::kMemberLow ? -kInf : kInf;
  const double last_sentinel = -first_sentinel;

  std::vector<RocPoint> roc;
  roc.push_back({first_sentinel, 0.0, 0.0});
  int64_t tp = 0;
  int64_t fp = 0;
  // Walking the scores in decision order, the threshold at each distinct
  // value admits everything strictly before it.
  size_t start = 0;
  while (start <= joint.size()) {
    const double threshold =
        start < joint.size() ? joint[start].score : last_sentinel;
    RocPoint point{threshold, static_cast<double>(fp) / n_n,
                   static_cast<double>(tp) / n_m};
    if (point.fpr != roc.back().fpr || point.tpr != roc.back().tpr) {
      roc.push_back(point);
    }
    if (start == joint.size()) break;
    size_t end = start;
    while (end < joint.size() && joint[end].score == joint[start].score) {
      joint[end].member ? ++tp : ++fp;
      ++end;
    }
    start = end;
  }
  return roc;
}

double TrapezoidArea(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

absl::StatusOr<double> TprAtFpr(std::span<const double> member_scores,
                                std::span<const double> nonmember_scores,
                                Orientation orientation, double budget) {
  if (!(budget >= 0.0 && budget <= 1.0)) {
    return absl::InvalidArgumentError(
        StrCat("FPR budget must be in [0, 1] (got ", budget, ")"));
  }
  DA_ASSIGN_OR_RETURN(std::vector<RocPoint> roc,
                      RocCurve(member_scores, nonmember_scores, orientation));
  double best = 0.0;
  for (const RocPoint& point : roc) {
    if (point.fpr <= budget) best = std::max(best, point.tpr);
  }
  return best;
}

std::vector<size_t> SeededPermutation(size_t n, uint64_t seed) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (size_t i = n; i > 1; --i) {
    // Unbiased draw from [0, i) by rejection.
    const uint64_t bound = i;
    const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                           std::numeric_limits<uint64_t>::max() % bound;
    uint64_t draw;
    do {
      draw = rng();
    } while (draw >= limit);
    std::swap(order[i - 1], order[draw % bound]);
  }
  return order;
}

absl::StatusOr<SplitResult> BalancedSplit(size_t n, double ratio,
                                          uint64_t seed,
                                          std::optional<size_t> eval_size) {
  if (n == 0) return absl::InvalidArgumentError("no questions to split");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    return absl::InvalidArgumentError(
        StrCat("split ratio must be in (0, 1) (got ", ratio, ")"));
  }
  const std::vector<size_t> order = SeededPermutation(n, seed);
  // The epsilon keeps products like 0.8 * 1000 from rounding down.
  const auto member_count = std::min<size_t>(
      n, static_cast<size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9)));
  SplitResult split;
  split.member_pool.assign(order.begin(), order.begin() + member_count);
  split.nonmember_pool.assign(order.begin() + member_count, order.end());
  const size_t smaller =
      std::min(split.member_pool.size(), split.nonmember_pool.size());
  const size_t wanted = eval_size.value_or(smaller);
  if (wanted == 0 || wanted > smaller) {
    return absl::InvalidArgumentError(StrCat(
        "pools of ", split.member_pool.size(), " and ",
        split.nonmember_pool.size(), " cannot supply ", wanted,
        " evaluation questions per class"));
  }
  split.eval_members.assign(split.member_pool.begin(),
                            split.member_pool.begin() + wanted);
  split.eval_nonmembers.assign(split.nonmember_pool.begin(),
                               split.nonmember_pool.begin() + wanted);
  return split;
}

std::vector<HistogramBin> ScoreHistogram(std::span<const double> member_scores,
                                         std::span<const double> nonmember_scores,
                                         int bins) {
  std::vector<HistogramBin> histogram;
  if (bins <= 0 || (member_scores.empty() && nonmember_scores.empty())) {
    return histogram;
  }
  double lo = kInf;
  double hi = -kInf;
  for (auto scores : {member_scores, nonmember_scores}) {
    for (double s : scores) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  const double width = (hi - lo) / bins;
  histogram.resize(bins);
  for (int i = 0; i < bins; ++i) {
    histogram[i].lo = lo + width * i;
    histogram[i].hi = i + 1 == bins ? hi : lo + width * (i + 1);
  }
  const auto bin_of = [&](double s) {
    if (width <= 0.0) return 0;
    return std::clamp(static_cast<int>(std::floor((s - lo) / width)), 0,
                      bins - 1);
  };
  for (double s : member_scores) ++histogram[bin_of(s)].member_count;
  for (double s : nonmember_scores) ++histogram[bin_of(s)].nonmember_count;
  return histogram;
}

absl::StatusOr<EvalReport> Evaluate(std::string detector, Json params,
                                    Orientation orientation,
                                    std::span<const double> member_scores,
                                    std::span<const double> nonmember_scores,
                                    const EvalSettings& settings) {
  EvalReport report;
  report.detector = std::move(detector);
  report.params = std::move(params);
  report.orientation = orientation;
  report.context = settings.context;
  DA_ASSIGN_OR_RETURN(report.auc,
                      Auc(member_scores, nonmember_scores, orientation));
  DA_ASSIGN_OR_RETURN(report.roc,
                      RocCurve(member_scores, nonmember_scores, orientation));
  for (double budget : settings.fpr_budgets) {
    DA_ASSIGN_OR_RETURN(double tpr, TprAtFpr(member_scores, nonmember_scores,
                                             orientation, budget));
    report.tpr_at.emplace_back(budget, tpr);
    if (budget > 0.0 &&
        static_cast<double>(nonmember_scores.size()) * budget < 1.0) {
      report.notes.push_back(StrCat(
          "n_nonmembers=", nonmember_scores.size(), " < 1/", budget,
          ": the admissible empirical FPR at this budget is 0"));
    }
  }
  report.histogram = ScoreHistogram(member_scores, nonmember_scores,
                                    settings.histogram_bins);
  report.n_members = static_cast<int64_t>(member_scores.size());
  report.n_nonmembers = static_cast<int64_t>(nonmember_scores.size());
  if (report.detector == kZlib) {
    report.notes.push_back(
        "zlib score = total NLL / compressed bytes (DEFLATE, zlib container, "
        "level 6)");
  }

  Json settings_json = Json::object();
  settings_json["detector"] = report.detector;
  settings_json["params"] = report.params;
  settings_json["orientation"] = OrientationName(orientation);
  settings_json["fpr_budgets"] = settings.fpr_budgets;
  settings_json["histogram_bins"] = settings.histogram_bins;
  settings_json["threshold_rule"] =
      "strict: score < lambda => member (member_low), score > lambda => "
      "member (member_high)";
  settings_json["tpr_rule"] = "max empirical TPR with empirical FPR <= budget";
  settings_json["tie_rule"] = "mann-whitney half credit";
  settings_json["context"] = settings.context;
  report.settings_digest = Sha256Hex(settings_json.dump());
  return report;
}

absl::StatusOr<std::vector<EvalReport>> EvaluateScores(
    std::span<const DetectorScore> scores,
    const std::map<std::string, Label>& labels,
    const std::map<std::string, Json>& params, const EvalSettings& settings) {
  struct Split {
    std::vector<double> members;
    std::vector<double> nonmembers;
    Orientation orientation = Orientation::kMemberLow;
  };
  std::map<std::string, Split> by_detector;
  std::set<std::string> unlabeled;
  for (const DetectorScore& score : scores) {
    auto it = labels.find(score.question_id);
    if (it == labels.end() || it->second == Label::kUnknown) {
      unlabeled.insert(score.question_id);
      continue;
    }
    Split& split = by_detector[score.detector];
    split.orientation = score.orientation;
    (it->second == Label::kMember ? split.members : split.nonmembers)
        .push_back(score.score);
  }
  if (!unlabeled.empty()) {
    std::string ids;
    for (const std::string& id : unlabeled) {
      StrAppend(ids, ids.empty() ? "" : ", ", id);
    }
    return absl::InvalidArgumentError(
        StrCat("no member/nonmember label for question_ids: ", ids));
  }
  std::vector<EvalReport> reports;
  for (auto& [detector, split] : by_detector) {
    auto p = params.find(detector);
    absl::StatusOr<EvalReport> report =
        Evaluate(detector, p == params.end() ? Json::object() : p->second,
                 split.orientation, split.members, split.nonmembers, settings);
    if (!report.ok()) {
      return absl::InvalidArgumentError(
          StrCat(detector, ": ", report.status().message()));
    }
    reports.push_back(*std::move(report));
  }
  return reports;
}

Json ReportToJson(const EvalReport& report) {
  Json out = Json::object();
  out["detector"] = report.detector;
  out["params"] = report.params;
  out["orientation"] = OrientationName(report.orientation);
  out["auc"] = report.auc;
  Json tpr_at = Json::array();
  for (const auto& [budget, tpr] : report.tpr_at) {
    tpr_at.push_back(Json{{"fpr", budget}, {"tpr", tpr}});
  }
  out["tpr_at_fpr"] = std::move(tpr_at);
  out["n_members"] = report.n_members;
  out["n_nonmembers"] = report.n_nonmembers;
  out["settings_digest"] = report.settings_digest;
  out["context"] = report.context;
  out["notes"] = report.notes;
  Json roc = Json::array();
  for (const RocPoint& point : report.roc) {
    roc.push_back(Json{{"threshold", ThresholdJson(point.threshold)},
                       {"fpr", point.fpr},
                       {"tpr", point.tpr}});
  }
  out["roc"] = std::move(roc);
  Json histogram = Json::array();
  for (const HistogramBin& bin : report.histogram) {
    histogram.push_back(Json{{"bin_lo", bin.lo},
                             {"bin_hi", bin.hi},
                             {"member_count", bin.member_count},
                             {"nonmember_count", bin.nonmember_count}});
  }
  out["histogram"] = std::move(histogram);
  return out;
}

std::string ReportsCsvHeader(std::span<const double> budgets) {
  std::string header =
      "detector,params,grid_param,grid_value,orientation,n_members,"
      "n_nonmembers,auc";
  for (double budget : budgets) {
    StrAppend(header, ",tpr_at_fpr_", FormatDouble(budget));
  }
  StrAppend(header, ",settings_digest\n");
  return header;
}

std::string ReportCsvRow(const EvalReport& report, std::string_view grid_param,
                         std::string_view grid_value) {
  std::string row = StrCat(
      report.detector, ",", CsvQuote(report.params.dump()), ",", grid_param,
      ",", grid_value, ",", OrientationName(report.orientation), ",",
      report.n_members, ",", report.n_nonmembers, ",", FormatDouble(report.auc));
  for (const auto& [budget, tpr] : report.tpr_at) {
    StrAppend(row, ",", FormatDouble(tpr));
  }
  StrAppend(row, ",", report.settings_digest, "\n");
  return row;
}

std::string HistogramCsv(const EvalReport& report) {
  std::string out = "bin_lo,bin_hi,member_count,nonmember_count\n";
  for (const HistogramBin& bin : report.histogram) {
    StrAppend(out, FormatDouble(bin.lo), ",", FormatDouble(bin.hi), ",",
                    bin.member_count, ",", bin.nonmember_count, "\n");
  }
  return out;
}

}  // namespace distill_audit
