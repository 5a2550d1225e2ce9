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

#include "distill_audit/sweep.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <utility>

#include "distill_audit/parallel.h"
#include "distill_audit/status_macros.h"
#include "distill_audit/text_util.h"

namespace distill_audit {
namespace {

std::vector<double> Range(double start, double stop, double step) {
  std::vector<double> values;
  const auto count = static_cast<int64_t>(std::floor((stop - start) / step + 1e-9));
  for (int64_t i = 0; i <= count; ++i) {
    // Rounded to 12 significant decimals so 0.1 * 3 prints as 0.3.
    const double v = start + step * static_cast<double>(i);
    values.push_back(std::round(v * 1e12) / 1e12);
  }
  return values;
}

std::string_view Strip(std::string_view s) {
  const size_t first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

std::vector<std::string_view> Split(std::string_view s, char delimiter) {
  std::vector<std::string_view> parts;
  size_t start = 0;
  while (true) {
    const size_t end = s.find(delimiter, start);
    parts.push_back(s.substr(start, end - start));
    if (end == std::string_view::npos) return parts;
    start = end + 1;
  }
}

bool IsPositiveInteger(double value) {
  return value >= 1.0 && std::floor(value) == value && value < 1e15;
}

}  // namespace

absl::StatusOr<SweepGrid> DefaultGrid(std::string_view parameter) {
  if (parameter == "m" || parameter == "limit") {
    return SweepGrid{std::string(parameter), Range(50, 1000, 50)};
  }
  if (parameter == "alpha") return SweepGrid{"alpha", Range(0.1, 1.5, 0.1)};
  if (parameter == "tau") return SweepGrid{"tau", Range(0.1, 1.0, 0.1)};
  if (parameter == "k") {
    return SweepGrid{"k", {5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100}};
  }
  return absl::InvalidArgumentError(
      StrCat("unknown sweep parameter '", parameter, "'"));
}

absl::StatusOr<std::vector<double>> ParseGridValues(std::string_view text) {
  text = Strip(text);
  if (text.empty()) return absl::InvalidArgumentError("empty grid");
  const auto parse = [](std::string_view s) -> absl::StatusOr<double> {
    s = Strip(s);
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
      return absl::InvalidArgumentError(
          StrCat("malformed grid value '", s, "'"));
    }
    return v;
  };
  if (text.find(':') != std::string_view::npos) {
    std::vector<std::string_view> parts = Split(text, ':');
    if (parts.size() != 3) {
      return absl::InvalidArgumentError(
          StrCat("grid range must be start:stop:step (got '", text, "')"));
    }
    DA_ASSIGN_OR_RETURN(double start, parse(parts[0]));
    DA_ASSIGN_OR_RETURN(double stop, parse(parts[1]));
    DA_ASSIGN_OR_RETURN(double step, parse(parts[2]));
    if (!(step > 0.0) || stop < start) {
      return absl::InvalidArgumentError(
          StrCat("grid range '", text, "' is empty"));
    }
    if ((stop - start) / step > 1e6) {
      return absl::InvalidArgumentError("grid range has too many points");
    }
    return Range(start, stop, step);
  }
  std::vector<double> values;
  for (std::string_view part : Split(text, ',')) {
    DA_ASSIGN_OR_RETURN(double v, parse(part));
    values.push_back(v);
  }
  return values;
}

absl::StatusOr<DetectorSpec> ApplyGridValue(const DetectorSpec& base,
                                            std::string_view parameter,
                                            double value) {
  DetectorSpec spec = base;
  if (parameter == "alpha") {
    spec.tbd.alpha = value;
  } else if (parameter == "tau") {
    spec.tbd.tau = value;
  } else if (parameter == "m") {
    if (!IsPositiveInteger(value)) {
      return absl::InvalidArgumentError(
          StrCat("m must be a positive integer (got ", value, ")"));
    }
    spec.tbd.m = static_cast<int64_t>(value);
  } else if (parameter == "k") {
    spec.min_k.k_percent = value;
  } else if (parameter == "limit") {
    if (!IsPositiveInteger(value)) {
      return absl::InvalidArgumentError(
          StrCat("limit must be a positive integer (got ", value, ")"));
    }
    spec.limit = static_cast<int64_t>(value);
    spec.min_k.limit = static_cast<int64_t>(value);
  } else {
    return absl::InvalidArgumentError(
        StrCat("unknown sweep parameter '", parameter, "'"));
  }
  DA_RETURN_IF_ERROR(ValidateDetectorSpec(spec));
  return spec;
}

SweepPoint EvaluatePoint(std::span<const GenerationTrace> traces,
                         const DetectorSpec& spec, const EvalSettings& settings,
                         std::string name, std::string parameter,
                         double value) {
  SweepPoint point;
  point.name = name.empty() ? spec.detector : std::move(name);
  point.parameter = std::move(parameter);
  point.value = value;
  point.spec = spec;
  std::vector<double> members;
  std::vector<double> nonmembers;
  for (const GenerationTrace& trace : traces) {
    absl::StatusOr<DetectorScore> score = ScoreGeneration(spec, trace);
    if (!score.ok()) {
      point.skipped.push_back(std::string(score.status().message()));
      continue;
    }
    if (trace.label == Label::kMember) {
      members.push_back(score->score);
    } else if (trace.label == Label::kNonmember) {
      nonmembers.push_back(score->score);
    }
  }
  absl::StatusOr<Orientation> orientation = DetectorOrientation(spec.detector);
  if (!orientation.ok()) {
    point.failure = std::string(orientation.status().message());
    return point;
  }
  absl::StatusOr<EvalReport> report = Evaluate(
      spec.detector, spec.ParamsJson(), *orientation, members, nonmembers,
      settings);
  if (!report.ok()) {
    point.failure = std::string(report.status().message());
    return point;
  }
  point.report = *std::move(report);
  return point;
}

absl::StatusOr<std::vector<SweepPoint>> Sweep(
    std::span<const GenerationTrace> traces, const DetectorSpec& base,
    const SweepGrid& grid, const EvalSettings& settings) {
  if (!IsGenerationDetector(base.detector)) {
    return absl::InvalidArgumentError(StrCat(
        "sweeps run over generation detectors; got '", base.detector, "'"));
  }
  if (grid.values.empty()) return absl::InvalidArgumentError("empty grid");
  for (const GenerationTrace& trace : traces) {
    if (trace.label == Label::kUnknown) {
      return absl::InvalidArgumentError(StrCat(
          "trace '", trace.question_id, "' has no member/nonmember label"));
    }
  }
  std::vector<SweepPoint> points(grid.values.size());
  DA_RETURN_IF_ERROR(DefaultGrid(grid.parameter).status());
  std::vector<absl::StatusOr<DetectorSpec>> specs;
  for (double value : grid.values) {
    specs.push_back(ApplyGridValue(base, grid.parameter, value));
  }
  ParallelFor(points.size(), [&](size_t i) {
    const double value = grid.values[i];
    const std::string name = StrCat(base.detector, "@", grid.parameter,
                                          "=", FormatDouble(value));
    if (!specs[i].ok()) {
      points[i].name = name;
      points[i].parameter = grid.parameter;
      points[i].value = value;
      points[i].spec = base;
      points[i].failure = std::string(specs[i].status().message());
      return;
    }
    points[i] = EvaluatePoint(traces, *specs[i], settings, name, grid.parameter,
                              value);
  });
  return points;
}

std::vector<SweepPoint> AblationSweep(std::span<const GenerationTrace> traces,
                                      const EvalSettings& settings) {
  DetectorSpec full_mean;
  full_mean.detector = std::string(kGeneratedMeanProb);
  full_mean.limit = 1000;
  DetectorSpec truncated_mean = full_mean;
  truncated_mean.limit = 300;
  DetectorSpec deviation;
  deviation.detector = std::string(kTbd);
  deviation.tbd = TbdParams{.tau = 1.0, .alpha = 1.0, .m = 300};
  DetectorSpec deviation_alpha = deviation;
  deviation_alpha.tbd.alpha = 0.6;

  const std::vector<std::pair<std::string, DetectorSpec>> rows = {
      {"mean_prob_first_1000", full_mean},
      {"mean_prob_m300", truncated_mean},
      {"deviation_m300_alpha1", deviation},
      {"deviation_m300_alpha0.6", deviation_alpha},
  };
  std::vector<SweepPoint> points(rows.size());
  ParallelFor(rows.size(), [&](size_t i) {
    points[i] = EvaluatePoint(traces, rows[i].second, settings, rows[i].first,
                              "ablation", static_cast<double>(i));
  });
  return points;
}

}  // namespace distill_audit
