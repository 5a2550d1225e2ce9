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

#include "cli.h"

#include <charconv>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distill_audit/detectors.h"
#include "distill_audit/evaluation.h"
#include "distill_audit/parallel.h"
#include "distill_audit/simulator.h"
#include "distill_audit/status_macros.h"
#include "distill_audit/sweep.h"
#include "distill_audit/text_util.h"
#include "distill_audit/trace.h"
#include "distill_audit/trace_file.h"

namespace distill_audit::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Exit codes follow the status code: InvalidArgument is a usage or config
// problem, Unimplemented an endpoint capability problem, and everything
// else a data problem. Data-stage callers rewrap InvalidArgument.
int ExitCodeFor(const absl::Status& status) {
  if (status.ok()) return kExitOk;
  if (absl::IsInvalidArgument(status)) return kExitUsage;
  if (absl::IsUnimplemented(status)) return kExitCapability;
  return kExitData;
}

absl::Status DataError(const absl::Status& status) {
  if (!absl::IsInvalidArgument(status)) return status;
  return absl::FailedPreconditionError(status.message());
}

template <typename T>
absl::StatusOr<T> AsData(absl::StatusOr<T> value) {
  if (!value.ok()) return DataError(value.status());
  return value;
}

std::vector<std::string_view> SplitOn(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  size_t start = 0;
  while (true) {
    const size_t end = text.find(sep, start);
    parts.push_back(text.substr(start, end - start));
    if (end == std::string_view::npos) return parts;
    start = end + 1;
  }
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

// --- Files -----------------------------------------------------------------

absl::StatusOr<std::string> ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(StrCat("cannot read ", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

absl::Status WriteFile(const fs::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.close();
  if (!out) return absl::InternalError(StrCat("cannot write ", path.string()));
  return absl::OkStatus();
}

std::string JsonText(const Json& json) { return json.dump(2) + "\n"; }

// File name fragment made of [A-Za-z0-9._-].
std::string SafeName(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
                    c == '_' || c == '-';
    out += ok ? c : '_';
  }
  return out;
}

// Parses a JSONL file, calling `fn` with (1-based line, object).
absl::Status ForEachJsonLine(
    const fs::path& path,
    const std::function<absl::Status(int, const Json&)>& fn) {
  DA_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (Trim(line).empty()) continue;
    Json object = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (object.is_discarded() || !object.is_object()) {
      return absl::FailedPreconditionError(StrCat(
          path.string(), " line ", number, ": not a JSON object"));
    }
    absl::Status status = fn(number, object);
    if (!status.ok()) {
      return absl::FailedPreconditionError(
          StrCat(path.string(), " line ", number, ": ", status.message()));
    }
  }
  return absl::OkStatus();
}

// --- Config ----------------------------------------------------------------

absl::Status MergeInto(Json& base, const Json& patch, const std::string& path) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : StrCat(path, ".", it.key());
    auto found = base.find(it.key());
    if (found == base.end()) {
      return absl::InvalidArgumentError(StrCat("unknown config field '", key, "'"));
    }
    if (found->is_object()) {
      if (!it->is_object()) {
        return absl::InvalidArgumentError(
            StrCat("config field '", key, "' must be an object"));
      }
      DA_RETURN_IF_ERROR(MergeInto(*found, *it, key));
    } else {
      *found = *it;
    }
  }
  return absl::OkStatus();
}

class ConfigReader {
 public:
  explicit ConfigReader(const Json& root) : root_(root) {}

  const Json& At(std::string_view key) const {
    const Json* node = &root_;
    for (std::string_view part : SplitOn(key, '.')) {
      node = &node->at(std::string(part));
    }
    return *node;
  }

  absl::StatusOr<std::string> String(std::string_view key) const {
    const Json& node = At(key);
    if (!node.is_string()) return TypeError(key, "a string");
    return node.get<std::string>();
  }
  absl::StatusOr<double> Double(std::string_view key) const {
    const Json& node = At(key);
    if (!node.is_number()) return TypeError(key, "a number");
    return node.get<double>();
  }
  absl::StatusOr<std::optional<double>> OptionalDouble(std::string_view key) const {
    if (At(key).is_null()) return std::optional<double>();
    DA_ASSIGN_OR_RETURN(double value, Double(key));
    return std::optional<double>(value);
  }
  absl::StatusOr<int64_t> Int(std::string_view key) const {
    const Json& node = At(key);
    if (!node.is_number_integer()) return TypeError(key, "an integer");
    return node.get<int64_t>();
  }
  absl::StatusOr<std::optional<int64_t>> OptionalInt(std::string_view key) const {
    if (At(key).is_null()) return std::optional<int64_t>();
    DA_ASSIGN_OR_RETURN(int64_t value, Int(key));
    return std::optional<int64_t>(value);
  }
  absl::StatusOr<uint64_t> Uint(std::string_view key) const {
    const Json& node = At(key);
    if (node.is_number_unsigned()) return node.get<uint64_t>();
    if (node.is_number_integer() && node.get<int64_t>() >= 0) {
      return static_cast<uint64_t>(node.get<int64_t>());
    }
    return TypeError(key, "a non-negative integer");
  }
  absl::StatusOr<bool> Bool(std::string_view key) const {
    const Json& node = At(key);
    if (!node.is_boolean()) return TypeError(key, "true or false");
    return node.get<bool>();
  }
  absl::StatusOr<std::vector<std::string>> Strings(std::string_view key) const {
    const Json& node = At(key);
    if (!node.is_array()) return TypeError(key, "a list of strings");
    std::vector<std::string> out;
    for (const Json& item : node) {
      if (!item.is_string()) return TypeError(key, "a list of strings");
      out.push_back(item.get<std::string>());
    }
    return out;
  }
  absl::StatusOr<std::vector<double>> Doubles(std::string_view key) const {
    const Json& node = At(key);
    if (!node.is_array()) return TypeError(key, "a list of numbers");
    std::vector<double> out;
    for (const Json& item : node) {
      if (!item.is_number()) return TypeError(key, "a list of numbers");
      out.push_back(item.get<double>());
    }
    return out;
  }

 private:
  static absl::Status TypeError(std::string_view key, std::string_view expected) {
    return absl::InvalidArgumentError(
        StrCat("config field '", key, "' must be ", expected));
  }

  const Json& root_;
};

struct AuditConfig {
  Json effective;
  uint64_t seed = 0;
  fs::path output_dir;
  std::optional<fs::path> cache_dir;
  ModelEndpoint endpoint;
  DecodeParams decode;
  std::string questions;
  std::optional<double> split_ratio;
  bool fetch_inputs = false;
  bool fetch_lowercased = false;
  std::vector<std::string> traces;
  std::vector<std::string> detectors;
  DetectorSpec base;
  std::string scores;
  std::string labels;
  EvalSettings eval;
  bool balanced = false;
  std::string sweep_detector;
  std::string sweep_parameter;
  std::string sweep_grid;
  std::string sweep_preset;
  SimParams sim;
  int64_t n_members = 0;
  int64_t n_nonmembers = 0;
  fs::path run_dir;
};

absl::StatusOr<AuditConfig> ParseConfig(Json effective) {
  AuditConfig config;
  const ConfigReader r(effective);
  DA_ASSIGN_OR_RETURN(config.seed, r.Uint("seed"));
  DA_ASSIGN_OR_RETURN(std::string output_dir, r.String("output_dir"));
  if (output_dir.empty()) return absl::InvalidArgumentError("output_dir is empty");
  config.output_dir = output_dir;
  DA_ASSIGN_OR_RETURN(std::string cache_dir, r.String("cache_dir"));
  if (!cache_dir.empty()) config.cache_dir = cache_dir;

  DA_ASSIGN_OR_RETURN(config.endpoint.base_url, r.String("endpoint.base_url"));
  DA_ASSIGN_OR_RETURN(config.endpoint.model_id, r.String("endpoint.model_id"));
  DA_ASSIGN_OR_RETURN(int64_t timeout_ms, r.Int("endpoint.timeout_ms"));
  config.endpoint.timeout = std::chrono::milliseconds(timeout_ms);
  DA_ASSIGN_OR_RETURN(int64_t max_parallel, r.Int("endpoint.max_parallel"));
  config.endpoint.max_parallel = static_cast<int>(max_parallel);
  DA_ASSIGN_OR_RETURN(int64_t attempts, r.Int("endpoint.max_attempts"));
  config.endpoint.retry.max_attempts = static_cast<int>(attempts);
  DA_ASSIGN_OR_RETURN(int64_t backoff_ms, r.Int("endpoint.backoff_ms"));
  config.endpoint.retry.backoff_base = std::chrono::milliseconds(backoff_ms);

  DA_ASSIGN_OR_RETURN(config.decode.max_tokens, r.Int("decode.max_tokens"));
  DA_ASSIGN_OR_RETURN(config.decode.system_prompt, r.String("decode.system_prompt"));
  DA_RETURN_IF_ERROR(ValidateDecodeParams(config.decode));

  DA_ASSIGN_OR_RETURN(config.questions, r.String("questions"));
  DA_ASSIGN_OR_RETURN(config.split_ratio, r.OptionalDouble("split_ratio"));
  DA_ASSIGN_OR_RETURN(config.fetch_inputs, r.Bool("fetch_inputs"));
  DA_ASSIGN_OR_RETURN(config.fetch_lowercased, r.Bool("fetch_lowercased"));
  DA_ASSIGN_OR_RETURN(config.traces, r.Strings("traces"));
  DA_ASSIGN_OR_RETURN(config.detectors, r.Strings("detectors"));
  for (const std::string& detector : config.detectors) {
    if (!DetectorOrientation(detector).ok()) {
      return absl::InvalidArgumentError(StrCat("unknown detector '", detector, "'"));
    }
  }

  DA_ASSIGN_OR_RETURN(config.base.tbd.tau, r.Double("tbd.tau"));
  DA_ASSIGN_OR_RETURN(config.base.tbd.alpha, r.Double("tbd.alpha"));
  DA_ASSIGN_OR_RETURN(config.base.tbd.m, r.Int("tbd.m"));
  DA_RETURN_IF_ERROR(ValidateTbdParams(config.base.tbd));
  DA_ASSIGN_OR_RETURN(config.base.min_k.k_percent, r.Double("min_k.k_percent"));
  DA_ASSIGN_OR_RETURN(config.base.min_k.limit, r.OptionalInt("min_k.limit"));
  DA_RETURN_IF_ERROR(ValidateMinKParams(config.base.min_k));
  DA_ASSIGN_OR_RETURN(config.base.limit, r.Int("limit"));
  if (config.base.limit < 1) return absl::InvalidArgumentError("limit must be >= 1");

  DA_ASSIGN_OR_RETURN(config.scores, r.String("scores"));
  DA_ASSIGN_OR_RETURN(config.labels, r.String("labels"));
  DA_ASSIGN_OR_RETURN(config.eval.fpr_budgets, r.Doubles("eval.fpr_budgets"));
  for (double budget : config.eval.fpr_budgets) {
    if (!(budget >= 0.0 && budget <= 1.0)) {
      return absl::InvalidArgumentError(
          StrCat("FPR budget ", budget, " is outside [0, 1]"));
    }
  }
  DA_ASSIGN_OR_RETURN(int64_t bins, r.Int("eval.histogram_bins"));
  if (bins < 1 || bins > 100000) {
    return absl::InvalidArgumentError("eval.histogram_bins must be in [1, 100000]");
  }
  config.eval.histogram_bins = static_cast<int>(bins);
  DA_ASSIGN_OR_RETURN(config.balanced, r.Bool("eval.balanced"));

  DA_ASSIGN_OR_RETURN(config.sweep_detector, r.String("sweep.detector"));
  DA_ASSIGN_OR_RETURN(config.sweep_parameter, r.String("sweep.parameter"));
  DA_ASSIGN_OR_RETURN(config.sweep_grid, r.String("sweep.grid"));
  DA_ASSIGN_OR_RETURN(config.sweep_preset, r.String("sweep.preset"));

  DA_ASSIGN_OR_RETURN(config.n_members, r.Int("simulator.n_members"));
  DA_ASSIGN_OR_RETURN(config.n_nonmembers, r.Int("simulator.n_nonmembers"));
  DA_ASSIGN_OR_RETURN(config.sim.n_tokens, r.Int("simulator.n_tokens"));
  DA_ASSIGN_OR_RETURN(config.sim.member_sat, r.Double("simulator.member_sat"));
  DA_ASSIGN_OR_RETURN(config.sim.nonmember_sat, r.Double("simulator.nonmember_sat"));
  DA_ASSIGN_OR_RETURN(config.sim.sat_epsilon_scale,
                      r.Double("simulator.sat_epsilon_scale"));
  DA_ASSIGN_OR_RETURN(config.sim.beta_a, r.Double("simulator.beta_a"));
  DA_ASSIGN_OR_RETURN(config.sim.beta_b, r.Double("simulator.beta_b"));
  DA_ASSIGN_OR_RETURN(config.sim.drift, r.Double("simulator.drift"));

  DA_ASSIGN_OR_RETURN(std::string run_dir, r.String("run_dir"));
  config.run_dir = run_dir.empty() ? config.output_dir : fs::path(run_dir);
  config.effective = std::move(effective);
  return config;
}

// Converts flag text to the JSON type of the field's default value.
absl::StatusOr<Json> FlagValue(const Json& default_value,
                               const std::vector<std::string>& values,
                               std::string_view key) {
  const auto bad = [&](std::string_view text, std::string_view expected) {
    return absl::InvalidArgumentError(
        StrCat("flag for '", key, "': '", text, "' is not ", expected));
  };
  const auto parse_double = [&](std::string_view text) -> absl::StatusOr<double> {
    text = Trim(text);
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) {
      return bad(text, "a number");
    }
    return value;
  };
  if (default_value.is_array()) {
    const bool numeric = key == "eval.fpr_budgets";
    Json out = Json::array();
    for (const std::string& value : values) {
      for (std::string_view part : SplitOn(value, ',')) {
        part = Trim(part);
        if (part.empty()) continue;
        if (numeric) {
          DA_ASSIGN_OR_RETURN(double number, parse_double(part));
          out.push_back(number);
        } else {
          out.push_back(std::string(part));
        }
      }
    }
    return out;
  }
  const std::string_view text = values.empty() ? "" : Trim(values.back());
  if (default_value.is_boolean()) {
    if (text == "true" || text == "1") return Json(true);
    if (text == "false" || text == "0") return Json(false);
    return bad(text, "true or false");
  }
  if (default_value.is_number_integer()) {
    if (!text.empty() && text.front() == '-') {
      int64_t value = 0;
      auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || end != text.data() + text.size()) {
        return bad(text, "an integer");
      }
      return Json(value);
    }
    uint64_t value = 0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size()) {
      return bad(text, "an integer");
    }
    return Json(value);
  }
  if (default_value.is_number() || default_value.is_null()) {
    DA_ASSIGN_OR_RETURN(double value, parse_double(text));
    return Json(value);
  }
  return Json(std::string(text));
}

// Sets a dotted field inside `root`.
void SetField(Json& root, std::string_view key, Json value) {
  Json* node = &root;
  for (std::string_view part : SplitOn(key, '.')) node = &(*node)[std::string(part)];
  *node = std::move(value);
}

absl::StatusOr<std::string> FileDigest(std::string_view path) {
  absl::StatusOr<std::string> contents = ReadFile(fs::path(path));
  if (!contents.ok()) {
    return absl::InvalidArgumentError(
        StrCat("referenced file ", path, " does not exist or is unreadable"));
  }
  return Sha256Hex(*contents);
}

// What a run depends on: the command, the config sections it reads, and
// input files by content rather than by path, so that the same inputs in a
// different directory give the same digest.
absl::StatusOr<Json> DigestInput(std::string_view command,
                                 const AuditConfig& config) {
  const Json& e = config.effective;
  Json in = Json::object();
  in["command"] = command;
  in["seed"] = config.seed;
  const auto hash_list = [&](const std::vector<std::string>& paths)
      -> absl::StatusOr<Json> {
    Json out = Json::array();
    for (const std::string& path : paths) {
      DA_ASSIGN_OR_RETURN(std::string digest, FileDigest(path));
      out.push_back(digest);
    }
    return out;
  };
  if (command == "fetch") {
    Json endpoint = e["endpoint"];
    in["endpoint"] = std::move(endpoint);
    in["decode"] = e["decode"];
    if (config.questions.empty()) {
      return absl::InvalidArgumentError("fetch needs a questions file (--questions)");
    }
    DA_ASSIGN_OR_RETURN(in["questions"], FileDigest(config.questions));
    in["split_ratio"] = e["split_ratio"];
    in["fetch_inputs"] = e["fetch_inputs"];
    in["fetch_lowercased"] = e["fetch_lowercased"];
  } else if (command == "score" || command == "sweep") {
    if (config.traces.empty()) {
      return absl::InvalidArgumentError(
          StrCat(command, " needs trace files (--traces)"));
    }
    DA_ASSIGN_OR_RETURN(in["traces"], hash_list(config.traces));
    in["tbd"] = e["tbd"];
    in["min_k"] = e["min_k"];
    in["limit"] = e["limit"];
    if (command == "score") {
      in["detectors"] = e["detectors"];
    } else {
      in["sweep"] = e["sweep"];
      in["eval"] = e["eval"];
    }
  } else if (command == "eval") {
    const std::string scores = config.scores.empty()
                                   ? (config.output_dir / "scores.jsonl").string()
                                   : config.scores;
    DA_ASSIGN_OR_RETURN(in["scores"], FileDigest(scores));
    if (!config.labels.empty()) {
      DA_ASSIGN_OR_RETURN(in["labels"], FileDigest(config.labels));
    }
    in["eval"] = e["eval"];
  } else if (command == "simulate") {
    in["simulator"] = e["simulator"];
  } else if (command == "report") {
    Json reports = Json::array();
    std::error_code ec;
    if (fs::is_directory(config.run_dir, ec)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(config.run_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("report_", 0) == 0 && entry.path().extension() == ".json") {
          files.push_back(entry.path());
        }
      }
      std::sort(files.begin(), files.end());
      for (const fs::path& file : files) {
        DA_ASSIGN_OR_RETURN(std::string digest, FileDigest(file.string()));
        reports.push_back(Json{{"file", file.filename().string()}, {"sha256", digest}});
      }
    }
    in["reports"] = std::move(reports);
  }
  return in;
}

// --- Run context -----------------------------------------------------------

struct RunContext {
  const AuditConfig& config;
  const Environment& env;
  std::string digest;

  std::ostream& out() const { return *env.out; }
  std::ostream& err() const { return *env.err; }
  fs::path Output(std::string_view name) const { return config.output_dir / name; }

  Json Stamp() const {
    return Json{{"config_digest", digest}, {"seed", config.seed}};
  }
  void AddStamp(Json& row) const {
    row["config_digest"] = digest;
    row["seed"] = config.seed;
  }
  std::string CsvStamp() const {
    return StrCat("# config_digest=", digest, " seed=", config.seed, "\n");
  }
  EvalSettings Settings() const {
    EvalSettings settings = config.eval;
    settings.context = Stamp();
    return settings;
  }
};

absl::Status WriteJsonLines(const fs::path& path, const std::vector<Json>& rows) {
  std::string text;
  for (const Json& row : rows) StrAppend(text, row.dump(), "\n");
  return WriteFile(path, text);
}

absl::StatusOr<std::vector<TraceRecord>> ReadTraces(
    const std::vector<std::string>& paths) {
  std::vector<TraceRecord> records;
  for (const std::string& path : paths) {
    absl::StatusOr<std::vector<TraceRecord>> file = ReadTraceFile(path);
    if (!file.ok()) {
      return absl::FailedPreconditionError(
          StrCat(path, ": ", file.status().message()));
    }
    for (TraceRecord& record : *file) records.push_back(std::move(record));
  }
  return records;
}

// --- fetch -----------------------------------------------------------------

struct Question {
  std::string id;
  std::string text;
  Label label = Label::kUnknown;
};

absl::StatusOr<std::vector<Question>> ReadQuestions(const fs::path& path) {
  std::vector<Question> questions;
  std::set<std::string> seen;
  DA_RETURN_IF_ERROR(ForEachJsonLine(path, [&](int, const Json& row) -> absl::Status {
    Question q;
    auto id = row.find("question_id");
    if (id == row.end() || !id->is_string() || id->get<std::string>().empty()) {
      return absl::InvalidArgumentError("question_id must be a non-empty string");
    }
    q.id = id->get<std::string>();
    auto text = row.find("question");
    if (text == row.end()) text = row.find("text");
    if (text == row.end() || !text->is_string()) {
      return absl::InvalidArgumentError("question must be a string");
    }
    q.text = text->get<std::string>();
    if (auto label = row.find("label"); label != row.end()) {
      if (!label->is_string()) return absl::InvalidArgumentError("label must be a string");
      DA_ASSIGN_OR_RETURN(q.label, ParseLabel(label->get<std::string>()));
    }
    if (!seen.insert(q.id).second) {
      return absl::InvalidArgumentError(StrCat("duplicate question_id '", q.id, "'"));
    }
    questions.push_back(std::move(q));
    return absl::OkStatus();
  }));
  return questions;
}

absl::Status CmdFetch(const RunContext& run) {
  const AuditConfig& config = run.config;
  DA_ASSIGN_OR_RETURN(std::vector<Question> questions,
                      ReadQuestions(config.questions));
  ModelEndpoint endpoint = config.endpoint;
  endpoint.api_key = ApiKeyFromEnvironment();
  DA_RETURN_IF_ERROR(ValidateEndpoint(endpoint));

  if (config.split_ratio.has_value() && !questions.empty()) {
    DA_ASSIGN_OR_RETURN(
        SplitResult split,
        AsData(BalancedSplit(questions.size(), *config.split_ratio, config.seed)));
    std::vector<Json> rows(questions.size());
    std::vector<bool> evaluated(questions.size(), false);
    for (size_t i : split.member_pool) {
      rows[i] = Json{{"question_id", questions[i].id}, {"pool", "member"}};
    }
    for (size_t i : split.nonmember_pool) {
      rows[i] = Json{{"question_id", questions[i].id}, {"pool", "nonmember"}};
    }
    for (size_t i : split.eval_members) {
      evaluated[i] = true;
      questions[i].label = Label::kMember;
    }
    for (size_t i : split.eval_nonmembers) {
      evaluated[i] = true;
      questions[i].label = Label::kNonmember;
    }
    std::vector<Question> selected;
    for (size_t i = 0; i < questions.size(); ++i) {
      rows[i]["evaluated"] = static_cast<bool>(evaluated[i]);
      run.AddStamp(rows[i]);
      if (evaluated[i]) selected.push_back(questions[i]);
    }
    DA_RETURN_IF_ERROR(WriteJsonLines(run.Output("split.jsonl"), rows));
    run.err() << "split: " << split.member_pool.size() << " member-pool / "
              << split.nonmember_pool.size() << " nonmember-pool questions; "
              << "evaluating " << split.eval_members.size() << " + "
              << split.eval_nonmembers.size() << "\n";
    questions = std::move(selected);
  }

  std::vector<TraceRequest> requests;
  for (const Question& q : questions) {
    TraceRequest request;
    request.question_id = q.id;
    request.text = q.text;
    request.label = q.label;
    request.decode = config.decode;
    requests.push_back(request);
    request.kind = RequestKind::kInput;
    if (config.fetch_inputs) {
      request.variant = Variant::kOriginal;
      requests.push_back(request);
    }
    if (config.fetch_lowercased) {
      request.variant = Variant::kLowercased;
      requests.push_back(request);
    }
  }

  std::unique_ptr<Transport> transport =
      run.env.transport_factory ? run.env.transport_factory(endpoint)
                                : std::make_unique<HttpTransport>(endpoint);
  InferenceClient client(endpoint, std::move(transport), config.cache_dir);
  size_t cached = 0;
  for (const TraceRequest& request : requests) cached += client.IsCached(request);
  if (!requests.empty()) {
    run.err() << cached << " of " << requests.size() << " requests already cached\n";
  }
  const size_t step = std::max<size_t>(1, requests.size() / 10);
  const BatchResult result = client.RunBatch(requests, [&](size_t done, size_t total) {
    if (done % step == 0 || done == total) {
      run.err() << "fetched " << done << "/" << total << "\n";
    }
  });

  std::vector<TraceRecord> generations;
  std::vector<TraceRecord> inputs;
  const Json stamp = run.Stamp();
  for (const auto& trace : result.traces) {
    if (!trace.has_value()) continue;
    TraceRecord record = *trace;
    std::visit([&](auto& r) { r.extra["run"] = stamp; }, record);
    (std::holds_alternative<GenerationTrace>(record) ? generations : inputs)
        .push_back(std::move(record));
  }
  DA_RETURN_IF_ERROR(WriteTraceFile(generations, run.Output("generations.jsonl")));
  if (config.fetch_inputs || config.fetch_lowercased) {
    DA_RETURN_IF_ERROR(WriteTraceFile(inputs, run.Output("inputs.jsonl")));
  }
  std::vector<Json> failure_rows;
  bool capability = false;
  for (const BatchFailure& failure : result.failures) {
    const TraceRequest& request = requests[failure.index];
    Json row = Json::object();
    row["question_id"] = failure.question_id;
    row["kind"] = request.kind == RequestKind::kGeneration ? "generation" : "input";
    if (request.kind == RequestKind::kInput) row["variant"] = VariantName(request.variant);
    row["code"] = absl::StatusCodeToString(failure.status.code());
    row["message"] = std::string(failure.status.message());
    run.AddStamp(row);
    failure_rows.push_back(std::move(row));
    capability |= absl::IsUnimplemented(failure.status);
  }
  DA_RETURN_IF_ERROR(WriteJsonLines(run.Output("failures.jsonl"), failure_rows));

  run.out() << "fetched " << requests.size() - result.failures.size() << " of "
            << requests.size() << " requests into " << config.output_dir.string()
            << " (" << client.network_calls() << " network calls)\n";
  if (capability) {
    // Capability gaps are endpoint-wide, not per question.
    return absl::UnimplementedError(StrCat(
        "the endpoint lacks a required capability: ",
        result.failures.front().status.message()));
  }
  if (!requests.empty() && result.failures.size() == requests.size()) {
    return absl::UnavailableError(StrCat(
        "all ", requests.size(), " requests failed; see ",
        run.Output("failures.jsonl").string()));
  }
  if (!result.failures.empty()) {
    run.err() << "warning: " << result.failures.size() << " of "
              << requests.size() << " requests failed; see "
              << run.Output("failures.jsonl").string() << "\n";
  }
  return absl::OkStatus();
}

// --- score -----------------------------------------------------------------

struct QuestionTraces {
  const GenerationTrace* generation = nullptr;
  const InputTrace* original = nullptr;
  const InputTrace* lowercased = nullptr;
  std::vector<InputTrace> neighbors;
};

absl::Status CmdScore(const RunContext& run) {
  const AuditConfig& config = run.config;
  DA_ASSIGN_OR_RETURN(std::vector<TraceRecord> records, ReadTraces(config.traces));
  std::vector<std::string> order;
  std::map<std::string, QuestionTraces> by_id;
  for (const TraceRecord& record : records) {
    const std::string& id = std::visit(
        [](const auto& r) -> const std::string& { return r.question_id; }, record);
    auto [it, inserted] = by_id.try_emplace(id);
    if (inserted) order.push_back(id);
    QuestionTraces& q = it->second;
    if (const auto* g = std::get_if<GenerationTrace>(&record)) {
      if (q.generation != nullptr) {
        return absl::FailedPreconditionError(
            StrCat("two generation traces for question '", id, "'"));
      }
      q.generation = g;
      continue;
    }
    const auto& input = std::get<InputTrace>(record);
    const InputTrace** slot = nullptr;
    if (input.variant == Variant::kNeighbor) {
      q.neighbors.push_back(input);
      continue;
    }
    slot = input.variant == Variant::kOriginal ? &q.original : &q.lowercased;
    if (*slot != nullptr) {
      return absl::FailedPreconditionError(StrCat(
          "two ", VariantName(input.variant), " input traces for question '", id, "'"));
    }
    *slot = &input;
  }

  struct Outcome {
    std::vector<Json> rows;
    std::vector<Json> skipped;
  };
  std::vector<Outcome> outcomes(config.detectors.size());
  ParallelFor(config.detectors.size(), [&](size_t d) {
    DetectorSpec spec = config.base;
    spec.detector = config.detectors[d];
    const Json params = spec.ParamsJson();
    for (const std::string& id : order) {
      const QuestionTraces& q = by_id.at(id);
      absl::StatusOr<DetectorScore> score;
      if (IsGenerationDetector(spec.detector)) {
        score = q.generation == nullptr
                    ? absl::FailedPreconditionError("no generation trace")
                    : ScoreGeneration(spec, *q.generation);
      } else if (q.original == nullptr) {
        score = absl::FailedPreconditionError("no original input trace");
      } else {
        InputBundle bundle{q.original, q.lowercased, q.neighbors};
        score = ScoreInputs(spec, bundle);
      }
      if (!score.ok()) {
        Json row = Json{{"question_id", id},
                        {"detector", spec.detector},
                        {"reason", std::string(score.status().message())}};
        run.AddStamp(row);
        outcomes[d].skipped.push_back(std::move(row));
        continue;
      }
      Json row = Json::object();
      row["question_id"] = id;
      row["detector"] = spec.detector;
      row["score"] = score->score;
      row["orientation"] = OrientationName(score->orientation);
      if (q.generation != nullptr && q.generation->label != Label::kUnknown) {
        row["label"] = LabelName(q.generation->label);
      }
      row["params"] = params;
      run.AddStamp(row);
      outcomes[d].rows.push_back(std::move(row));
    }
  });

  std::vector<Json> rows;
  std::vector<Json> skipped;
  for (size_t d = 0; d < outcomes.size(); ++d) {
    const Outcome& outcome = outcomes[d];
    rows.insert(rows.end(), outcome.rows.begin(), outcome.rows.end());
    skipped.insert(skipped.end(), outcome.skipped.begin(), outcome.skipped.end());
    if (!outcome.skipped.empty()) {
      run.err() << "note: " << config.detectors[d] << " skipped "
                << outcome.skipped.size() << " of " << order.size()
                << " questions (first: "
                << outcome.skipped.front()["reason"].get<std::string>() << ")\n";
    }
  }
  DA_RETURN_IF_ERROR(WriteJsonLines(run.Output("scores.jsonl"), rows));
  DA_RETURN_IF_ERROR(WriteJsonLines(run.Output("skipped.jsonl"), skipped));
  run.out() << "wrote " << rows.size() << " scores for " << order.size()
            << " questions to " << run.Output("scores.jsonl").string() << "\n";
  return absl::OkStatus();
}

// --- eval ------------------------------------------------------------------

absl::StatusOr<std::map<std::string, Label>> ReadLabels(const fs::path& path) {
  std::map<std::string, Label> labels;
  DA_RETURN_IF_ERROR(ForEachJsonLine(path, [&](int, const Json& row) -> absl::Status {
    if (row.contains("kind")) {
      DA_ASSIGN_OR_RETURN(TraceRecord record, TraceRecordFromJson(row));
      if (const auto* g = std::get_if<GenerationTrace>(&record)) {
        if (g->label != Label::kUnknown) labels[g->question_id] = g->label;
      }
      return absl::OkStatus();
    }
    auto id = row.find("question_id");
    auto label = row.find("label");
    if (id == row.end() || !id->is_string() || label == row.end() ||
        !label->is_string()) {
      return absl::InvalidArgumentError("expected question_id and label strings");
    }
    DA_ASSIGN_OR_RETURN(labels[id->get<std::string>()],
                        ParseLabel(label->get<std::string>()));
    return absl::OkStatus();
  }));
  return labels;
}

struct ScoresFile {
  std::vector<DetectorScore> scores;
  std::map<std::string, Label> labels;
  std::map<std::string, Json> params;
};

absl::StatusOr<ScoresFile> ReadScores(const fs::path& path) {
  ScoresFile file;
  std::set<std::pair<std::string, std::string>> seen;
  DA_RETURN_IF_ERROR(ForEachJsonLine(path, [&](int, const Json& row) -> absl::Status {
    DetectorScore score;
    auto id = row.find("question_id");
    auto detector = row.find("detector");
    auto value = row.find("score");
    auto orientation = row.find("orientation");
    if (id == row.end() || !id->is_string() || detector == row.end() ||
        !detector->is_string() || orientation == row.end() ||
        !orientation->is_string()) {
      return absl::InvalidArgumentError(
          "expected question_id, detector and orientation strings");
    }
    if (value == row.end() || !value->is_number()) {
      return absl::InvalidArgumentError("score must be a number");
    }
    score.question_id = id->get<std::string>();
    score.detector = detector->get<std::string>();
    score.score = value->get<double>();
    DA_ASSIGN_OR_RETURN(score.orientation,
                        ParseOrientation(orientation->get<std::string>()));
    if (absl::StatusOr<Orientation> known = DetectorOrientation(score.detector);
        known.ok() && *known != score.orientation) {
      return absl::InvalidArgumentError(
          StrCat("orientation of ", score.detector, " must be ",
                 OrientationName(*known)));
    }
    if (!seen.emplace(score.question_id, score.detector).second) {
      return absl::InvalidArgumentError(StrCat(
          "duplicate score for ", score.question_id, " / ", score.detector));
    }
    if (auto label = row.find("label"); label != row.end()) {
      if (!label->is_string()) return absl::InvalidArgumentError("label must be a string");
      DA_ASSIGN_OR_RETURN(Label parsed, ParseLabel(label->get<std::string>()));
      auto [it, inserted] = file.labels.emplace(score.question_id, parsed);
      if (!inserted && it->second != parsed) {
        return absl::InvalidArgumentError(
            StrCat("conflicting labels for ", score.question_id));
      }
    }
    Json params = row.value("params", Json::object());
    auto [it, inserted] = file.params.emplace(score.detector, params);
    if (!inserted && it->second != params) {
      return absl::InvalidArgumentError(
          StrCat("rows for ", score.detector, " disagree on params"));
    }
    file.scores.push_back(std::move(score));
    return absl::OkStatus();
  }));
  return file;
}

std::string CsvHeader(const RunContext& run) {
  return StrCat(run.CsvStamp(), ReportsCsvHeader(run.config.eval.fpr_budgets));
}

absl::Status CmdEval(const RunContext& run) {
  const AuditConfig& config = run.config;
  const fs::path scores_path = config.scores.empty()
                                   ? config.output_dir / "scores.jsonl"
                                   : fs::path(config.scores);
  DA_ASSIGN_OR_RETURN(ScoresFile file, ReadScores(scores_path));
  std::map<std::string, Label> labels = file.labels;
  if (!config.labels.empty()) {
    DA_ASSIGN_OR_RETURN(auto from_file, ReadLabels(config.labels));
    for (auto& [id, label] : from_file) labels[id] = label;
  }
  std::vector<DetectorScore> scores = std::move(file.scores);
  if (scores.empty()) {
    return absl::FailedPreconditionError(
        StrCat(scores_path.string(), " has no scores"));
  }

  if (config.balanced) {
    // Same balanced question set for every detector: each class is shuffled
    // with the seed and cut to the smaller class size.
    std::set<std::string> ids;
    for (const DetectorScore& s : scores) ids.insert(s.question_id);
    std::vector<std::string> members;
    std::vector<std::string> nonmembers;
    for (const std::string& id : ids) {
      auto it = labels.find(id);
      if (it == labels.end()) continue;
      if (it->second == Label::kMember) members.push_back(id);
      if (it->second == Label::kNonmember) nonmembers.push_back(id);
    }
    const size_t n = std::min(members.size(), nonmembers.size());
    std::set<std::string> keep;
    for (auto* pool : {&members, &nonmembers}) {
      const std::vector<size_t> perm = SeededPermutation(pool->size(), config.seed);
      for (size_t i = 0; i < n; ++i) keep.insert((*pool)[perm[i]]);
    }
    std::vector<DetectorScore> kept;
    for (DetectorScore& s : scores) {
      if (keep.count(s.question_id) || !labels.count(s.question_id)) {
        kept.push_back(std::move(s));
      }
    }
    scores = std::move(kept);
    run.err() << "balanced evaluation set: " << n << " members + " << n
              << " nonmembers\n";
  }

  std::map<std::string, std::pair<int, int>> counts;
  for (const DetectorScore& s : scores) {
    auto it = labels.find(s.question_id);
    if (it == labels.end()) continue;
    if (it->second == Label::kMember) ++counts[s.detector].first;
    if (it->second == Label::kNonmember) ++counts[s.detector].second;
  }
  for (const auto& [detector, count] : counts) {
    if (count.first == 0 || count.second == 0) {
      return absl::FailedPreconditionError(StrCat(
          detector, " has ", count.first, " member and ", count.second,
          " nonmember scores; both classes are needed"));
    }
  }

  DA_ASSIGN_OR_RETURN(
      std::vector<EvalReport> reports,
      AsData(EvaluateScores(scores, labels, file.params, run.Settings())));
  std::string csv = CsvHeader(run);
  for (const EvalReport& report : reports) {
    DA_RETURN_IF_ERROR(WriteFile(
        run.Output(StrCat("report_", SafeName(report.detector), ".json")),
        JsonText(ReportToJson(report))));
    DA_RETURN_IF_ERROR(WriteFile(
        run.Output(StrCat("histogram_", SafeName(report.detector), ".csv")),
        StrCat(run.CsvStamp(), HistogramCsv(report))));
    csv += ReportCsvRow(report, "", "");
    run.out() << report.detector << "  auc=" << FormatDouble(report.auc);
    for (const auto& [budget, tpr] : report.tpr_at) {
      run.out() << "  tpr@" << FormatDouble(budget) << "=" << FormatDouble(tpr);
    }
    run.out() << "  (" << report.n_members << "+" << report.n_nonmembers << ")\n";
    for (const std::string& note : report.notes) {
      run.err() << "note: " << report.detector << ": " << note << "\n";
    }
  }
  return WriteFile(run.Output("reports.csv"), csv);
}

// --- sweep -----------------------------------------------------------------

absl::Status CheckSweepParameter(std::string_view detector,
                                 std::string_view parameter) {
  static const std::map<std::string_view, std::set<std::string_view>> kAllowed = {
      {kTbd, {"m", "alpha", "tau"}},
      {kGeneratedMinK, {"k", "limit"}},
      {kGeneratedPerplexity, {"limit"}},
      {kGeneratedMeanProb, {"limit"}},
  };
  auto it = kAllowed.find(detector);
  if (it == kAllowed.end()) {
    return absl::InvalidArgumentError(StrCat(
        "sweeps run over generation detectors; got '", detector, "'"));
  }
  if (!it->second.count(parameter)) {
    return absl::InvalidArgumentError(StrCat(
        "parameter '", parameter, "' does not affect ", detector));
  }
  return absl::OkStatus();
}

absl::Status CmdSweep(const RunContext& run) {
  const AuditConfig& config = run.config;
  std::vector<SweepPoint> points;
  std::optional<SweepGrid> grid;
  if (config.sweep_preset != "ablation") {
    grid.emplace();
    grid->parameter = config.sweep_preset.empty() ? config.sweep_parameter
                                                  : config.sweep_preset;
    if (config.sweep_grid.empty() || !config.sweep_preset.empty()) {
      DA_ASSIGN_OR_RETURN(*grid, DefaultGrid(grid->parameter));
    } else {
      DA_ASSIGN_OR_RETURN(grid->values, ParseGridValues(config.sweep_grid));
    }
    DA_RETURN_IF_ERROR(CheckSweepParameter(config.sweep_detector, grid->parameter));
  }

  DA_ASSIGN_OR_RETURN(std::vector<TraceRecord> records, ReadTraces(config.traces));
  std::vector<GenerationTrace> traces;
  for (TraceRecord& record : records) {
    if (auto* g = std::get_if<GenerationTrace>(&record)) traces.push_back(std::move(*g));
  }
  if (traces.size() != records.size()) {
    run.err() << "note: ignoring " << records.size() - traces.size()
              << " input traces; sweeps use generation traces\n";
  }
  if (grid.has_value()) {
    DetectorSpec base = config.base;
    base.detector = config.sweep_detector;
    DA_ASSIGN_OR_RETURN(points, AsData(Sweep(traces, base, *grid, run.Settings())));
  } else {
    for (const GenerationTrace& trace : traces) {
      if (trace.label == Label::kUnknown) {
        return absl::FailedPreconditionError(StrCat(
            "trace '", trace.question_id, "' has no member/nonmember label"));
      }
    }
    points = AblationSweep(traces, run.Settings());
  }

  std::string csv = CsvHeader(run);
  std::vector<Json> failures;
  for (const SweepPoint& point : points) {
    if (!point.skipped.empty()) {
      run.err() << "note: " << point.name << " skipped " << point.skipped.size()
                << " traces (first: " << point.skipped.front() << ")\n";
    }
    if (!point.report.has_value()) {
      Json row = Json{{"name", point.name}, {"failure", point.failure}};
      run.AddStamp(row);
      failures.push_back(std::move(row));
      run.err() << "warning: " << point.name << " failed: " << point.failure << "\n";
      continue;
    }
    Json json = Json::object();
    json["name"] = point.name;
    json["grid_param"] = point.parameter;
    json["grid_value"] = point.value;
    for (auto it = ReportToJson(*point.report); const auto& [key, value] : it.items()) {
      json[key] = value;
    }
    DA_RETURN_IF_ERROR(WriteFile(
        run.Output(StrCat("report_", SafeName(point.name), ".json")), JsonText(json)));
    const std::string value = point.parameter == "ablation"
                                  ? point.name
                                  : FormatDouble(point.value);
    csv += ReportCsvRow(*point.report, point.parameter, value);
    run.out() << point.name << "  auc=" << FormatDouble(point.report->auc);
    for (const auto& [budget, tpr] : point.report->tpr_at) {
      run.out() << "  tpr@" << FormatDouble(budget) << "=" << FormatDouble(tpr);
    }
    run.out() << "\n";
  }
  DA_RETURN_IF_ERROR(WriteFile(run.Output("sweep.csv"), csv));
  if (!failures.empty()) {
    DA_RETURN_IF_ERROR(WriteJsonLines(run.Output("sweep_failures.jsonl"), failures));
  }
  return absl::OkStatus();
}

// --- simulate --------------------------------------------------------------

absl::Status CmdSimulate(const RunContext& run) {
  const AuditConfig& config = run.config;
  DA_ASSIGN_OR_RETURN(std::vector<GenerationTrace> traces,
                      SimulateDataset(config.n_members, config.n_nonmembers,
                                      config.sim, config.seed));
  std::vector<TraceRecord> records;
  double fraction[2] = {0.0, 0.0};
  for (GenerationTrace& trace : traces) {
    const int cls = trace.label == Label::kMember ? 0 : 1;
    DA_ASSIGN_OR_RETURN(double f, NearDeterministicFraction(trace));
    fraction[cls] += f;
    trace.extra["run"] = run.Stamp();
    records.push_back(std::move(trace));
  }
  DA_RETURN_IF_ERROR(WriteTraceFile(records, run.Output("traces.jsonl")));
  const double members = fraction[0] / static_cast<double>(config.n_members);
  const double nonmembers = fraction[1] / static_cast<double>(config.n_nonmembers);
  run.out() << "wrote " << records.size() << " traces to "
            << run.Output("traces.jsonl").string() << "\n"
            << "mean near-deterministic fraction: members "
            << fmt::format("{:.4f}", members) << ", nonmembers "
            << fmt::format("{:.4f}", nonmembers) << ", gap "
            << fmt::format("{:.4f}", members - nonmembers) << "\n";
  return absl::OkStatus();
}

// --- report ----------------------------------------------------------------

absl::Status CmdReport(const RunContext& run) {
  const fs::path& dir = run.config.run_dir;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    return absl::NotFoundError(StrCat(dir.string(), " is not a directory"));
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("report_", 0) == 0 && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) {
    return absl::NotFoundError(StrCat("no report_*.json files in ", dir.string()));
  }
  std::sort(files.begin(), files.end());

  std::vector<Json> reports;
  std::vector<double> budgets;
  for (const fs::path& file : files) {
    DA_ASSIGN_OR_RETURN(std::string text, ReadFile(file));
    Json report = Json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (report.is_discarded() || !report.is_object() || !report.contains("auc") ||
        !report["auc"].is_number()) {
      return absl::FailedPreconditionError(
          StrCat(file.string(), " is not an evaluation report"));
    }
    if (!report.contains("name")) report["name"] = report.value("detector", "");
    for (const Json& entry : report.value("tpr_at_fpr", Json::array())) {
      const double budget = entry.value("fpr", 0.0);
      if (std::find(budgets.begin(), budgets.end(), budget) == budgets.end()) {
        budgets.push_back(budget);
      }
    }
    reports.push_back(std::move(report));
  }

  std::string csv = StrCat(run.CsvStamp(), "name,detector,params,auc");
  std::string text = StrCat("run directory: ", dir.string(), "\n",
                            "config_digest: ", run.digest, "\nseed: ",
                            run.config.seed, "\n\n");
  std::string table_header = fmt::format("{:<32} {:>10}", "name", "auc");
  for (double budget : budgets) {
    StrAppend(csv, ",tpr_at_fpr_", FormatDouble(budget));
    table_header += fmt::format(" {:>14}", StrCat("tpr@", FormatDouble(budget)));
  }
  StrAppend(csv, ",n_members,n_nonmembers,report_config_digest\n");
  table_header += fmt::format(" {:>8} {:>8}\n", "members", "non");
  text += table_header;
  for (const Json& report : reports) {
    const Json params = report.value("params", Json::object());
    std::string params_text = params.dump();
    std::string quoted = "\"";
    for (char c : params_text) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    quoted += "\"";
    const std::string name = report["name"].get<std::string>();
    StrAppend(csv, name, ",", report.value("detector", ""), ",", quoted, ",",
              FormatDouble(report["auc"].get<double>()));
    text += fmt::format("{:<32} {:>10.4f}", name, report["auc"].get<double>());
    for (double budget : budgets) {
      std::string cell;
      for (const Json& entry : report.value("tpr_at_fpr", Json::array())) {
        if (entry.value("fpr", -1.0) == budget) {
          cell = FormatDouble(entry.value("tpr", 0.0));
        }
      }
      StrAppend(csv, ",", cell);
      text += fmt::format(" {:>14}", cell.empty() ? "-" : cell.substr(0, 8));
    }
    const Json context = report.value("context", Json::object());
    StrAppend(csv, ",", report.value("n_members", 0), ",",
              report.value("n_nonmembers", 0), ",",
              context.value("config_digest", ""), "\n");
    text += fmt::format(" {:>8} {:>8}\n", report.value("n_members", 0),
                        report.value("n_nonmembers", 0));
  }
  DA_RETURN_IF_ERROR(WriteFile(run.Output("summary.csv"), csv));
  DA_RETURN_IF_ERROR(WriteFile(run.Output("summary.txt"), text));
  run.out() << text;
  return absl::OkStatus();
}

// --- Command line ----------------------------------------------------------

// A flag that overrides one config field when given.
struct Binding {
  std::string key;
  std::vector<std::string> values;
  std::string value;
  bool flag = false;
  bool list = false;
  CLI::Option* option = nullptr;
};

class Bindings {
 public:
  void Scalar(CLI::App* app, const std::string& name, const std::string& key,
              const std::string& help) {
    Binding& b = items_.emplace_back();
    b.key = key;
    b.option = app->add_option(name, b.value, help);
  }
  void List(CLI::App* app, const std::string& name, const std::string& key,
            const std::string& help) {
    Binding& b = items_.emplace_back();
    b.key = key;
    b.list = true;
    b.option = app->add_option(name, b.values, help);
  }
  void Flag(CLI::App* app, const std::string& name, const std::string& key,
            const std::string& help) {
    Binding& b = items_.emplace_back();
    b.key = key;
    b.flag = true;
    b.option = app->add_flag(name, help);
  }

  absl::Status Apply(const Json& defaults, Json& config) const {
    for (const Binding& b : items_) {
      if (b.option->count() == 0) continue;
      if (b.flag) {
        SetField(config, b.key, Json(true));
        continue;
      }
      const ConfigReader reader(defaults);
      const std::vector<std::string> values =
          b.list ? b.values : std::vector<std::string>{b.value};
      DA_ASSIGN_OR_RETURN(Json value, FlagValue(reader.At(b.key), values, b.key));
      SetField(config, b.key, std::move(value));
    }
    return absl::OkStatus();
  }

 private:
  std::deque<Binding> items_;
};

absl::StatusOr<Json> LoadConfigFile(const std::string& path) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) {
    return absl::InvalidArgumentError(StrCat("cannot read config file ", path));
  }
  Json config = Json::parse(*text, nullptr, /*allow_exceptions=*/false,
                            /*ignore_comments=*/true);
  if (config.is_discarded() || !config.is_object()) {
    return absl::InvalidArgumentError(
        StrCat("config file ", path, " is not a JSON object"));
  }
  return config;
}

int Finish(const Environment& env, const absl::Status& status) {
  if (!status.ok()) *env.err << "error: " << status.message() << "\n";
  return ExitCodeFor(status);
}

}  // namespace

Json DefaultConfig() {
  const SimParams sim;
  const TbdParams tbd;
  const MinKParams min_k;
  Json config = Json::object();
  config["seed"] = 0;
  config["output_dir"] = "distill_audit_out";
  config["cache_dir"] = ".distill_audit_cache";
  config["endpoint"] = Json{{"base_url", ""},
                            {"model_id", ""},
                            {"timeout_ms", 120000},
                            {"max_parallel", 4},
                            {"max_attempts", 3},
                            {"backoff_ms", 500}};
  config["decode"] = Json{{"max_tokens", DecodeParams{}.max_tokens},
                          {"system_prompt", kDefaultSystemPrompt}};
  config["questions"] = "";
  config["split_ratio"] = nullptr;
  config["fetch_inputs"] = false;
  config["fetch_lowercased"] = false;
  config["traces"] = Json::array();
  Json detectors = Json::array();
  for (std::string_view name : AllDetectors()) detectors.push_back(name);
  config["detectors"] = std::move(detectors);
  config["tbd"] = Json{{"tau", tbd.tau}, {"alpha", tbd.alpha}, {"m", tbd.m}};
  config["min_k"] = Json{{"k_percent", min_k.k_percent},
                         {"limit", kDefaultGeneratedLimit}};
  config["limit"] = kDefaultGeneratedLimit;
  config["scores"] = "";
  config["labels"] = "";
  config["eval"] = Json{{"fpr_budgets", Json::array({0.01})},
                        {"histogram_bins", kHistogramBins},
                        {"balanced", false}};
  config["sweep"] = Json{{"detector", kTbd},
                         {"parameter", "m"},
                         {"grid", ""},
                         {"preset", ""}};
  config["simulator"] = Json{{"n_members", 200},
                             {"n_nonmembers", 200},
                             {"n_tokens", sim.n_tokens},
                             {"member_sat", sim.member_sat},
                             {"nonmember_sat", sim.nonmember_sat},
                             {"sat_epsilon_scale", sim.sat_epsilon_scale},
                             {"beta_a", sim.beta_a},
                             {"beta_b", sim.beta_b},
                             {"drift", sim.drift}};
  config["run_dir"] = "";
  return config;
}

int Run(const std::vector<std::string>& args, const Environment& env) {
  CLI::App app{"Membership audit of reasoning-distilled models from the "
               "token probabilities of their answers.",
               "distill_audit"};
  app.require_subcommand(1);
  app.fallthrough();
  Bindings bindings;
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON config file");
  bindings.Scalar(&app, "-o,--output-dir", "output_dir", "Output directory");
  bindings.Scalar(&app, "--seed", "seed", "Seed for splits and simulation");
  bindings.Scalar(&app, "--cache-dir", "cache_dir",
                  "Response cache directory (empty disables caching)");

  CLI::App* fetch = app.add_subcommand("fetch", "Harvest traces from an endpoint");
  bindings.Scalar(fetch, "--questions", "questions", "Questions JSONL file");
  bindings.Scalar(fetch, "--base-url", "endpoint.base_url",
                  "OpenAI-compatible base URL including /v1");
  bindings.Scalar(fetch, "--model", "endpoint.model_id", "Model id");
  bindings.Scalar(fetch, "--max-parallel", "endpoint.max_parallel",
                  "Requests in flight");
  bindings.Scalar(fetch, "--timeout-ms", "endpoint.timeout_ms", "Request timeout");
  bindings.Scalar(fetch, "--max-tokens", "decode.max_tokens", "Generation cap");
  bindings.Scalar(fetch, "--system-prompt", "decode.system_prompt",
                  "System prompt for generation");
  bindings.Scalar(fetch, "--split-ratio", "split_ratio",
                  "Assign labels by a seeded member/nonmember split");
  bindings.Flag(fetch, "--fetch-inputs", "fetch_inputs",
                "Also fetch input-token logprobs (echo)");
  bindings.Flag(fetch, "--fetch-lowercased", "fetch_lowercased",
                "Also fetch logprobs of the lowercased question");

  CLI::App* score = app.add_subcommand("score", "Score traces with detectors");
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a scores file");
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep one detector parameter");
  for (CLI::App* sub : {score, sweep}) {
    bindings.List(sub, "--traces", "traces", "Trace files");
    bindings.Scalar(sub, "--tau", "tbd.tau", "Reference probability");
    bindings.Scalar(sub, "--alpha", "tbd.alpha", "Deviation exponent");
    bindings.Scalar(sub, "--m", "tbd.m", "Leading tokens scored");
    bindings.Scalar(sub, "--k", "min_k.k_percent", "Min-K percentage");
    bindings.Scalar(sub, "--limit", "limit", "Generated-token cap");
  }
  bindings.List(score, "--detectors", "detectors", "Detectors to run");
  for (CLI::App* sub : {eval, sweep}) {
    bindings.List(sub, "--fpr-budgets", "eval.fpr_budgets", "FPR budgets");
    bindings.Scalar(sub, "--histogram-bins", "eval.histogram_bins",
                    "Histogram bins");
  }
  bindings.Scalar(eval, "--scores", "scores", "Scores file");
  bindings.Scalar(eval, "--labels", "labels", "Labels or trace file");
  bindings.Flag(eval, "--balanced", "eval.balanced",
                "Evaluate on a seeded balanced subset");
  bindings.Scalar(sweep, "--detector", "sweep.detector", "Detector to sweep");
  bindings.Scalar(sweep, "--param", "sweep.parameter",
                  "alpha, m, tau, k or limit");
  bindings.Scalar(sweep, "--grid", "sweep.grid",
                  "start:stop:step or a comma list (default grid if empty)");
  bindings.Scalar(sweep, "--preset", "sweep.preset",
                  "m, alpha, tau, k, limit or ablation");

  CLI::App* simulate = app.add_subcommand("simulate", "Write synthetic traces");
  bindings.Scalar(simulate, "--members", "simulator.n_members", "Member traces");
  bindings.Scalar(simulate, "--nonmembers", "simulator.n_nonmembers",
                  "Nonmember traces");
  bindings.Scalar(simulate, "--n-tokens", "simulator.n_tokens", "Tokens per trace");
  bindings.Scalar(simulate, "--member-sat", "simulator.member_sat",
                  "Member saturation rate");
  bindings.Scalar(simulate, "--nonmember-sat", "simulator.nonmember_sat",
                  "Nonmember saturation rate");
  bindings.Scalar(simulate, "--sat-epsilon-scale", "simulator.sat_epsilon_scale",
                  "Mean gap below 1 of saturated tokens");
  bindings.Scalar(simulate, "--beta-a", "simulator.beta_a", "Beta shape a");
  bindings.Scalar(simulate, "--beta-b", "simulator.beta_b", "Beta shape b");
  bindings.Scalar(simulate, "--drift", "simulator.drift",
                  "Early nonmember saturation deficit");

  CLI::App* report = app.add_subcommand("report", "Summarize a run directory");
  bindings.Scalar(report, "run_dir", "run_dir", "Directory with report_*.json");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, *env.out, *env.err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Json defaults = DefaultConfig();
  Json effective = defaults;
  if (!config_path.empty()) {
    absl::StatusOr<Json> file = LoadConfigFile(config_path);
    if (!file.ok()) return Finish(env, file.status());
    if (absl::Status s = MergeInto(effective, *file, ""); !s.ok()) {
      return Finish(env, s);
    }
  }
  if (absl::Status s = bindings.Apply(defaults, effective); !s.ok()) {
    return Finish(env, s);
  }
  absl::StatusOr<AuditConfig> config = ParseConfig(effective);
  if (!config.ok()) return Finish(env, config.status());

  const std::string command = app.get_subcommands().front()->get_name();
  absl::StatusOr<Json> digest_input = DigestInput(command, *config);
  if (!digest_input.ok()) return Finish(env, digest_input.status());
  RunContext run{*config, env, Sha256Hex(digest_input->dump())};

  if (command != "report") {
    Json record = Json::object();
    record["command"] = command;
    record["config_digest"] = run.digest;
    record["seed"] = config->seed;
    record["digest_input"] = *digest_input;
    record["config"] = config->effective;
    if (absl::Status s = WriteFile(run.Output(StrCat(command, "_config.json")),
                                   JsonText(record));
        !s.ok()) {
      return Finish(env, s);
    }
  }

  absl::Status status;
  if (command == "fetch") {
    status = CmdFetch(run);
  } else if (command == "score") {
    status = CmdScore(run);
  } else if (command == "eval") {
    status = CmdEval(run);
  } else if (command == "sweep") {
    status = CmdSweep(run);
  } else if (command == "simulate") {
    status = CmdSimulate(run);
  } else {
    status = CmdReport(run);
  }
  return Finish(env, status);
}

}  // namespace distill_audit::cli
