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

#include "distill_audit/trace_file.h"

#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include "distill_audit/status_macros.h"
#include "distill_audit/text_util.h"

namespace distill_audit {
namespace {

using Json = nlohmann::ordered_json;

constexpr std::string_view kKindGeneration = "generation";
constexpr std::string_view kKindInput = "input";

const std::set<std::string, std::less<>>& GenerationKeys() {
  static const auto* keys = new std::set<std::string, std::less<>>{
      "kind",     "question_id", "question_text", "label",
      "model_id", "decode",      "generated"};
  return *keys;
}

const std::set<std::string, std::less<>>& InputKeys() {
  static const auto* keys = new std::set<std::string, std::less<>>{
      "kind", "question_id", "text", "variant", "input_tokens", "vocab_stats"};
  return *keys;
}

void AppendExtra(const Json& extra,
                 const std::set<std::string, std::less<>>& known, Json& out) {
  if (!extra.is_object()) return;
  for (const auto& [key, value] : extra.items()) {
    if (!known.contains(key)) out[key] = value;
  }
}

absl::StatusOr<std::string> GetString(const Json& object, std::string_view key) {
  auto it = object.find(key);
  if (it == object.end()) {
    return absl::InvalidArgumentError(
        StrCat("missing field '", key, "'"));
  }
  if (!it->is_string()) {
    return absl::InvalidArgumentError(
        StrCat("field '", key, "' must be a string"));
  }
  return it->get<std::string>();
}

absl::StatusOr<double> GetNumber(const Json& object, std::string_view key) {
  auto it = object.find(key);
  if (it == object.end()) {
    return absl::InvalidArgumentError(
        StrCat("missing field '", key, "'"));
  }
  if (!it->is_number()) {
    return absl::InvalidArgumentError(
        StrCat("field '", key, "' must be a number"));
  }
  return it->get<double>();
}

absl::StatusOr<const Json*> GetArray(const Json& object, std::string_view key) {
  auto it = object.find(key);
  if (it == object.end()) {
    return absl::InvalidArgumentError(
        StrCat("missing field '", key, "'"));
  }
  if (!it->is_array()) {
    return absl::InvalidArgumentError(
        StrCat("field '", key, "' must be an array"));
  }
  return &*it;
}

absl::StatusOr<DecodeParams> DecodeFromJson(const Json& object) {
  auto it = object.find("decode");
  if (it == object.end() || !it->is_object()) {
    return absl::InvalidArgumentError("field 'decode' must be an object");
  }
  DecodeParams decode;
  DA_ASSIGN_OR_RETURN(std::string strategy, GetString(*it, "strategy"));
  DA_ASSIGN_OR_RETURN(decode.strategy, ParseDecodeStrategy(strategy));
  auto max_tokens = it->find("max_tokens");
  if (max_tokens == it->end() || !max_tokens->is_number_integer()) {
    return absl::InvalidArgumentError(
        "field 'decode.max_tokens' must be an integer");
  }
  decode.max_tokens = max_tokens->get<int64_t>();
  DA_ASSIGN_OR_RETURN(decode.system_prompt, GetString(*it, "system_prompt"));
  return decode;
}

absl::StatusOr<TokenProb> TokenFromJson(const Json& entry) {
  if (!entry.is_object()) {
    return absl::InvalidArgumentError("token entries must be objects");
  }
  TokenProb token;
  DA_ASSIGN_OR_RETURN(token.text, GetString(entry, "t"));
  DA_ASSIGN_OR_RETURN(token.logprob, GetNumber(entry, "lp"));
  return token;
}

absl::StatusOr<InputToken> InputTokenFromJson(const Json& entry) {
  // A bare null stands for a first slot whose token text was not reported.
  if (entry.is_null()) return InputToken{};
  if (!entry.is_object()) {
    return absl::InvalidArgumentError("input token entries must be objects");
  }
  InputToken token;
  DA_ASSIGN_OR_RETURN(token.text, GetString(entry, "t"));
  auto lp = entry.find("lp");
  if (lp == entry.end()) {
    return absl::InvalidArgumentError("missing field 'lp'");
  }
  if (lp->is_null()) return token;
  if (!lp->is_number()) {
    return absl::InvalidArgumentError("field 'lp' must be a number or null");
  }
  token.logprob = lp->get<double>();
  return token;
}

absl::StatusOr<GenerationTrace> GenerationFromJson(const Json& object) {
  GenerationTrace trace;
  DA_ASSIGN_OR_RETURN(trace.question_id, GetString(object, "question_id"));
  DA_ASSIGN_OR_RETURN(trace.question_text, GetString(object, "question_text"));
  DA_ASSIGN_OR_RETURN(std::string label, GetString(object, "label"));
  DA_ASSIGN_OR_RETURN(trace.label, ParseLabel(label));
  DA_ASSIGN_OR_RETURN(trace.model_id, GetString(object, "model_id"));
  DA_ASSIGN_OR_RETURN(trace.decode, DecodeFromJson(object));
  DA_ASSIGN_OR_RETURN(const Json* generated, GetArray(object, "generated"));
  trace.generated.reserve(generated->size());
  for (const Json& entry : *generated) {
    DA_ASSIGN_OR_RETURN(TokenProb token, TokenFromJson(entry));
    trace.generated.push_back(std::move(token));
  }
  for (const auto& [key, value] : object.items()) {
    if (!GenerationKeys().contains(key)) trace.extra[key] = value;
  }
  DA_RETURN_IF_ERROR(ValidateGenerationTrace(trace));
  return trace;
}

absl::StatusOr<InputTrace> InputFromJson(const Json& object) {
  InputTrace trace;
  DA_ASSIGN_OR_RETURN(trace.question_id, GetString(object, "question_id"));
  DA_ASSIGN_OR_RETURN(trace.text, GetString(object, "text"));
  DA_ASSIGN_OR_RETURN(std::string variant, GetString(object, "variant"));
  DA_ASSIGN_OR_RETURN(trace.variant, ParseVariant(variant));
  DA_ASSIGN_OR_RETURN(const Json* tokens, GetArray(object, "input_tokens"));
  trace.input_tokens.reserve(tokens->size());
  for (const Json& entry : *tokens) {
    DA_ASSIGN_OR_RETURN(InputToken token, InputTokenFromJson(entry));
    trace.input_tokens.push_back(std::move(token));
  }
  if (auto it = object.find("vocab_stats");
      it != object.end() && !it->is_null()) {
    if (!it->is_array()) {
      return absl::InvalidArgumentError("field 'vocab_stats' must be an array");
    }
    std::vector<VocabStat> stats;
    stats.reserve(it->size());
    for (const Json& entry : *it) {
      if (!entry.is_object()) {
        return absl::InvalidArgumentError("vocab_stats entries must be objects");
      }
      VocabStat stat;
      DA_ASSIGN_OR_RETURN(stat.mu, GetNumber(entry, "mu"));
      DA_ASSIGN_OR_RETURN(stat.sigma, GetNumber(entry, "sigma"));
      stats.push_back(stat);
    }
    trace.vocab_stats = std::move(stats);
  }
  for (const auto& [key, value] : object.items()) {
    if (!InputKeys().contains(key)) trace.extra[key] = value;
  }
  DA_RETURN_IF_ERROR(ValidateInputTrace(trace));
  return trace;
}

// Key under which a record must be unique within its kind. Neighbor inputs
// share the question_id of their original and are told apart by text.
using RecordKey = std::tuple<std::string_view, std::string, std::string, std::string>;

RecordKey UniquenessKey(const TraceRecord& record) {
  if (const auto* g = std::get_if<GenerationTrace>(&record)) {
    return {kKindGeneration, g->question_id, "", ""};
  }
  const auto& input = std::get<InputTrace>(record);
  return {kKindInput, input.question_id, std::string(VariantName(input.variant)),
          input.variant == Variant::kNeighbor ? input.text : ""};
}

}  // namespace

Json ToJson(const GenerationTrace& trace) {
  Json out = Json::object();
  out["kind"] = kKindGeneration;
  out["question_id"] = trace.question_id;
  out["question_text"] = trace.question_text;
  out["label"] = LabelName(trace.label);
  out["model_id"] = trace.model_id;
  Json decode = Json::object();
  decode["strategy"] = DecodeStrategyName(trace.decode.strategy);
  decode["max_tokens"] = trace.decode.max_tokens;
  decode["system_prompt"] = trace.decode.system_prompt;
  out["decode"] = std::move(decode);
  Json generated = Json::array();
  for (const TokenProb& token : trace.generated) {
    Json entry = Json::object();
    entry["t"] = token.text;
    entry["lp"] = token.logprob;
    generated.push_back(std::move(entry));
  }
  out["generated"] = std::move(generated);
  AppendExtra(trace.extra, GenerationKeys(), out);
  return out;
}

Json ToJson(const InputTrace& trace) {
  Json out = Json::object();
  out["kind"] = kKindInput;
  out["question_id"] = trace.question_id;
  out["text"] = trace.text;
  out["variant"] = VariantName(trace.variant);
  Json tokens = Json::array();
  for (const InputToken& token : trace.input_tokens) {
    Json entry = Json::object();
    entry["t"] = token.text;
    entry["lp"] = token.logprob.has_value() ? Json(*token.logprob) : Json();
    tokens.push_back(std::move(entry));
  }
  out["input_tokens"] = std::move(tokens);
  if (trace.vocab_stats.has_value()) {
    Json stats = Json::array();
    for (const VocabStat& stat : *trace.vocab_stats) {
      Json entry = Json::object();
      entry["mu"] = stat.mu;
      entry["sigma"] = stat.sigma;
      stats.push_back(std::move(entry));
    }
    out["vocab_stats"] = std::move(stats);
  }
  AppendExtra(trace.extra, InputKeys(), out);
  return out;
}

Json ToJson(const TraceRecord& record) {
  return std::visit([](const auto& r) { return ToJson(r); }, record);
}

absl::StatusOr<TraceRecord> TraceRecordFromJson(const Json& object) {
  if (!object.is_object()) {
    return absl::InvalidArgumentError("record must be a JSON object");
  }
  DA_ASSIGN_OR_RETURN(std::string kind, GetString(object, "kind"));
  if (kind == kKindGeneration) {
    DA_ASSIGN_OR_RETURN(GenerationTrace trace, GenerationFromJson(object));
    return TraceRecord(std::move(trace));
  }
  if (kind == kKindInput) {
    DA_ASSIGN_OR_RETURN(InputTrace trace, InputFromJson(object));
    return TraceRecord(std::move(trace));
  }
  return absl::InvalidArgumentError(
      StrCat("unknown record kind '", kind, "'"));
}

std::string SerializeTraceRecord(const TraceRecord& record) {
  return ToJson(record).dump();
}

absl::StatusOr<std::vector<TraceRecord>> ParseTraceFile(std::istream& in) {
  std::vector<TraceRecord> records;
  std::set<RecordKey> seen;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json object = Json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (object.is_discarded()) {
      return absl::InvalidArgumentError(
          StrCat("line ", line_number, ": malformed JSON"));
    }
    absl::StatusOr<TraceRecord> record = TraceRecordFromJson(object);
    if (!record.ok()) {
      return absl::InvalidArgumentError(StrCat(
          "line ", line_number, ": ", record.status().message()));
    }
    RecordKey key = UniquenessKey(*record);
    if (!seen.insert(key).second) {
      return absl::InvalidArgumentError(
          StrCat("line ", line_number, ": duplicate question_id '",
                       std::get<1>(key), "' for ", std::get<0>(key),
                       " records"));
    }
    records.push_back(*std::move(record));
  }
  if (in.bad()) return absl::DataLossError("error reading trace stream");
  return records;
}

absl::StatusOr<std::vector<TraceRecord>> ParseTraceText(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ParseTraceFile(in);
}

absl::StatusOr<std::vector<TraceRecord>> ReadTraceFile(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(
        StrCat("cannot open trace file ", path.string()));
  }
  absl::StatusOr<std::vector<TraceRecord>> records = ParseTraceFile(in);
  if (!records.ok()) {
    return absl::Status(records.status().code(),
                        StrCat(path.string(), ": ",
                                     records.status().message()));
  }
  return records;
}

absl::Status WriteTraceFile(std::span<const TraceRecord> records,
                            std::ostream& out) {
  for (const TraceRecord& record : records) {
    out << SerializeTraceRecord(record) << '\n';
  }
  if (!out) return absl::DataLossError("error writing trace stream");
  return absl::OkStatus();
}

std::string WriteTraceText(std::span<const TraceRecord> records) {
  std::ostringstream out;
  WriteTraceFile(records, out).IgnoreError();
  return out.str();
}

absl::Status WriteTraceFile(std::span<const TraceRecord> records,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return absl::PermissionDeniedError(
        StrCat("cannot write trace file ", path.string()));
  }
  return WriteTraceFile(records, out);
}

}  // namespace distill_audit
