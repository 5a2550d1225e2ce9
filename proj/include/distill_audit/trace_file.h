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

#ifndef DISTILL_AUDIT_TRACE_FILE_H_
#define DISTILL_AUDIT_TRACE_FILE_H_

#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distill_audit/trace.h"
#include "json.hpp"

namespace distill_audit {

// Line-delimited JSON trace files. Each line is one object with a "kind"
// discriminator:
//
//   {"kind":"generation","question_id":..,"question_text":..,"label":..,
//    "model_id":..,"decode":{"strategy":..,"max_tokens":..,
//    "system_prompt":..},"generated":[{"t":..,"lp":..},...]}
//   {"kind":"input","question_id":..,"text":..,"variant":..,
//    "input_tokens":[{"t":..,"lp":null},{"t":..,"lp":..},...],
//    "vocab_stats":[{"mu":..,"sigma":..},...]}
//
// Reals are written as the shortest decimal that round-trips, so
// parse(write(r)) reproduces r bit for bit. Unknown top-level fields are
// carried through in `extra`.

nlohmann::ordered_json ToJson(const GenerationTrace& trace);
nlohmann::ordered_json ToJson(const InputTrace& trace);
nlohmann::ordered_json ToJson(const TraceRecord& record);

// Decodes and validates one record object.
absl::StatusOr<TraceRecord> TraceRecordFromJson(
    const nlohmann::ordered_json& object);

// One record as a single line without the trailing newline.
std::string SerializeTraceRecord(const TraceRecord& record);

// Parses records in file order. Errors name the 1-based line number.
// Blank lines are skipped.
absl::StatusOr<std::vector<TraceRecord>> ParseTraceFile(std::istream& in);
absl::StatusOr<std::vector<TraceRecord>> ParseTraceText(std::string_view text);
absl::StatusOr<std::vector<TraceRecord>> ReadTraceFile(
    const std::filesystem::path& path);

absl::Status WriteTraceFile(std::span<const TraceRecord> records,
                            std::ostream& out);
std::string WriteTraceText(std::span<const TraceRecord> records);
absl::Status WriteTraceFile(std::span<const TraceRecord> records,
                            const std::filesystem::path& path);

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_TRACE_FILE_H_
