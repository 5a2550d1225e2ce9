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

#ifndef DISTILL_AUDIT_TESTS_TEST_UTIL_H_
#define DISTILL_AUDIT_TESTS_TEST_UTIL_H_

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "distill_audit/trace.h"

namespace distill_audit::testing {

inline GenerationTrace TraceFromProbs(const std::vector<double>& probs,
                                      std::string id = "q") {
  GenerationTrace trace;
  trace.question_id = std::move(id);
  trace.question_text = "question";
  trace.model_id = "test-model";
  for (size_t i = 0; i < probs.size(); ++i) {
    trace.generated.push_back(TokenProb{"t" + std::to_string(i),
                                        std::log(probs[i])});
  }
  return trace;
}

inline GenerationTrace TraceFromLogprobs(const std::vector<double>& logprobs,
                                         std::string id = "q") {
  GenerationTrace trace;
  trace.question_id = std::move(id);
  trace.question_text = "question";
  trace.model_id = "test-model";
  for (size_t i = 0; i < logprobs.size(); ++i) {
    trace.generated.push_back(TokenProb{"t" + std::to_string(i), logprobs[i]});
  }
  return trace;
}

// Input trace with a null first slot followed by `logprobs`.
inline InputTrace InputFromLogprobs(const std::vector<double>& logprobs,
                                    std::string text = "some input text",
                                    std::string id = "q") {
  InputTrace trace;
  trace.question_id = std::move(id);
  trace.text = std::move(text);
  trace.input_tokens.push_back(InputToken{"<first>", std::nullopt});
  for (size_t i = 0; i < logprobs.size(); ++i) {
    trace.input_tokens.push_back(InputToken{"w" + std::to_string(i), logprobs[i]});
  }
  return trace;
}

// Logprobs mixing exact zeros, near-saturated values and a wide tail down
// to -30.
inline double RandomLogprob(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double kind = unit(rng);
  if (kind < 0.2) return 0.0;
  if (kind < 0.5) return -unit(rng) * 1e-3;
  return -unit(rng) * 30.0;
}

inline std::string RandomText(std::mt19937_64& rng, size_t max_len) {
  static const std::vector<std::string> kPieces = {
      "a", "B", "the", " ", "\n", "\"", "\\", "\xC3\xA9", "\xCE\xA3",
      "\xE2\x82\xAC", "\xF0\x9F\x99\x82", "7", "{", "}", ",", "\t"};
  std::uniform_int_distribution<size_t> len(0, max_len);
  std::uniform_int_distribution<size_t> pick(0, kPieces.size() - 1);
  std::string out;
  const size_t n = len(rng);
  for (size_t i = 0; i < n; ++i) out += kPieces[pick(rng)];
  return out;
}

inline GenerationTrace RandomGenerationTrace(std::mt19937_64& rng,
                                             size_t max_len,
                                             const std::string& id) {
  std::uniform_int_distribution<size_t> len(0, max_len);
  std::uniform_int_distribution<int> label(0, 2);
  GenerationTrace trace;
  trace.question_id = id;
  trace.question_text = RandomText(rng, 20);
  trace.label = static_cast<Label>(label(rng));
  trace.model_id = "model-" + std::to_string(rng() % 5);
  trace.decode.max_tokens = 1 + static_cast<int64_t>(rng() % 4096);
  trace.decode.system_prompt = RandomText(rng, 8);
  const size_t n = len(rng);
  for (size_t i = 0; i < n; ++i) {
    trace.generated.push_back(TokenProb{RandomText(rng, 3), RandomLogprob(rng)});
  }
  if (rng() % 4 == 0) {
    trace.extra["source"] = RandomText(rng, 5);
    trace.extra["temperature"] = 0.0;
  }
  return trace;
}

inline InputTrace RandomInputTrace(std::mt19937_64& rng, size_t max_len,
                                   const std::string& id, bool vocab_stats) {
  std::uniform_int_distribution<size_t> len(1, max_len);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  InputTrace trace;
  trace.question_id = id;
  trace.text = RandomText(rng, 30);
  if (trace.text.empty()) trace.text = "x";
  const size_t n = len(rng);
  for (size_t i = 0; i < n; ++i) {
    InputToken token{RandomText(rng, 3), std::nullopt};
    if (i > 0) token.logprob = RandomLogprob(rng);
    trace.input_tokens.push_back(std::move(token));
  }
  if (vocab_stats) {
    std::vector<VocabStat> stats;
    for (size_t i = 0; i < n; ++i) {
      const double sigma = unit(rng) < 0.05 ? 0.0 : unit(rng) * 5.0;
      stats.push_back(VocabStat{-unit(rng) * 20.0, sigma});
    }
    trace.vocab_stats = std::move(stats);
  }
  return trace;
}

}  // namespace distill_audit::testing

#endif  // DISTILL_AUDIT_TESTS_TEST_UTIL_H_
