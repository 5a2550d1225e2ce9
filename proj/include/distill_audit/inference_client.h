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

#ifndef DISTILL_AUDIT_INFERENCE_CLIENT_H_
#define DISTILL_AUDIT_INFERENCE_CLIENT_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "distill_audit/disk_cache.h"
#include "distill_audit/trace.h"

namespace distill_audit {

// Environment variable holding the endpoint API key. OPENAI_API_KEY is read
// when it is unset.
inline constexpr std::string_view kApiKeyEnv = "DISTILL_AUDIT_API_KEY";

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
};

// An OpenAI-compatible server. `base_url` includes the API prefix, e.g.
// "http://localhost:8000/v1"; requests go to <base_url>/chat/completions
// and <base_url>/completions.
struct ModelEndpoint {
  std::string base_url;
  std::string model_id;
  std::optional<std::string> api_key;
  std::chrono::milliseconds timeout{120000};
  int max_parallel = 4;
  RetryPolicy retry;
};

absl::Status ValidateEndpoint(const ModelEndpoint& endpoint);

// Reads kApiKeyEnv, then OPENAI_API_KEY.
std::optional<std::string> ApiKeyFromEnvironment();

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Posts JSON bodies to paths relative to the endpoint's base URL. Returns
// Unavailable when no HTTP response was received.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual absl::StatusOr<HttpResponse> Post(std::string_view path,
                                            const std::string& body) = 0;
};

// cpp-httplib transport. One connection per request, so it is safe to call
// from several threads.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(ModelEndpoint endpoint);
  absl::StatusOr<HttpResponse> Post(std::string_view path,
                                    const std::string& body) override;

 private:
  ModelEndpoint endpoint_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

enum class RequestKind { kGeneration, kInput };

// One unit of harvesting work.
struct TraceRequest {
  RequestKind kind = RequestKind::kGeneration;
  std::string question_id;
  // Question for generation requests; original text for input requests
  // (lowercased by the client for the lowercased variant).
  std::string text;
  Label label = Label::kUnknown;
  Variant variant = Variant::kOriginal;
  DecodeParams decode;
};

struct BatchFailure {
  size_t index = 0;
  std::string question_id;
  absl::Status status;
};

struct BatchResult {
  // In request order; empty where the request failed.
  std::vector<std::optional<TraceRecord>> traces;
  std::vector<BatchFailure> failures;
};

// Called after every finished request with (finished, total). Calls are
// serialized.
using ProgressSink = std::function<void(size_t, size_t)>;

// Harvests traces from an endpoint. Greedy generation is requested as
// temperature 0 with logprobs; the recorded logprob is that of the emitted
// token. Successful model outputs are cached by CacheKey, and concurrent
// requests for one key are serialized, so each key reaches the network at
// most once while its cache entry survives.
//
// Capability problems (no logprobs, no echo) come back as Unimplemented;
// transport failures after retries as Unavailable.
class InferenceClient {
 public:
  InferenceClient(ModelEndpoint endpoint, std::unique_ptr<Transport> transport,
                  std::optional<std::filesystem::path> cache_dir);

  absl::StatusOr<GenerationTrace> FetchGeneration(std::string question_id,
                                                  std::string_view question,
                                                  Label label,
                                                  const DecodeParams& decode);

  absl::StatusOr<InputTrace> FetchInputLogprobs(std::string question_id,
                                                std::string_view text,
                                                Variant variant);

  absl::StatusOr<TraceRecord> Fetch(const TraceRequest& request);

  // Runs requests with at most max_parallel in flight. Failures are
  // recorded per item; the batch always completes.
  BatchResult RunBatch(std::span<const TraceRequest> requests,
                       const ProgressSink& progress = nullptr);

  CacheKey KeyFor(const TraceRequest& request) const;
  bool IsCached(const TraceRequest& request) const;

  // Number of HTTP requests attempted so far.
  int64_t network_calls() const { return network_calls_.load(); }

  const ModelEndpoint& endpoint() const { return endpoint_; }

 private:
  absl::StatusOr<std::string> CachedOrFetch(
      const CacheKey& key,
      const std::function<absl::StatusOr<std::string>()>& fetch);
  absl::StatusOr<HttpResponse> PostWithRetry(std::string_view path,
                                             const std::string& body);
  absl::StatusOr<std::string> RequestGeneration(std::string_view question,
                                                const DecodeParams& decode);
  absl::StatusOr<std::string> RequestInput(std::string_view text);
  std::shared_ptr<std::mutex> KeyMutex(const std::string& digest);

  ModelEndpoint endpoint_;
  std::unique_ptr<Transport> transport_;
  std::optional<DiskCache> cache_;
  std::atomic<int64_t> network_calls_{0};
  std::mutex key_mutexes_mu_;
  std::map<std::string, std::shared_ptr<std::mutex>> key_mutexes_;
};

// Request bodies and response decoding, exposed for tests.
std::string ChatRequestBody(std::string_view model_id,
                            std::string_view question,
                            const DecodeParams& decode);
std::string EchoRequestBody(std::string_view model_id, std::string_view text);
absl::StatusOr<std::vector<TokenProb>> ParseChatLogprobs(std::string_view body);
absl::StatusOr<std::vector<InputToken>> ParseEchoLogprobs(std::string_view body,
                                                          std::string_view text);

}  // namespace distill_audit

#endif  // DISTILL_AUDIT_INFERENCE_CLIENT_H_
