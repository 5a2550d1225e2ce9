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

#include "distill_audit/inference_client.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "absl/strings/match.h"
#include "distill_audit/status_macros.h"
#include "distill_audit/text_util.h"
#include "httplib.h"
#include "json.hpp"

namespace distill_audit {
namespace {

using Json = nlohmann::ordered_json;

// Servers occasionally report tiny positive logprobs for saturated tokens.
constexpr double kPositiveLogprobSlack = 1e-6;

bool Retryable(const absl::Status& status) {
  return absl::IsUnavailable(status) || absl::IsDeadlineExceeded(status) ||
         absl::IsResourceExhausted(status);
}

absl::Status StatusForHttp(const HttpResponse& response) {
  if (response.status >= 200 && response.status < 300) {
    return absl::OkStatus();
  }
  const std::string message =
      StrCat("HTTP ", response.status, ": ", response.body.substr(0, 300));
  if (response.status == 429) return absl::ResourceExhaustedError(message);
  if (response.status >= 500) return absl::UnavailableError(message);
  return absl::FailedPreconditionError(message);
}

absl::StatusOr<double> CheckedLogprob(const Json& value) {
  if (!value.is_number()) {
    return absl::InvalidArgumentError("logprob must be a number");
  }
  double lp = value.get<double>();
  if (lp > 0.0 && lp <= kPositiveLogprobSlack) lp = 0.0;
  if (!(lp <= 0.0)) {
    return absl::InvalidArgumentError(
        StrCat("endpoint returned logprob ", lp, " > 0"));
  }
  return lp;
}

absl::Status NoGenerationLogprobs() {
  return absl::UnimplementedError(
      "endpoint returned no logprobs; enable logprobs on the server "
      "(chat/completions with \"logprobs\": true)");
}

absl::Status NoEchoLogprobs() {
  return absl::UnimplementedError(
      "endpoint did not return echoed prompt logprobs; it does not support "
      "completions with echo. Supply input traces through trace files "
      "instead");
}

std::string TokensPayload(const std::vector<TokenProb>& tokens) {
  Json payload = Json::array();
  for (const TokenProb& token : tokens) {
    payload.push_back(Json{{"t", token.text}, {"lp", token.logprob}});
  }
  return payload.dump();
}

std::string InputPayload(const std::vector<InputToken>& tokens) {
  Json payload = Json::array();
  for (const InputToken& token : tokens) {
    payload.push_back(
        Json{{"t", token.text},
             {"lp", token.logprob ? Json(*token.logprob) : Json()}});
  }
  return payload.dump();
}

}  // namespace

absl::Status ValidateEndpoint(const ModelEndpoint& endpoint) {
  if (endpoint.base_url.empty()) {
    return absl::InvalidArgumentError("endpoint base_url is empty");
  }
  if (endpoint.model_id.empty()) {
    return absl::InvalidArgumentError("endpoint model_id is empty");
  }
  if (endpoint.max_parallel < 1) {
    return absl::InvalidArgumentError("max_parallel must be >= 1");
  }
  if (endpoint.timeout.count() <= 0) {
    return absl::InvalidArgumentError("timeout must be positive");
  }
  if (endpoint.retry.max_attempts < 1) {
    return absl::InvalidArgumentError("retry.max_attempts must be >= 1");
  }
  return absl::OkStatus();
}

std::optional<std::string> ApiKeyFromEnvironment() {
  for (const char* name : {kApiKeyEnv.data(), "OPENAI_API_KEY"}) {
    const char* value = std::getenv(name);
    if (value != nullptr && *value != '\0') return std::string(value);
  }
  return std::nullopt;
}

HttpTransport::HttpTransport(ModelEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {
  std::string_view url = endpoint_.base_url;
  const size_t scheme_end = url.find("://");
  const size_t host_start = scheme_end == std::string_view::npos
                                ? 0
                                : scheme_end + 3;
  const size_t path_start = url.find('/', host_start);
  scheme_host_port_ = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    path_prefix_ = std::string(url.substr(path_start));
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
      path_prefix_.pop_back();
    }
  }
}

absl::StatusOr<HttpResponse> HttpTransport::Post(std::string_view path,
                                                 const std::string& body) {
  httplib::Client client(scheme_host_port_);
  if (!client.is_valid()) {
    return absl::InvalidArgumentError(
        StrCat("invalid endpoint URL ", endpoint_.base_url));
  }
  const auto seconds =
      std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
      endpoint_.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  httplib::Headers headers;
  if (endpoint_.api_key.has_value()) {
    headers.emplace("Authorization", StrCat("Bearer ", *endpoint_.api_key));
  }
  const std::string full_path = StrCat(path_prefix_, path);
  httplib::Result result =
      client.Post(full_path, headers, body, "application/json");
  if (!result) {
    return absl::UnavailableError(StrCat(
        "POST ", endpoint_.base_url, path, " failed: ",
        httplib::to_string(result.error())));
  }
  return HttpResponse{result->status, result->body};
}

std::string ChatRequestBody(std::string_view model_id,
                            std::string_view question,
                            const DecodeParams& decode) {
  Json messages = Json::array();
  if (!decode.system_prompt.empty()) {
    messages.push_back(Json{{"role", "system"}, {"content", decode.system_prompt}});
  }
  messages.push_back(Json{{"role", "user"}, {"content", question}});
  Json body = Json::object();
  body["model"] = model_id;
  body["messages"] = std::move(messages);
  body["temperature"] = 0;
  body["max_tokens"] = decode.max_tokens;
  body["logprobs"] = true;
  body["top_logprobs"] = 0;
  body["n"] = 1;
  body["stream"] = false;
  return body.dump();
}

std::string EchoRequestBody(std::string_view model_id, std::string_view text) {
  Json body = Json::object();
  body["model"] = model_id;
  body["prompt"] = text;
  // One generated token is requested because several servers reject zero;
  // it is dropped when the echo is decoded.
  body["max_tokens"] = 1;
  body["temperature"] = 0;
  body["echo"] = true;
  body["logprobs"] = 1;
  body["stream"] = false;
  return body.dump();
}

absl::StatusOr<std::vector<TokenProb>> ParseChatLogprobs(std::string_view body) {
  Json response = Json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (response.is_discarded() || !response.is_object()) {
    return absl::InvalidArgumentError("endpoint response is not a JSON object");
  }
  auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty()) {
    return absl::InvalidArgumentError("endpoint response has no choices");
  }
  const Json& choice = (*choices)[0];
  auto logprobs = choice.find("logprobs");
  if (logprobs == choice.end() || !logprobs->is_object()) {
    return NoGenerationLogprobs();
  }
  std::vector<TokenProb> tokens;
  if (auto content = logprobs->find("content"); content != logprobs->end()) {
    if (content->is_null()) return NoGenerationLogprobs();
    if (!content->is_array()) {
      return absl::InvalidArgumentError("logprobs.content must be an array");
    }
    for (const Json& entry : *content) {
      auto token = entry.find("token");
      auto lp = entry.find("logprob");
      if (token == entry.end() || !token->is_string() || lp == entry.end()) {
        return absl::InvalidArgumentError(
            "logprobs.content entries need token and logprob");
      }
      DA_ASSIGN_OR_RETURN(double logprob, CheckedLogprob(*lp));
      tokens.push_back(TokenProb{token->get<std::string>(), logprob});
    }
    return tokens;
  }
  // Legacy completions-style layout.
  auto names = logprobs->find("tokens");
  auto values = logprobs->find("token_logprobs");
  if (names == logprobs->end() || values == logprobs->end() ||
      !names->is_array() || !values->is_array() ||
      names->size() != values->size()) {
    return NoGenerationLogprobs();
  }
  for (size_t i = 0; i < names->size(); ++i) {
    if (!(*names)[i].is_string()) {
      return absl::InvalidArgumentError("logprobs.tokens must be strings");
    }
    DA_ASSIGN_OR_RETURN(double logprob, CheckedLogprob((*values)[i]));
    tokens.push_back(TokenProb{(*names)[i].get<std::string>(), logprob});
  }
  return tokens;
}

absl::StatusOr<std::vector<InputToken>> ParseEchoLogprobs(
    std::string_view body, std::string_view text) {
  Json response = Json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (response.is_discarded() || !response.is_object()) {
    return absl::InvalidArgumentError("endpoint response is not a JSON object");
  }
  auto choices = response.find("choices");
  if (choices == response.end() || !choices->is_array() || choices->empty()) {
    return absl::InvalidArgumentError("endpoint response has no choices");
  }
  const Json& choice = (*choices)[0];
  auto logprobs = choice.find("logprobs");
  if (logprobs == choice.end() || !logprobs->is_object()) return NoEchoLogprobs();
  auto names = logprobs->find("tokens");
  auto values = logprobs->find("token_logprobs");
  if (names == logprobs->end() || values == logprobs->end() ||
      !names->is_array() || !values->is_array() ||
      names->size() != values->size() || names->empty()) {
    return NoEchoLogprobs();
  }
  // Tokens are taken while their concatenation is still inside the prompt;
  // anything after it was generated.
  std::vector<InputToken> tokens;
  size_t consumed = 0;
  for (size_t i = 0; i < names->size() && consumed < text.size(); ++i) {
    if (!(*names)[i].is_string()) {
      return absl::InvalidArgumentError("logprobs.tokens must be strings");
    }
    InputToken token{(*names)[i].get<std::string>(), std::nullopt};
    consumed += token.text.size();
    const Json& value = (*values)[i];
    if (i == 0) {
      // No conditioning prefix; the slot stays null even if a value is sent.
    } else if (value.is_null()) {
      return absl::InvalidArgumentError(
          StrCat("echo logprob missing at position ", i));
    } else {
      DA_ASSIGN_OR_RETURN(double logprob, CheckedLogprob(value));
      token.logprob = logprob;
    }
    tokens.push_back(std::move(token));
  }
  return tokens;
}

InferenceClient::InferenceClient(ModelEndpoint endpoint,
                                 std::unique_ptr<Transport> transport,
                                 std::optional<std::filesystem::path> cache_dir)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {
  if (cache_dir.has_value()) cache_.emplace(*cache_dir);
}

std::shared_ptr<std::mutex> InferenceClient::KeyMutex(
    const std::string& digest) {
  std::lock_guard<std::mutex> lock(key_mutexes_mu_);
  auto& mu = key_mutexes_[digest];
  if (mu == nullptr) mu = std::make_shared<std::mutex>();
  return mu;
}

absl::StatusOr<std::string> InferenceClient::CachedOrFetch(
    const CacheKey& key,
    const std::function<absl::StatusOr<std::string>()>& fetch) {
  std::shared_ptr<std::mutex> mu = KeyMutex(key.digest);
  std::lock_guard<std::mutex> lock(*mu);
  if (cache_.has_value()) {
    if (std::optional<std::string> hit = cache_->Lookup(key)) return *hit;
  }
  DA_ASSIGN_OR_RETURN(std::string payload, fetch());
  if (cache_.has_value()) DA_RETURN_IF_ERROR(cache_->Store(key, payload));
  return payload;
}

absl::StatusOr<HttpResponse> InferenceClient::PostWithRetry(
    std::string_view path, const std::string& body) {
  std::mt19937_64 jitter_rng(std::random_device{}());
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  absl::Status last;
  for (int attempt = 0; attempt < endpoint_.retry.max_attempts; ++attempt) {
    if (attempt > 0) {
      const double scale = std::ldexp(1.0, attempt - 1) * jitter(jitter_rng);
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
          static_cast<double>(endpoint_.retry.backoff_base.count()) * scale));
    }
    ++network_calls_;
    absl::StatusOr<HttpResponse> response = transport_->Post(path, body);
    if (response.ok()) {
      last = StatusForHttp(*response);
      if (last.ok()) return response;
    } else {
      last = response.status();
    }
    if (!Retryable(last)) return last;
  }
  return absl::UnavailableError(
      StrCat("giving up after ", endpoint_.retry.max_attempts,
                   " attempts: ", last.message()));
}

absl::StatusOr<std::string> InferenceClient::RequestGeneration(
    std::string_view question, const DecodeParams& decode) {
  DA_ASSIGN_OR_RETURN(
      HttpResponse response,
      PostWithRetry("/chat/completions",
                    ChatRequestBody(endpoint_.model_id, question, decode)));
  DA_ASSIGN_OR_RETURN(std::vector<TokenProb> tokens,
                      ParseChatLogprobs(response.body));
  if (tokens.size() > static_cast<size_t>(decode.max_tokens)) {
    tokens.resize(static_cast<size_t>(decode.max_tokens));
  }
  return TokensPayload(tokens);
}

absl::StatusOr<std::string> InferenceClient::RequestInput(
    std::string_view text) {
  absl::StatusOr<HttpResponse> response =
      PostWithRetry("/completions", EchoRequestBody(endpoint_.model_id, text));
  if (!response.ok()) {
    if (absl::IsFailedPrecondition(response.status()) &&
        absl::StrContains(response.status().message(), "echo")) {
      return NoEchoLogprobs();
    }
    return response.status();
  }
  DA_ASSIGN_OR_RETURN(std::vector<InputToken> tokens,
                      ParseEchoLogprobs(response->body, text));
  return InputPayload(tokens);
}

CacheKey InferenceClient::KeyFor(const TraceRequest& request) const {
  if (request.kind == RequestKind::kGeneration) {
    return MakeCacheKey(endpoint_.model_id, kGenerationRequest, request.text,
                        &request.decode);
  }
  const std::string text = request.variant == Variant::kLowercased
                               ? Utf8Lowercase(request.text)
                               : request.text;
  return MakeCacheKey(endpoint_.model_id, kInputRequest, text, nullptr);
}

bool InferenceClient::IsCached(const TraceRequest& request) const {
  return cache_.has_value() && cache_->Lookup(KeyFor(request)).has_value();
}

absl::StatusOr<GenerationTrace> InferenceClient::FetchGeneration(
    std::string question_id, std::string_view question, Label label,
    const DecodeParams& decode) {
  DA_RETURN_IF_ERROR(ValidateDecodeParams(decode));
  const CacheKey key =
      MakeCacheKey(endpoint_.model_id, kGenerationRequest, question, &decode);
  DA_ASSIGN_OR_RETURN(std::string payload, CachedOrFetch(key, [&] {
                        return RequestGeneration(question, decode);
                      }));
  Json tokens = Json::parse(payload);
  GenerationTrace trace;
  trace.question_id = std::move(question_id);
  trace.question_text = std::string(question);
  trace.label = label;
  trace.model_id = endpoint_.model_id;
  trace.decode = decode;
  for (const Json& entry : tokens) {
    trace.generated.push_back(
        TokenProb{entry["t"].get<std::string>(), entry["lp"].get<double>()});
  }
  DA_RETURN_IF_ERROR(ValidateGenerationTrace(trace));
  return trace;
}

absl::StatusOr<InputTrace> InferenceClient::FetchInputLogprobs(
    std::string question_id, std::string_view text, Variant variant) {
  std::string scored = variant == Variant::kLowercased ? Utf8Lowercase(text)
                                                       : std::string(text);
  const CacheKey key =
      MakeCacheKey(endpoint_.model_id, kInputRequest, scored, nullptr);
  DA_ASSIGN_OR_RETURN(std::string payload, CachedOrFetch(key, [&] {
                        return RequestInput(scored);
                      }));
  Json tokens = Json::parse(payload);
  InputTrace trace;
  trace.question_id = std::move(question_id);
  trace.text = std::move(scored);
  trace.variant = variant;
  for (const Json& entry : tokens) {
    InputToken token{entry["t"].get<std::string>(), std::nullopt};
    if (!entry["lp"].is_null()) token.logprob = entry["lp"].get<double>();
    trace.input_tokens.push_back(std::move(token));
  }
  DA_RETURN_IF_ERROR(ValidateInputTrace(trace));
  return trace;
}

absl::StatusOr<TraceRecord> InferenceClient::Fetch(const TraceRequest& request) {
  if (request.kind == RequestKind::kGeneration) {
    DA_ASSIGN_OR_RETURN(GenerationTrace trace,
                        FetchGeneration(request.question_id, request.text,
                                        request.label, request.decode));
    return TraceRecord(std::move(trace));
  }
  DA_ASSIGN_OR_RETURN(InputTrace trace,
                      FetchInputLogprobs(request.question_id, request.text,
                                         request.variant));
  return TraceRecord(std::move(trace));
}

BatchResult InferenceClient::RunBatch(std::span<const TraceRequest> requests,
                                      const ProgressSink& progress) {
  BatchResult result;
  result.traces.resize(requests.size());
  std::vector<absl::Status> statuses(requests.size());
  std::atomic<size_t> next{0};
  std::mutex progress_mu;
  size_t finished = 0;
  const size_t workers = std::min<size_t>(
      requests.size(), static_cast<size_t>(std::max(1, endpoint_.max_parallel)));
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (size_t i = next++; i < requests.size(); i = next++) {
          absl::StatusOr<TraceRecord> trace = Fetch(requests[i]);
          if (trace.ok()) {
            result.traces[i] = *std::move(trace);
          } else {
            statuses[i] = trace.status();
          }
          std::lock_guard<std::mutex> lock(progress_mu);
          ++finished;
          if (progress) progress(finished, requests.size());
        }
      });
    }
  }
  for (size_t i = 0; i < requests.size(); ++i) {
    if (!statuses[i].ok()) {
      result.failures.push_back(
          BatchFailure{i, requests[i].question_id, statuses[i]});
    }
  }
  return result;
}

}  // namespace distill_audit
