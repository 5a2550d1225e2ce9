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

#include "distill_audit/disk_cache.h"

#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>
#include <thread>

#include "distill_audit/text_util.h"
#include "json.hpp"

namespace distill_audit {

CacheKey MakeCacheKey(std::string_view model_id, std::string_view kind,
                      std::string_view prompt, const DecodeParams* decode) {
  // nlohmann::json keeps object keys sorted, which makes dump() canonical.
  nlohmann::json canonical = nlohmann::json::object();
  canonical["model_id"] = model_id;
  canonical["kind"] = kind;
  canonical["prompt"] = prompt;
  if (decode != nullptr) {
    canonical["decode"] = {
        {"strategy", DecodeStrategyName(decode->strategy)},
        {"max_tokens", decode->max_tokens},
        {"system_prompt", decode->system_prompt},
    };
  }
  return CacheKey{Sha256Hex(canonical.dump())};
}

DiskCache::DiskCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path DiskCache::PathFor(const CacheKey& key) const {
  return dir_ / key.digest.substr(0, 2) / StrCat(key.digest, ".json");
}

std::optional<std::string> DiskCache::Lookup(const CacheKey& key) const {
  std::ifstream in(PathFor(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json entry =
      nlohmann::json::parse(buffer.str(), nullptr, /*allow_exceptions=*/false);
  if (entry.is_discarded() || !entry.is_object()) return std::nullopt;
  auto digest = entry.find("key");
  auto hash = entry.find("payload_sha256");
  auto payload = entry.find("payload");
  if (digest == entry.end() || hash == entry.end() || payload == entry.end() ||
      !digest->is_string() || !hash->is_string() || !payload->is_string()) {
    return std::nullopt;
  }
  if (digest->get<std::string>() != key.digest) return std::nullopt;
  std::string data = payload->get<std::string>();
  if (Sha256Hex(data) != hash->get<std::string>()) return std::nullopt;
  return data;
}

absl::Status DiskCache::Store(const CacheKey& key,
                              std::string_view payload) const {
  const std::filesystem::path path = PathFor(key);
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) {
    return absl::PermissionDeniedError(StrCat(
        "cannot create cache directory ", path.parent_path().string(), ": ",
        ec.message()));
  }
  nlohmann::json entry = {
      {"key", key.digest},
      {"payload_sha256", Sha256Hex(payload)},
      {"payload", payload},
  };
  static std::atomic<uint64_t> counter{0};
  const std::filesystem::path temp = path.parent_path() / StrCat(
      ".", key.digest, ".",
      std::hash<std::thread::id>{}(std::this_thread::get_id()), ".",
      counter++, ".tmp");
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out << entry.dump() << '\n';
    if (!out) {
      return absl::DataLossError(
          StrCat("cannot write cache entry ", temp.string()));
    }
  }
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    std::filesystem::remove(temp, ec);
    return absl::DataLossError(
        StrCat("cannot commit cache entry ", path.string()));
  }
  return absl::OkStatus();
}

}  // namespace distill_audit
