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

#ifndef DISTILL_AUDIT_TOOLS_CLI_H_
#define DISTILL_AUDIT_TOOLS_CLI_H_

#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "distill_audit/inference_client.h"
#include "json.hpp"

namespace distill_audit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitCapability = 3;

using TransportFactory =
    std::function<std::unique_ptr<Transport>(const ModelEndpoint&)>;

struct Environment {
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
  // Builds the transport for `fetch`. Unset means HttpTransport.
  TransportFactory transport_factory;
};

// Every config field with its default value.
nlohmann::ordered_json DefaultConfig();

// Runs one command line; args[0] is the program name. Returns the process
// exit code.
int Run(const std::vector<std::string>& args, const Environment& env = {});

}  // namespace distill_audit::cli

#endif  // DISTILL_AUDIT_TOOLS_CLI_H_
