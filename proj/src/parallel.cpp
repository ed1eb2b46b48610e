// Copyright 2026 The asrkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "asrkit/parallel.hpp"

#include <cstdlib>
#include <string>

#include "asrkit/error.hpp"

namespace asrkit {

unsigned ResolveThreads(std::optional<int> requested) {
  if (requested) {
    if (*requested < 1) throw ConfigError("--threads must be >= 1");
    return static_cast<unsigned>(*requested);
  }
  if (const char* env = std::getenv("ASRKIT_THREADS"); env && *env) {
    int value = 0;
    try {
      value = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("ASRKIT_THREADS is not an integer: ") + env);
    }
    if (value < 1) throw ConfigError("ASRKIT_THREADS must be >= 1");
    return static_cast<unsigned>(value);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace asrkit
