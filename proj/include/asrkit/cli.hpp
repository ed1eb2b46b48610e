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

#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace asrkit::cli {

enum ExitStatus : int {
  kOk = 0,
  kUsageError = 1,
  kDataError = 2,
  kNumericalError = 3,
};

// Test seams. perturb_gradient, when set, is applied to every analytic
// gradient before `loss --check` verifies it.
struct Hooks {
  std::function<void(std::vector<double>&)> perturb_gradient;
};

// Runs one invocation; args exclude the program name. Data goes to `out` (or
// --out files, written via temp file + rename only on success), diagnostics
// to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err, const Hooks& hooks = {});

}  // namespace asrkit::cli
