// Copyright 2026 The advopt Authors
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

#ifndef ADVOPT_TOOLS_CLI_H_
#define ADVOPT_TOOLS_CLI_H_

// The advopt command line, as a library so that tests can drive it
// in-process.

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace advopt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs one invocation. `args` excludes the program name. Help goes to
// `out`; the resolved config, logs and errors go to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// Long flag names (without dashes) registered for each subcommand.
std::map<std::string, std::vector<std::string>> FlagTable();

// Targets accepted by `reproduce`.
std::vector<std::string> ReproduceTargets();

// Keeps large matrix buffers on the heap instead of fresh mmap regions, so
// tape-heavy runs do not pay a page fault per allocation. Call once at
// process start; no-op outside glibc.
void TuneAllocator();

}  // namespace advopt::cli

#endif  // ADVOPT_TOOLS_CLI_H_
