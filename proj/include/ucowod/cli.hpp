// Copyright 2026 The ucowod Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <ostream>

namespace ucowod {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFile = 1,    // missing or unreadable file
  kExitSchema = 2,  // input violates its schema
  kExitFailed = 3,  // the operation itself failed
  kExitUsage = 64,
};

/// Entry point behind the `ucowod` binary:
///   simulate | train | refine | eval
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ucowod
