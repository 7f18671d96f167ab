// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace graphroute::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

/// Runs one command line (args[0] is the program name). Errors are reported
/// on `err` and mapped to ExitCode.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace graphroute::cli
