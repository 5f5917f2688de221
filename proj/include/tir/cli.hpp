// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

#include "tir/error.hpp"

namespace tir {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// 1 for bad input or configuration, 2 for failures while running.
int exit_code_for(ErrorCode code) noexcept;

/// Subcommands: rollout, score, train-toy, eval, index. Results go to `out`
/// (or the file named by an output flag), diagnostics to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tir
