// SPDX-License-Identifier: Apache-2.0
//
// Built-in sandboxed interpreter for the code tool.
//
// Accepts a small Python-like language: exact integer and rational
// arithmetic (floats only from float literals or float()), strings,
// assignment and augmented assignment, if/elif/else, while, for over
// range(...), break/continue/pass, print(...), and a handful of math
// builtins (abs min max int float round sqrt isqrt gcd factorial floor ceil
// log exp sin cos, constants pi and e; `import math` and the `math.` prefix
// are accepted). Division of exact values stays exact, so print(3/4) shows
// "3/4".
//
// Every statement and every expression node costs one step; execution is
// aborted once the step budget is spent. There is no I/O besides print.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tir {

struct ExecutionOutcome {
    enum class Kind { Output, Failure };

    Kind kind = Kind::Output;
    std::string text;  // printed output, or the failure message

    static ExecutionOutcome output(std::string text) { return {Kind::Output, std::move(text)}; }
    static ExecutionOutcome failure(std::string message) { return {Kind::Failure, std::move(message)}; }
    bool ok() const noexcept { return kind == Kind::Output; }

    friend bool operator==(const ExecutionOutcome&, const ExecutionOutcome&) = default;
};

/// Runs a program. Print calls produce one line each; the returned output
/// joins them with '\n' and has no trailing newline. Failures are reported
/// as "Kind: detail", e.g. "DivisionByZero: division by zero",
/// "SyntaxError: ... (line 3)" or "StepBudgetExceeded: ...".
ExecutionOutcome run_program(std::string_view source, std::uint64_t max_steps);

}  // namespace tir
