// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tir {

enum class ErrorCode {
    // tag protocol
    UnbalancedTag,
    NestedTag,
    UnknownTag,
    UnexpectedResult,
    MultipleBoxedAnswers,
    TrailingGarbageAfterAnswer,
    ProtocolViolation,
    // tool environment
    DuplicateId,
    CallBudgetExceeded,
    MalformedCorpus,
    // reward / metrics
    EvaluatorMismatch,
    InvalidConstraint,
    InvalidConfig,
    MalformedLog,
    // trainer
    GroupTooSmall,
    ShapeMismatch,
    DivergenceDetected,
    // harness
    MalformedTask,
    BackendUnavailable,
    AuthenticationFailed,
    ResponseSchemaError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a machine-checkable code.
/// Errors tied to an input file also carry the 1-based line number.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::size_t line = 0);

    ErrorCode code() const noexcept { return code_; }
    std::size_t line() const noexcept { return line_; }
    /// The message without the code and line prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::size_t line_;
    std::string message_;
};

}  // namespace tir
