// SPDX-License-Identifier: Apache-2.0
#include "tir/error.hpp"

namespace tir {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::UnbalancedTag: return "UnbalancedTag";
        case ErrorCode::NestedTag: return "NestedTag";
        case ErrorCode::UnknownTag: return "UnknownTag";
        case ErrorCode::UnexpectedResult: return "UnexpectedResult";
        case ErrorCode::MultipleBoxedAnswers: return "MultipleBoxedAnswers";
        case ErrorCode::TrailingGarbageAfterAnswer: return "TrailingGarbageAfterAnswer";
        case ErrorCode::ProtocolViolation: return "ProtocolViolation";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::CallBudgetExceeded: return "CallBudgetExceeded";
        case ErrorCode::MalformedCorpus: return "MalformedCorpus";
        case ErrorCode::EvaluatorMismatch: return "EvaluatorMismatch";
        case ErrorCode::InvalidConstraint: return "InvalidConstraint";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::MalformedLog: return "MalformedLog";
        case ErrorCode::GroupTooSmall: return "GroupTooSmall";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DivergenceDetected: return "DivergenceDetected";
        case ErrorCode::MalformedTask: return "MalformedTask";
        case ErrorCode::BackendUnavailable: return "BackendUnavailable";
        case ErrorCode::AuthenticationFailed: return "AuthenticationFailed";
        case ErrorCode::ResponseSchemaError: return "ResponseSchemaError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& message, std::size_t line) {
    std::string out(to_string(code));
    if (line != 0) {
        out += " (line " + std::to_string(line) + ")";
    }
    if (!message.empty()) {
        out += ": " + message;
    }
    return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::size_t line)
    : std::runtime_error(compose(code, message, line)), code_(code), line_(line), message_(message) {}

}  // namespace tir
