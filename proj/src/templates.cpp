// SPDX-License-Identifier: Apache-2.0
#include "tir/templates.hpp"

#include <fstream>
#include <sstream>

#include "tir/error.hpp"
#include "tir/protocol.hpp"

namespace tir {

namespace {

constexpr std::string_view kToolText =
    "You solve problems step by step. Reason inside <think> ... </think>.\n"
    "When a tool would help, call it and wait for its output, which appears "
    "inside <result> ... </result>.\n"
    "{tools}\n"
    "Use a tool only when it is needed. Put the final answer in \\boxed{} "
    "exactly once, after your reasoning.\n\n"
    "Question: {question}\n";

constexpr std::string_view kStandaloneText =
    "You solve problems step by step. Reason inside <think> ... </think>, "
    "then put the final answer in \\boxed{} exactly once.\n\n"
    "Question: {question}\n";

constexpr std::string_view kTools =
    "Available tools:\n"
    "- <search> query </search> looks up the query in a text corpus and "
    "returns the best matching passages.\n"
    "- <code> program </code> runs a short program and returns what it "
    "prints, or the error message.";

bool mentions(std::string_view text, std::string_view needle) {
    return text.find(needle) != std::string_view::npos;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

}  // namespace

std::string_view to_string(PromptMode mode) noexcept {
    return mode == PromptMode::ToolAssisted ? "tool" : "standalone";
}

std::optional<PromptMode> parse_prompt_mode(std::string_view name) noexcept {
    if (name == "tool") return PromptMode::ToolAssisted;
    if (name == "standalone") return PromptMode::Standalone;
    return std::nullopt;
}

std::string_view tool_descriptions() noexcept {
    return kTools;
}

void PromptTemplate::validate() const {
    std::string expanded = text;
    if (mode == PromptMode::ToolAssisted) replace_all(expanded, "{tools}", kTools);
    const bool search = mentions(expanded, tags::kSearchOpen);
    const bool code = mentions(expanded, tags::kCodeOpen);
    if (mode == PromptMode::ToolAssisted && !(search && code)) {
        throw Error(ErrorCode::InvalidConfig, "tool-assisted template must mention <search> and <code>");
    }
    if (mode == PromptMode::Standalone && (search || code)) {
        throw Error(ErrorCode::InvalidConfig, "standalone template must not mention tool tags");
    }
    if (!mentions(expanded, "\\boxed{")) throw Error(ErrorCode::InvalidConfig, "template must ask for a \\boxed{} answer");
    if (!mentions(expanded, "{question}")) throw Error(ErrorCode::InvalidConfig, "template has no {question} placeholder");
}

std::string PromptTemplate::render(std::string_view question) const {
    std::string out = text;
    replace_all(out, "{tools}", mode == PromptMode::ToolAssisted ? kTools : std::string_view{});
    // substituted last so braces in the question are never expanded
    replace_all(out, "{question}", question);
    return out;
}

PromptTemplate default_template(PromptMode mode) {
    return PromptTemplate{mode, std::string(mode == PromptMode::ToolAssisted ? kToolText : kStandaloneText)};
}

PromptTemplate load_template(const std::filesystem::path& path, PromptMode mode) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    PromptTemplate t{mode, buf.str()};
    t.validate();
    return t;
}

}  // namespace tir
