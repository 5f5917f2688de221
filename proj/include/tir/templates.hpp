// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace tir {

enum class PromptMode { ToolAssisted, Standalone };

std::string_view to_string(PromptMode mode) noexcept;  // "tool", "standalone"
std::optional<PromptMode> parse_prompt_mode(std::string_view name) noexcept;

/// Prompt text with `{question}` and `{tools}` placeholders.
struct PromptTemplate {
    PromptMode mode = PromptMode::ToolAssisted;
    std::string text;

    /// Throws InvalidConfig when the text breaks the mode's contract: a
    /// tool-assisted prompt must mention both tool tags, a standalone prompt
    /// neither, and both must ask for a \boxed{} answer and contain {question}.
    void validate() const;

    std::string render(std::string_view question) const;
};

/// Tool descriptions substituted for `{tools}` in tool-assisted prompts.
std::string_view tool_descriptions() noexcept;

PromptTemplate default_template(PromptMode mode);

/// Reads a template file and validates it against `mode`.
PromptTemplate load_template(const std::filesystem::path& path, PromptMode mode);

}  // namespace tir
