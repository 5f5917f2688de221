// SPDX-License-Identifier: Apache-2.0
//
// Rollout transcript grammar.
//
//   <think>...</think>      free-form reasoning
//   <search>...</search>    search tool call (payload = query)
//   <code>...</code>        code tool call (payload = program)
//   <result>...</result>    environment output, only directly after a call
//   \boxed{...}             final answer, in the untagged tail of the transcript
//
// Untagged text between elements is kept as a "bare" think segment so that
// rendering a parsed transcript reproduces the input byte-for-byte.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tir {

enum class ToolKind { Search, Code };

enum class TaskDomain { KnowledgeIntensive, Math, OpenDomain };

std::string_view to_string(ToolKind tool) noexcept;
std::string_view to_string(TaskDomain domain) noexcept;
std::optional<ToolKind> parse_tool_kind(std::string_view name) noexcept;
std::optional<TaskDomain> parse_task_domain(std::string_view name) noexcept;

namespace tags {
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kSearchOpen = "<search>";
inline constexpr std::string_view kSearchClose = "</search>";
inline constexpr std::string_view kCodeOpen = "<code>";
inline constexpr std::string_view kCodeClose = "</code>";
inline constexpr std::string_view kResultOpen = "<result>";
inline constexpr std::string_view kResultClose = "</result>";
inline constexpr std::string_view kBoxed = "\\boxed{";

std::string_view open_tag(ToolKind tool) noexcept;
std::string_view close_tag(ToolKind tool) noexcept;
}  // namespace tags

enum class SegmentType { Think, ToolCall, ToolResult, FinalAnswer };

/// How a think segment appears on the wire. Strict transcripts only contain
/// Enclosed and Bare; Unclosed is produced by lenient parsing when a tool tag
/// implicitly terminates a <think> block.
enum class ThinkForm { Enclosed, Unclosed, Bare };

struct SegmentKind {
    SegmentType type = SegmentType::Think;
    ToolKind tool = ToolKind::Search;  // meaningful only for ToolCall

    static constexpr SegmentKind think() noexcept { return {SegmentType::Think, ToolKind::Search}; }
    static constexpr SegmentKind tool_call(ToolKind t) noexcept { return {SegmentType::ToolCall, t}; }
    static constexpr SegmentKind tool_result() noexcept { return {SegmentType::ToolResult, ToolKind::Search}; }
    static constexpr SegmentKind final_answer() noexcept { return {SegmentType::FinalAnswer, ToolKind::Search}; }

    friend bool operator==(const SegmentKind& a, const SegmentKind& b) noexcept {
        return a.type == b.type && (a.type != SegmentType::ToolCall || a.tool == b.tool);
    }
};

struct Segment {
    SegmentKind kind;
    std::string text;  // payload without the surrounding tags
    bool loss_masked = false;
    ThinkForm form = ThinkForm::Enclosed;

    static Segment think(std::string text, ThinkForm form = ThinkForm::Enclosed);
    static Segment tool_call(ToolKind tool, std::string payload);
    static Segment tool_result(std::string text);
    static Segment final_answer(std::string text);

    friend bool operator==(const Segment&, const Segment&) = default;
};

struct Trajectory {
    std::string question;
    std::vector<Segment> segments;
    TaskDomain domain = TaskDomain::OpenDomain;
    std::optional<std::string> final_answer;
};

enum class ParseMode { Strict, Lenient };

/// Splits a raw transcript into segments. Strict mode throws tir::Error with
/// one of UnbalancedTag, NestedTag, UnknownTag, UnexpectedResult,
/// MultipleBoxedAnswers or TrailingGarbageAfterAnswer. Lenient mode never
/// throws; malformed spans are kept as bare think text.
std::vector<Segment> parse_transcript(std::string_view raw, ParseMode mode = ParseMode::Strict);

/// Builds a trajectory from parsed segments and fills final_answer.
Trajectory make_trajectory(std::string question, TaskDomain domain, std::vector<Segment> segments);

/// Content of the single outermost \boxed{...}; nullopt when there is no
/// occurrence, more than one, or the braces do not balance.
std::optional<std::string> extract_boxed(std::string_view text);

std::string render(std::span<const Segment> segments);
std::string render(const Trajectory& trajectory);
std::string render(const Segment& segment);

struct StopBoundary {
    ToolKind tool;
    std::size_t offset;  // byte offset of the '<' of the closing tag

    friend bool operator==(const StopBoundary&, const StopBoundary&) = default;
};

/// Earliest complete </search> or </code> in the text.
std::optional<StopBoundary> detect_stop(std::string_view text) noexcept;

/// Incremental stop detection over a chunked stream. Keeps a tail buffer long
/// enough that a closing tag split across chunks is still found; offsets are
/// relative to the start of the stream.
class StopScanner {
public:
    std::optional<StopBoundary> feed(std::string_view chunk);
    std::size_t consumed() const noexcept { return consumed_; }

private:
    std::string tail_;
    std::size_t consumed_ = 0;
};

/// Appends the environment output for the trailing tool call. Throws
/// ProtocolViolation when the last segment is not a ToolCall. Occurrences of
/// the closing result tag inside the output are neutralised so the transcript
/// stays parseable.
Trajectory inject_result(Trajectory partial, std::string_view result_text);

struct MaskSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
    bool masked = false;

    friend bool operator==(const MaskSpan&, const MaskSpan&) = default;
};

/// Byte spans tiling render(trajectory); tool results (tags included) are
/// masked. Adjacent spans with the same flag are merged.
std::vector<MaskSpan> build_loss_mask(const Trajectory& trajectory);

/// Tools invoked in order of appearance.
std::vector<ToolKind> tool_calls(const Trajectory& trajectory);

/// Turns tool calls and results into bare think text with identical bytes.
/// Used for standalone-mode rollouts, where tool tags are never executed.
Trajectory demote_tools(Trajectory trajectory);

}  // namespace tir
