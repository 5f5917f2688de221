// SPDX-License-Identifier: Apache-2.0
#include "tir/protocol.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "tir/error.hpp"

namespace tir {

std::string_view to_string(ToolKind tool) noexcept {
    return tool == ToolKind::Search ? "search" : "code";
}

std::string_view to_string(TaskDomain domain) noexcept {
    switch (domain) {
        case TaskDomain::KnowledgeIntensive: return "knowledge_intensive";
        case TaskDomain::Math: return "math";
        case TaskDomain::OpenDomain: return "open_domain";
    }
    return "open_domain";
}

std::optional<ToolKind> parse_tool_kind(std::string_view name) noexcept {
    if (name == "search") return ToolKind::Search;
    if (name == "code") return ToolKind::Code;
    return std::nullopt;
}

std::optional<TaskDomain> parse_task_domain(std::string_view name) noexcept {
    if (name == "knowledge_intensive") return TaskDomain::KnowledgeIntensive;
    if (name == "math") return TaskDomain::Math;
    if (name == "open_domain") return TaskDomain::OpenDomain;
    return std::nullopt;
}

namespace tags {
std::string_view open_tag(ToolKind tool) noexcept {
    return tool == ToolKind::Search ? kSearchOpen : kCodeOpen;
}
std::string_view close_tag(ToolKind tool) noexcept {
    return tool == ToolKind::Search ? kSearchClose : kCodeClose;
}
}  // namespace tags

Segment Segment::think(std::string text, ThinkForm form) {
    return Segment{SegmentKind::think(), std::move(text), false, form};
}
Segment Segment::tool_call(ToolKind tool, std::string payload) {
    return Segment{SegmentKind::tool_call(tool), std::move(payload), false, ThinkForm::Enclosed};
}
Segment Segment::tool_result(std::string text) {
    return Segment{SegmentKind::tool_result(), std::move(text), true, ThinkForm::Enclosed};
}
Segment Segment::final_answer(std::string text) {
    return Segment{SegmentKind::final_answer(), std::move(text), false, ThinkForm::Enclosed};
}

namespace {

enum class Tag { ThinkOpen, ThinkClose, SearchOpen, SearchClose, CodeOpen, CodeClose, ResultOpen, ResultClose };

struct TagSpelling {
    Tag tag;
    std::string_view text;
};

constexpr std::array<TagSpelling, 8> kTags = {{
    {Tag::ThinkOpen, tags::kThinkOpen},
    {Tag::ThinkClose, tags::kThinkClose},
    {Tag::SearchOpen, tags::kSearchOpen},
    {Tag::SearchClose, tags::kSearchClose},
    {Tag::CodeOpen, tags::kCodeOpen},
    {Tag::CodeClose, tags::kCodeClose},
    {Tag::ResultOpen, tags::kResultOpen},
    {Tag::ResultClose, tags::kResultClose},
}};

bool is_opening(Tag t) {
    return t == Tag::ThinkOpen || t == Tag::SearchOpen || t == Tag::CodeOpen || t == Tag::ResultOpen;
}

std::optional<TagSpelling> tag_at(std::string_view raw, std::size_t pos) {
    if (pos >= raw.size() || raw[pos] != '<') return std::nullopt;
    const auto rest = raw.substr(pos);
    for (const auto& spelling : kTags) {
        if (rest.starts_with(spelling.text)) return spelling;
    }
    return std::nullopt;
}

struct TagHit {
    std::size_t pos;
    TagSpelling spelling;
};

/// Next known tag at or after pos. With openings_only, closing tags are skipped.
std::optional<TagHit> next_tag(std::string_view raw, std::size_t pos, bool openings_only) {
    while (true) {
        pos = raw.find('<', pos);
        if (pos == std::string_view::npos) return std::nullopt;
        if (auto t = tag_at(raw, pos); t && (!openings_only || is_opening(t->tag))) {
            return TagHit{pos, *t};
        }
        ++pos;
    }
}

bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}
bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

/// Looks for an XML-ish tag (<name> or </name>) outside the closed vocabulary.
std::optional<std::string> find_unknown_tag(std::string_view text) {
    for (std::size_t i = text.find('<'); i != std::string_view::npos; i = text.find('<', i + 1)) {
        std::size_t j = i + 1;
        if (j < text.size() && text[j] == '/') ++j;
        if (j >= text.size() || !is_name_start(text[j])) continue;
        while (j < text.size() && is_name_char(text[j])) ++j;
        if (j < text.size() && text[j] == '>') {
            if (!tag_at(text, i)) return std::string(text.substr(i, j - i + 1));
        }
    }
    return std::nullopt;
}

std::size_t count_boxed(std::string_view text) {
    std::size_t n = 0;
    for (auto pos = text.find(tags::kBoxed); pos != std::string_view::npos;
         pos = text.find(tags::kBoxed, pos + 1)) {
        ++n;
    }
    return n;
}

/// Position one past the brace closing the \boxed{ at `start`, or npos.
std::size_t boxed_end(std::string_view text, std::size_t start) {
    int depth = 0;
    for (std::size_t i = start + tags::kBoxed.size() - 1; i < text.size(); ++i) {
        if (text[i] == '{') {
            ++depth;
        } else if (text[i] == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

bool all_space(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::string_view close_for(Tag open) {
    switch (open) {
        case Tag::ThinkOpen: return tags::kThinkClose;
        case Tag::SearchOpen: return tags::kSearchClose;
        case Tag::CodeOpen: return tags::kCodeClose;
        case Tag::ResultOpen: return tags::kResultClose;
        default: return {};
    }
}

[[noreturn]] void fail(ErrorCode code, std::string msg, std::size_t pos) {
    throw Error(code, msg + " at byte " + std::to_string(pos));
}

std::vector<Segment> parse_strict(std::string_view raw) {
    std::vector<Segment> segs;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        const auto tag = tag_at(raw, pos);
        if (!tag) {
            // untagged text up to the next known tag
            const auto hit = next_tag(raw, pos, false);
            const std::size_t end = hit ? hit->pos : raw.size();
            if (hit && !is_opening(hit->spelling.tag)) {
                fail(ErrorCode::UnbalancedTag, "stray " + std::string(hit->spelling.text), hit->pos);
            }
            const auto chunk = raw.substr(pos, end - pos);
            if (auto unknown = find_unknown_tag(chunk)) {
                fail(ErrorCode::UnknownTag, "unknown tag " + *unknown, pos);
            }
            const auto first_box = chunk.find(tags::kBoxed);
            if (first_box == std::string_view::npos) {
                segs.push_back(Segment::think(std::string(chunk), ThinkForm::Bare));
                pos = end;
                continue;
            }
            if (count_boxed(chunk) > 1) {
                fail(ErrorCode::MultipleBoxedAnswers, "more than one \\boxed{}", pos);
            }
            const auto box_end = boxed_end(chunk, first_box);
            if (box_end == std::string_view::npos) {
                fail(ErrorCode::UnbalancedTag, "unbalanced braces in \\boxed{}", pos + first_box);
            }
            if (!all_space(chunk.substr(box_end)) || hit) {
                fail(ErrorCode::TrailingGarbageAfterAnswer, "content after final answer", pos + box_end);
            }
            segs.push_back(Segment::final_answer(std::string(chunk)));
            pos = end;
            continue;
        }

        if (!is_opening(tag->tag)) {
            fail(ErrorCode::UnbalancedTag, "stray " + std::string(tag->text), pos);
        }
        const std::size_t body = pos + tag->text.size();
        const auto closer = close_for(tag->tag);

        if (tag->tag == Tag::ResultOpen) {
            if (segs.empty() || segs.back().kind.type != SegmentType::ToolCall) {
                fail(ErrorCode::UnexpectedResult, "<result> without a preceding tool call", pos);
            }
            const auto close = raw.find(closer, body);
            if (close == std::string_view::npos) fail(ErrorCode::UnbalancedTag, "unclosed <result>", pos);
            segs.push_back(Segment::tool_result(std::string(raw.substr(body, close - body))));
            pos = close + closer.size();
            continue;
        }

        const auto inner = next_tag(raw, body, false);
        if (!inner) fail(ErrorCode::UnbalancedTag, "unclosed " + std::string(tag->text), pos);
        if (inner->spelling.text != closer) {
            if (is_opening(inner->spelling.tag)) {
                fail(ErrorCode::NestedTag, std::string(inner->spelling.text) + " inside " + std::string(tag->text),
                     inner->pos);
            }
            fail(ErrorCode::UnbalancedTag, "mismatched " + std::string(inner->spelling.text), inner->pos);
        }
        auto content = raw.substr(body, inner->pos - body);
        if (tag->tag == Tag::ThinkOpen) {
            if (auto unknown = find_unknown_tag(content)) {
                fail(ErrorCode::UnknownTag, "unknown tag " + *unknown, body);
            }
            segs.push_back(Segment::think(std::string(content)));
        } else {
            const auto tool = tag->tag == Tag::SearchOpen ? ToolKind::Search : ToolKind::Code;
            segs.push_back(Segment::tool_call(tool, std::string(content)));
        }
        pos = inner->pos + closer.size();
    }
    return segs;
}

std::vector<Segment> parse_lenient(std::string_view raw) {
    std::vector<Segment> segs;
    std::string pending;
    auto flush = [&] {
        if (!pending.empty()) {
            segs.push_back(Segment::think(std::move(pending), ThinkForm::Bare));
            pending.clear();
        }
    };

    std::size_t pos = 0;
    while (pos < raw.size()) {
        const auto tag = tag_at(raw, pos);
        if (!tag || !is_opening(tag->tag)) {
            const auto hit = next_tag(raw, pos + 1, true);
            const std::size_t end = hit ? hit->pos : raw.size();
            pending.append(raw.substr(pos, end - pos));
            pos = end;
            continue;
        }
        const std::size_t body = pos + tag->text.size();
        switch (tag->tag) {
            case Tag::ThinkOpen: {
                // closed explicitly, or implicitly by the next tool tag
                std::size_t stop = raw.size();
                bool closed = false;
                for (auto p = raw.find('<', body); p != std::string_view::npos; p = raw.find('<', p + 1)) {
                    const auto t = tag_at(raw, p);
                    if (!t) continue;
                    if (t->tag == Tag::ThinkClose) {
                        stop = p;
                        closed = true;
                        break;
                    }
                    if (t->tag == Tag::SearchOpen || t->tag == Tag::CodeOpen) {
                        stop = p;
                        break;
                    }
                }
                flush();
                segs.push_back(Segment::think(std::string(raw.substr(body, stop - body)),
                                              closed ? ThinkForm::Enclosed : ThinkForm::Unclosed));
                pos = closed ? stop + tags::kThinkClose.size() : stop;
                break;
            }
            case Tag::SearchOpen:
            case Tag::CodeOpen: {
                const auto closer = close_for(tag->tag);
                const auto close = raw.find(closer, body);
                if (close == std::string_view::npos) {
                    pending.append(raw.substr(pos));
                    pos = raw.size();
                    break;
                }
                flush();
                const auto tool = tag->tag == Tag::SearchOpen ? ToolKind::Search : ToolKind::Code;
                segs.push_back(Segment::tool_call(tool, std::string(raw.substr(body, close - body))));
                pos = close + closer.size();
                break;
            }
            case Tag::ResultOpen: {
                const auto close = raw.find(tags::kResultClose, body);
                const bool after_call =
                    pending.empty() && !segs.empty() && segs.back().kind.type == SegmentType::ToolCall;
                if (!after_call || close == std::string_view::npos) {
                    pending.append(tag->text);
                    pos = body;
                    break;
                }
                segs.push_back(Segment::tool_result(std::string(raw.substr(body, close - body))));
                pos = close + tags::kResultClose.size();
                break;
            }
            default:
                break;
        }
    }
    if (!pending.empty()) {
        if (pending.find(tags::kBoxed) != std::string::npos) {
            segs.push_back(Segment::final_answer(std::move(pending)));
        } else {
            flush();
        }
    }
    return segs;
}

}  // namespace

std::vector<Segment> parse_transcript(std::string_view raw, ParseMode mode) {
    return mode == ParseMode::Strict ? parse_strict(raw) : parse_lenient(raw);
}

Trajectory make_trajectory(std::string question, TaskDomain domain, std::vector<Segment> segments) {
    Trajectory t{std::move(question), std::move(segments), domain, std::nullopt};
    if (!t.segments.empty() && t.segments.back().kind.type == SegmentType::FinalAnswer) {
        t.final_answer = extract_boxed(t.segments.back().text);
    }
    return t;
}

std::optional<std::string> extract_boxed(std::string_view text) {
    if (count_boxed(text) != 1) return std::nullopt;
    const auto start = text.find(tags::kBoxed);
    const auto end = boxed_end(text, start);
    if (end == std::string_view::npos) return std::nullopt;
    const auto body = start + tags::kBoxed.size();
    return std::string(text.substr(body, end - 1 - body));
}

std::string render(const Segment& segment) {
    std::string out;
    switch (segment.kind.type) {
        case SegmentType::Think:
            if (segment.form != ThinkForm::Bare) out += tags::kThinkOpen;
            out += segment.text;
            if (segment.form == ThinkForm::Enclosed) out += tags::kThinkClose;
            break;
        case SegmentType::ToolCall:
            out += tags::open_tag(segment.kind.tool);
            out += segment.text;
            out += tags::close_tag(segment.kind.tool);
            break;
        case SegmentType::ToolResult:
            out += tags::kResultOpen;
            out += segment.text;
            out += tags::kResultClose;
            break;
        case SegmentType::FinalAnswer:
            out += segment.text;
            break;
    }
    return out;
}

std::string render(std::span<const Segment> segments) {
    std::string out;
    for (const auto& s : segments) out += render(s);
    return out;
}

std::string render(const Trajectory& trajectory) {
    return render(std::span<const Segment>(trajectory.segments));
}

std::optional<StopBoundary> detect_stop(std::string_view text) noexcept {
    const auto s = text.find(tags::kSearchClose);
    const auto c = text.find(tags::kCodeClose);
    if (s == std::string_view::npos && c == std::string_view::npos) return std::nullopt;
    if (c == std::string_view::npos || (s != std::string_view::npos && s < c)) {
        return StopBoundary{ToolKind::Search, s};
    }
    return StopBoundary{ToolKind::Code, c};
}

std::optional<StopBoundary> StopScanner::feed(std::string_view chunk) {
    constexpr std::size_t keep = std::max(tags::kSearchClose.size(), tags::kCodeClose.size()) - 1;
    std::string window = tail_;
    window.append(chunk);
    const std::size_t window_start = consumed_ - tail_.size();
    consumed_ += chunk.size();
    if (auto hit = detect_stop(window)) {
        hit->offset += window_start;
        tail_.clear();
        return hit;
    }
    tail_ = window.size() > keep ? window.substr(window.size() - keep) : window;
    return std::nullopt;
}

Trajectory inject_result(Trajectory partial, std::string_view result_text) {
    if (partial.segments.empty() || partial.segments.back().kind.type != SegmentType::ToolCall) {
        throw Error(ErrorCode::ProtocolViolation, "a tool result must follow a tool call");
    }
    std::string text(result_text);
    constexpr std::string_view neutral = "</ result>";
    for (auto pos = text.find(tags::kResultClose); pos != std::string::npos;
         pos = text.find(tags::kResultClose, pos + neutral.size())) {
        text.replace(pos, tags::kResultClose.size(), neutral);
    }
    partial.segments.push_back(Segment::tool_result(std::move(text)));
    return partial;
}

std::vector<MaskSpan> build_loss_mask(const Trajectory& trajectory) {
    std::vector<MaskSpan> spans;
    std::size_t offset = 0;
    for (const auto& seg : trajectory.segments) {
        const std::size_t len = render(seg).size();
        if (len == 0) continue;
        const bool masked = seg.kind.type == SegmentType::ToolResult;
        if (!spans.empty() && spans.back().masked == masked) {
            spans.back().end += len;
        } else {
            spans.push_back(MaskSpan{offset, offset + len, masked});
        }
        offset += len;
    }
    return spans;
}

std::vector<ToolKind> tool_calls(const Trajectory& trajectory) {
    std::vector<ToolKind> out;
    for (const auto& seg : trajectory.segments) {
        if (seg.kind.type == SegmentType::ToolCall) out.push_back(seg.kind.tool);
    }
    return out;
}

Trajectory demote_tools(Trajectory trajectory) {
    std::vector<Segment> out;
    for (auto& seg : trajectory.segments) {
        const auto type = seg.kind.type;
        if (type != SegmentType::ToolCall && type != SegmentType::ToolResult &&
            !(type == SegmentType::Think && seg.form == ThinkForm::Bare)) {
            out.push_back(std::move(seg));
            continue;
        }
        auto text = render(seg);
        if (!out.empty() && out.back().kind.type == SegmentType::Think && out.back().form == ThinkForm::Bare) {
            out.back().text += text;
        } else {
            out.push_back(Segment::think(std::move(text), ThinkForm::Bare));
        }
    }
    trajectory.segments = std::move(out);
    return trajectory;
}

}  // namespace tir
