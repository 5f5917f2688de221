// SPDX-License-Identifier: Apache-2.0
#include "tir/constraints.hpp"

#include <algorithm>
#include <cctype>

#include "tir/error.hpp"

namespace tir {

using nlohmann::json;

namespace {

std::vector<std::string> alnum_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

InstructionConstraint InstructionConstraint::min_words(std::size_t n) {
    return {Kind::MinWords, "", n};
}
InstructionConstraint InstructionConstraint::max_words(std::size_t n) {
    return {Kind::MaxWords, "", n};
}
InstructionConstraint InstructionConstraint::keyword_frequency(std::string term, std::size_t min_count) {
    InstructionConstraint c{Kind::KeywordFrequency, std::move(term), min_count};
    c.validate();
    return c;
}
InstructionConstraint InstructionConstraint::forbidden_word(std::string term) {
    InstructionConstraint c{Kind::ForbiddenWord, std::move(term), 0};
    c.validate();
    return c;
}
InstructionConstraint InstructionConstraint::letter_frequency(char letter, std::size_t min_count) {
    InstructionConstraint c{Kind::LetterFrequency, std::string(1, letter), min_count};
    c.validate();
    return c;
}
InstructionConstraint InstructionConstraint::bullet_count(std::size_t n) {
    return {Kind::BulletCount, "", n};
}
InstructionConstraint InstructionConstraint::ends_with(std::string phrase) {
    InstructionConstraint c{Kind::EndsWith, std::move(phrase), 0};
    c.validate();
    return c;
}

void InstructionConstraint::validate() const {
    switch (kind) {
        case Kind::KeywordFrequency:
        case Kind::ForbiddenWord:
            if (alnum_tokens(term).empty()) {
                throw Error(ErrorCode::InvalidConstraint, std::string(to_string(kind)) + " needs a non-empty term");
            }
            break;
        case Kind::LetterFrequency:
            if (term.size() != 1 || !std::isalpha(static_cast<unsigned char>(term[0]))) {
                throw Error(ErrorCode::InvalidConstraint, "letter_frequency needs a single ASCII letter");
            }
            break;
        case Kind::EndsWith:
            if (trim(term).empty()) throw Error(ErrorCode::InvalidConstraint, "ends_with needs a non-empty phrase");
            break;
        default: break;
    }
}

std::string_view to_string(InstructionConstraint::Kind kind) noexcept {
    using K = InstructionConstraint::Kind;
    switch (kind) {
        case K::MinWords: return "min_words";
        case K::MaxWords: return "max_words";
        case K::KeywordFrequency: return "keyword_frequency";
        case K::ForbiddenWord: return "forbidden_word";
        case K::LetterFrequency: return "letter_frequency";
        case K::BulletCount: return "bullet_count";
        case K::EndsWith: return "ends_with";
    }
    return "?";
}

json to_json(const InstructionConstraint& c) {
    using K = InstructionConstraint::Kind;
    json j{{"kind", to_string(c.kind)}};
    switch (c.kind) {
        case K::MinWords:
        case K::MaxWords:
        case K::BulletCount: j["n"] = c.count; break;
        case K::KeywordFrequency:
            j["term"] = c.term;
            j["min_count"] = c.count;
            break;
        case K::ForbiddenWord: j["term"] = c.term; break;
        case K::LetterFrequency:
            j["letter"] = c.term;
            j["min_count"] = c.count;
            break;
        case K::EndsWith: j["phrase"] = c.term; break;
    }
    return j;
}

InstructionConstraint constraint_from_json(const json& j) {
    using K = InstructionConstraint::Kind;
    try {
        const auto kind = j.at("kind").get<std::string>();
        auto count = [&](const char* key) {
            const auto& v = j.at(key);
            if (!v.is_number_integer() || v.get<long long>() < 0) {
                throw Error(ErrorCode::InvalidConstraint, std::string(key) + " must be a non-negative integer");
            }
            return v.get<std::size_t>();
        };
        InstructionConstraint c;
        if (kind == "min_words") {
            c = {K::MinWords, "", count("n")};
        } else if (kind == "max_words") {
            c = {K::MaxWords, "", count("n")};
        } else if (kind == "bullet_count") {
            c = {K::BulletCount, "", count("n")};
        } else if (kind == "keyword_frequency") {
            c = {K::KeywordFrequency, j.at("term").get<std::string>(), count("min_count")};
        } else if (kind == "forbidden_word") {
            c = {K::ForbiddenWord, j.at("term").get<std::string>(), 0};
        } else if (kind == "letter_frequency") {
            c = {K::LetterFrequency, j.at("letter").get<std::string>(), count("min_count")};
        } else if (kind == "ends_with") {
            c = {K::EndsWith, j.at("phrase").get<std::string>(), 0};
        } else {
            throw Error(ErrorCode::InvalidConstraint, "unknown constraint kind '" + kind + "'");
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConstraint, e.what());
    }
}

std::size_t word_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char ch : text) {
        const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::size_t keyword_count(std::string_view text, std::string_view term) {
    const auto hay = alnum_tokens(text);
    const auto needle = alnum_tokens(term);
    if (needle.empty() || hay.size() < needle.size()) return 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
    }
    return n;
}

std::size_t letter_count(std::string_view text, char letter) {
    const auto want = std::tolower(static_cast<unsigned char>(letter));
    return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [&](char ch) {
        return std::tolower(static_cast<unsigned char>(ch)) == want;
    }));
}

std::size_t bullet_count(std::string_view text) {
    std::size_t n = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string_view::npos) {
            line = line.substr(first);
            if (line.starts_with("* ") || line.starts_with("- ")) ++n;
        }
        start = end + 1;
    }
    return n;
}

bool satisfies(std::string_view response, const InstructionConstraint& c) {
    using K = InstructionConstraint::Kind;
    switch (c.kind) {
        case K::MinWords: return word_count(response) >= c.count;
        case K::MaxWords: return word_count(response) <= c.count;
        case K::KeywordFrequency: return keyword_count(response, c.term) >= c.count;
        case K::ForbiddenWord: return keyword_count(response, c.term) == 0;
        case K::LetterFrequency: return letter_count(response, c.term.at(0)) >= c.count;
        case K::BulletCount: return bullet_count(response) == c.count;
        case K::EndsWith: return lower(trim(response)).ends_with(lower(trim(c.term)));
    }
    return false;
}

int if_score_strict(std::string_view response, std::span<const InstructionConstraint> constraints) {
    if (constraints.empty()) throw Error(ErrorCode::InvalidConstraint, "constraint list is empty");
    for (const auto& c : constraints) {
        if (!satisfies(response, c)) return 0;
    }
    return 1;
}

double if_score_soft(std::string_view response, std::span<const InstructionConstraint> constraints) {
    if (constraints.empty()) throw Error(ErrorCode::InvalidConstraint, "constraint list is empty");
    std::size_t ok = 0;
    for (const auto& c : constraints) ok += satisfies(response, c) ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(constraints.size());
}

}  // namespace tir
