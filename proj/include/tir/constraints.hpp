// SPDX-License-Identifier: Apache-2.0
//
// Rule-checkable instruction constraints.
//
// Word counts use whitespace-separated tokens. Keyword matching is
// case-insensitive and whole-word: the response and the term are both split
// on non-alphanumeric bytes and the term's token sequence is counted as a
// contiguous run. Bullets are lines whose first non-blank characters are
// "* " or "- ".

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tir {

struct InstructionConstraint {
    enum class Kind { MinWords, MaxWords, KeywordFrequency, ForbiddenWord, LetterFrequency, BulletCount, EndsWith };

    Kind kind = Kind::MinWords;
    std::string term;       // keyword, forbidden word, letter or phrase
    std::size_t count = 0;  // word bound, minimum frequency or bullet count

    static InstructionConstraint min_words(std::size_t n);
    static InstructionConstraint max_words(std::size_t n);
    static InstructionConstraint keyword_frequency(std::string term, std::size_t min_count);
    static InstructionConstraint forbidden_word(std::string term);
    static InstructionConstraint letter_frequency(char letter, std::size_t min_count);
    static InstructionConstraint bullet_count(std::size_t n);
    static InstructionConstraint ends_with(std::string phrase);

    /// Throws InvalidConstraint on empty terms or a non-letter letter.
    void validate() const;

    friend bool operator==(const InstructionConstraint&, const InstructionConstraint&) = default;
};

std::string_view to_string(InstructionConstraint::Kind kind) noexcept;

/// {"kind": "min_words", "n": 3}, {"kind": "keyword_frequency", "term": "x",
/// "min_count": 2}, {"kind": "letter_frequency", "letter": "e", "min_count": 5},
/// {"kind": "forbidden_word", "term": "x"}, {"kind": "bullet_count", "n": 3},
/// {"kind": "ends_with", "phrase": "..."}, {"kind": "max_words", "n": 50}.
nlohmann::json to_json(const InstructionConstraint& c);
InstructionConstraint constraint_from_json(const nlohmann::json& j);

std::size_t word_count(std::string_view text);
std::size_t keyword_count(std::string_view text, std::string_view term);
std::size_t letter_count(std::string_view text, char letter);
std::size_t bullet_count(std::string_view text);

bool satisfies(std::string_view response, const InstructionConstraint& c);

/// 1 iff every constraint holds. Throws InvalidConstraint on an empty list.
int if_score_strict(std::string_view response, std::span<const InstructionConstraint> constraints);

/// Fraction of constraints that hold. Throws InvalidConstraint on an empty list.
double if_score_soft(std::string_view response, std::span<const InstructionConstraint> constraints);

}  // namespace tir
