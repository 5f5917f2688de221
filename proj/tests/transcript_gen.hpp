// SPDX-License-Identifier: Apache-2.0
//
// Random generator of strict-mode-valid transcripts, shared by the protocol
// unit tests and the acceptance suite.

#pragma once

#include <random>
#include <string>

namespace tir::testing {

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static constexpr std::string_view alphabet =
        "abcdefghijklmnopqrstuvwxyz ABCXYZ0123456789.,;:!?()[]=+-*/\n\t<>{}_\\$\xc3\xa9";
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string out;
    const auto n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        char c = alphabet[pick(rng)];
        // keep the text free of anything that would read as a tag or an answer
        if (c == '<' || c == '\\') c = ' ';
        if (c == '\xc3' || c == '\xa9') c = 'e';
        out.push_back(c);
    }
    return out;
}

/// Text with balanced braces, used inside \boxed{}.
inline std::string random_answer(std::mt19937_64& rng) {
    std::string out = random_text(rng, 8);
    for (auto& c : out) {
        if (c == '{' || c == '}') c = 'x';
    }
    if (rng() % 3 == 0) out = "\\frac{" + out + "}{2}";
    return out;
}

/// A transcript accepted by strict parsing: think blocks, bare text, tool
/// calls with optional results, and an optional final answer.
inline std::string random_valid_transcript(std::mt19937_64& rng) {
    std::string out;
    const int steps = static_cast<int>(rng() % 6);
    for (int i = 0; i < steps; ++i) {
        switch (rng() % 4) {
            case 0: out += "<think>" + random_text(rng, 20) + "</think>"; break;
            case 1: {
                auto t = random_text(rng, 6);
                for (auto& c : t) {
                    if (c == '{' || c == '}') c = ' ';
                }
                out += t;
                break;
            }
            default: {
                const bool search = rng() % 2 == 0;
                out += search ? "<search>" : "<code>";
                out += random_text(rng, 16);
                out += search ? "</search>" : "</code>";
                if (rng() % 4 != 0) {
                    std::string result = random_text(rng, 24);
                    if (rng() % 5 == 0) result += "<think>not a tag here</think>";
                    out += "<result>" + result + "</result>";
                }
            }
        }
    }
    if (rng() % 3 != 0) {
        std::string prefix = random_text(rng, 6);
        for (auto& c : prefix) {
            if (c == '{' || c == '}') c = ' ';
        }
        out += prefix + "\\boxed{" + random_answer(rng) + "}";
        if (rng() % 4 == 0) out += "\n";
    }
    return out;
}

}  // namespace tir::testing
