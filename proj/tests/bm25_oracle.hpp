// SPDX-License-Identifier: Apache-2.0
//
// Brute-force BM25 (k1 = 1.2, b = 0.75) and random corpus generators, shared
// by the search tests and the acceptance suite.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tir/search.hpp"

namespace tir::testing {

// Reference scorer: full scan, no index structures.
inline std::vector<std::string> oracle_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::vector<std::pair<std::string, double>> oracle_rank(const std::vector<Document>& docs, const std::string& query,
                                                        std::size_t k) {
    std::vector<std::vector<std::string>> toks;
    double total = 0;
    for (const auto& d : docs) {
        toks.push_back(oracle_tokens(d.title + "\n" + d.text));
        total += static_cast<double>(toks.back().size());
    }
    const double avg = total / static_cast<double>(docs.size());
    auto q = oracle_tokens(query);
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double s = 0;
        for (const auto& t : q) {
            double df = 0;
            for (const auto& other : toks) df += std::count(other.begin(), other.end(), t) > 0 ? 1 : 0;
            const double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), t));
            const double n = static_cast<double>(docs.size());
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            s += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * static_cast<double>(toks[i].size()) / avg));
        }
        if (s > 0) scored.emplace_back(docs[i].id, s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

inline const std::vector<std::string> kVocab = {"paris", "france", "capital", "tower", "troy", "berlin", "mountain",
                                         "sea",   "city",   "the",     "of",    "x",    "y",      "z"};

inline std::vector<Document> random_corpus(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> len(1, 25);
    std::uniform_int_distribution<std::size_t> word(0, kVocab.size() - 1);
    std::vector<Document> docs;
    for (std::size_t i = 0; i < n; ++i) {
        Document d;
        d.id = "doc" + std::to_string(i);
        d.title = kVocab[word(rng)];
        const auto l = len(rng);
        for (std::size_t j = 0; j < l; ++j) d.text += (j ? " " : "") + kVocab[word(rng)];
        docs.push_back(d);
    }
    return docs;
}

inline std::string random_query(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> len(1, 4);
    std::uniform_int_distribution<std::size_t> word(0, kVocab.size() - 1);
    std::string q;
    const auto l = len(rng);
    for (std::size_t j = 0; j < l; ++j) q += (j ? " " : "") + kVocab[word(rng)];
    return q;
}

}  // namespace tir::testing
