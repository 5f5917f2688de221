// SPDX-License-Identifier: Apache-2.0
#include "tir/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "tir/error.hpp"

namespace tir {

using nlohmann::json;

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || c >= 0x80) {
            cur.push_back(ch);
        } else if (c >= 'A' && c <= 'Z') {
            cur.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string indexed_text(const Document& doc) {
    return doc.title + "\n" + doc.text;
}

double bm25_idf(std::size_t num_docs, std::size_t df) {
    const double n = static_cast<double>(num_docs);
    const double d = static_cast<double>(df);
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

SearchIndex::SearchIndex(std::vector<Document> docs, Bm25Params params) : docs_(std::move(docs)), params_(params) {
    std::sort(docs_.begin(), docs_.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < docs_.size(); ++i) {
        if (docs_[i].id == docs_[i - 1].id) throw Error(ErrorCode::DuplicateId, "duplicate document id " + docs_[i].id);
    }
    lengths_.reserve(docs_.size());
    double total = 0.0;
    for (std::uint32_t d = 0; d < docs_.size(); ++d) {
        const auto toks = tokenize(indexed_text(docs_[d]));
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& t : toks) ++tf[t];
        for (const auto& [term, count] : tf) {
            auto it = postings_.find(term);
            if (it == postings_.end()) it = postings_.emplace(std::string(term), std::vector<Posting>{}).first;
            it->second.push_back(Posting{d, count});
        }
        lengths_.push_back(static_cast<std::uint32_t>(toks.size()));
        total += static_cast<double>(toks.size());
    }
    avg_len_ = docs_.empty() ? 0.0 : total / static_cast<double>(docs_.size());
}

std::uint32_t SearchIndex::document_frequency(std::string_view term) const {
    const auto* p = postings(term);
    return p ? static_cast<std::uint32_t>(p->size()) : 0;
}

const std::vector<SearchIndex::Posting>* SearchIndex::postings(std::string_view term) const {
    const auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

std::vector<SearchHit> SearchIndex::search(std::string_view query, std::size_t k, std::size_t snippet_bytes) const {
    auto terms = tokenize(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    std::unordered_map<std::uint32_t, double> acc;
    const double k1 = params_.k1;
    const double b = params_.b;
    for (const auto& term : terms) {
        const auto* plist = postings(term);
        if (!plist) continue;
        const double idf = bm25_idf(docs_.size(), plist->size());
        for (const auto& p : *plist) {
            const double tf = p.tf;
            const double norm = 1.0 - b + b * (static_cast<double>(lengths_[p.doc]) / avg_len_);
            acc[p.doc] += idf * (tf * (k1 + 1.0)) / (tf + k1 * norm);
        }
    }

    std::vector<std::pair<std::uint32_t, double>> ranked;
    ranked.reserve(acc.size());
    for (const auto& [doc, score] : acc) {
        if (score > 0.0) ranked.emplace_back(doc, score);
    }
    // doc indices follow id order, so the index doubles as the tie-break key
    auto by_rank = [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; };
    const std::size_t n = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(), by_rank);

    std::vector<SearchHit> hits;
    hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& doc = docs_[ranked[i].first];
        hits.push_back(SearchHit{doc.id, ranked[i].second, std::string(utf8_prefix(doc.text, snippet_bytes))});
    }
    return hits;
}

void SearchIndex::save(const std::filesystem::path& path) const {
    json j;
    j["format"] = "tir-bm25-index";
    j["version"] = 1;
    j["k1"] = params_.k1;
    j["b"] = params_.b;
    auto& docs = j["documents"] = json::array();
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        docs.push_back({{"id", docs_[i].id}, {"title", docs_[i].title}, {"text", docs_[i].text}, {"length", lengths_[i]}});
    }
    auto& terms = j["postings"] = json::object();
    for (const auto& [term, plist] : postings_) {
        auto& arr = terms[term] = json::array();
        for (const auto& p : plist) arr.push_back({p.doc, p.tf});
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump() << '\n';
}

SearchIndex SearchIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedCorpus, std::string("index file: ") + e.what());
    }
    if (j.value("format", "") != "tir-bm25-index") throw Error(ErrorCode::MalformedCorpus, "not an index file");
    std::vector<Document> docs;
    for (const auto& d : j.at("documents")) {
        docs.push_back(Document{d.at("id"), d.at("title"), d.at("text")});
    }
    SearchIndex index(std::move(docs), Bm25Params{j.at("k1"), j.at("b")});
    // the stored postings must agree with a rebuild
    for (const auto& [term, arr] : j.at("postings").items()) {
        const auto* plist = index.postings(term);
        if (!plist || plist->size() != arr.size()) {
            throw Error(ErrorCode::MalformedCorpus, "stale postings for term '" + term + "'");
        }
    }
    if (j.at("postings").size() != index.terms().size()) {
        throw Error(ErrorCode::MalformedCorpus, "term dictionary does not match documents");
    }
    return index;
}

CorpusStats corpus_stats(const SearchIndex& index) {
    CorpusStats stats;
    stats.num_docs = index.size();
    stats.average_length = index.average_length();
    for (const auto& [term, plist] : index.terms()) {
        stats.document_frequency.emplace(term, static_cast<std::uint32_t>(plist.size()));
    }
    return stats;
}

double bm25_score(const std::vector<std::string>& query_terms, const Document& doc, const CorpusStats& stats,
                  Bm25Params params) {
    const auto toks = tokenize(indexed_text(doc));
    const std::set<std::string> unique(query_terms.begin(), query_terms.end());
    const double len = static_cast<double>(toks.size());
    double score = 0.0;
    for (const auto& term : unique) {
        const auto tf = static_cast<double>(std::count(toks.begin(), toks.end(), term));
        if (tf == 0.0) continue;
        const auto it = stats.document_frequency.find(term);
        const std::size_t df = it == stats.document_frequency.end() ? 0 : it->second;
        const double norm = 1.0 - params.b + params.b * (len / stats.average_length);
        score += bm25_idf(stats.num_docs, df) * (tf * (params.k1 + 1.0)) / (tf + params.k1 * norm);
    }
    return score;
}

std::vector<Document> read_corpus(std::istream& in) {
    std::vector<Document> docs;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Document doc;
        try {
            const auto j = json::parse(line);
            doc.id = j.at("id").get<std::string>();
            doc.title = j.value("title", "");
            doc.text = j.at("text").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedCorpus, e.what(), lineno);
        }
        if (doc.text.empty()) throw Error(ErrorCode::MalformedCorpus, "empty text for document " + doc.id, lineno);
        if (!seen.insert(doc.id).second) throw Error(ErrorCode::DuplicateId, "duplicate id " + doc.id, lineno);
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read corpus " + path.string());
    return read_corpus(in);
}

std::string_view utf8_prefix(std::string_view text, std::size_t max_bytes) {
    if (text.size() <= max_bytes) return text;
    std::size_t cut = max_bytes;
    // back off while the first dropped byte is a continuation byte
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return text.substr(0, cut);
}

}  // namespace tir
