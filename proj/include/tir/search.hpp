// SPDX-License-Identifier: Apache-2.0
//
// Lexical retrieval over a local corpus with Okapi BM25.

#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tir {

struct Document {
    std::string id;
    std::string title;
    std::string text;
};

struct SearchHit {
    std::string doc_id;
    double score = 0.0;
    std::string snippet;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Lowercases ASCII letters and splits on every byte that is not an ASCII
/// letter or digit. Bytes >= 0x80 are kept inside tokens so UTF-8 words stay
/// intact.
std::vector<std::string> tokenize(std::string_view text);

/// Text a document is indexed under: title and body.
std::string indexed_text(const Document& doc);

/// Inverted index. Immutable once built; content depends only on the set of
/// documents, not on their input order.
class SearchIndex {
public:
    struct Posting {
        std::uint32_t doc;  // position in documents()
        std::uint32_t tf;
    };

    SearchIndex() = default;
    /// Throws DuplicateId when two documents share an id.
    explicit SearchIndex(std::vector<Document> docs, Bm25Params params = {});

    const std::vector<Document>& documents() const noexcept { return docs_; }
    const Bm25Params& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return docs_.size(); }
    double average_length() const noexcept { return avg_len_; }
    std::uint32_t length(std::size_t doc) const { return lengths_.at(doc); }
    std::uint32_t document_frequency(std::string_view term) const;
    const std::vector<Posting>* postings(std::string_view term) const;
    const std::map<std::string, std::vector<Posting>, std::less<>>& terms() const noexcept { return postings_; }

    /// Top-k hits by BM25, ties broken by ascending doc id. Documents with a
    /// zero score are never returned. Snippets hold at most snippet_bytes of
    /// the document text, cut on a UTF-8 boundary.
    std::vector<SearchHit> search(std::string_view query, std::size_t k, std::size_t snippet_bytes = 2048) const;

    void save(const std::filesystem::path& path) const;
    static SearchIndex load(const std::filesystem::path& path);

private:
    std::vector<Document> docs_;
    Bm25Params params_;
    std::vector<std::uint32_t> lengths_;
    double avg_len_ = 0.0;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
};

/// Corpus statistics a single-document score depends on.
struct CorpusStats {
    std::size_t num_docs = 0;
    double average_length = 0.0;
    std::map<std::string, std::uint32_t, std::less<>> document_frequency;
};

CorpusStats corpus_stats(const SearchIndex& index);

/// BM25 of one document for already-tokenized query terms. Repeated query
/// terms count once.
double bm25_score(const std::vector<std::string>& query_terms, const Document& doc, const CorpusStats& stats,
                  Bm25Params params = {});

/// idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1)
double bm25_idf(std::size_t num_docs, std::size_t df);

/// JSONL with fields id, title, text. Throws MalformedCorpus with the line
/// number on bad input and DuplicateId on repeated ids.
std::vector<Document> read_corpus(std::istream& in);
std::vector<Document> read_corpus(const std::filesystem::path& path);

/// Longest prefix of text that is at most max_bytes long and does not split
/// a UTF-8 sequence.
std::string_view utf8_prefix(std::string_view text, std::size_t max_bytes);

}  // namespace tir
