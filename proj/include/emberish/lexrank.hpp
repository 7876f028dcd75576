#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "emberish/join_result.hpp"
#include "emberish/prepare.hpp"
#include "emberish/record.hpp"

namespace emberish {

struct Scored {
    std::string id;
    double score = 0.0;

    bool operator==(const Scored&) const = default;
};

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

/// Okapi BM25 over a fixed document collection.
///
///   score(Q, D) = sum_{q in Q} idf(q) * f(q,D) (k1 + 1)
///                               / (f(q,D) + k1 (1 - b + b |D| / avgdl))
///   idf(q)      = ln((N - df(q) + 0.5) / (df(q) + 0.5) + 1)
///
/// The "+1" keeps idf positive for terms present in most documents. Query
/// tokens are summed with multiplicity.
class Bm25Index {
  public:
    using Params = Bm25Params;

    Bm25Index(std::vector<std::string> doc_ids, const std::vector<std::vector<std::string>>& docs,
              Params params);
    Bm25Index(std::vector<std::string> doc_ids, const std::vector<std::vector<std::string>>& docs)
        : Bm25Index(std::move(doc_ids), docs, Params{})
    {}

    static Bm25Index from_sentences(const std::vector<Sentence>& sentences, Params params = {});

    std::size_t size() const noexcept { return doc_ids_.size(); }
    double avgdl() const noexcept { return avgdl_; }
    const Params& params() const noexcept { return params_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    std::size_t doc_length(std::size_t doc) const { return doc_len_[doc]; }
    std::size_t document_frequency(std::string_view term) const;
    double idf(std::string_view term) const;
    std::optional<std::size_t> index_of(const std::string& doc_id) const;

    /// Score of one document; throws ValidationError for an unknown id.
    double score(std::span<const std::string> query, const std::string& doc_id) const;
    double score_at(std::span<const std::string> query, std::size_t doc) const;

    /// Scores of every document, in index order.
    std::vector<double> score_all(std::span<const std::string> query) const;

  private:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };

    std::optional<std::uint32_t> term_of(std::string_view term) const;
    double term_weight(double tf, std::size_t doc, double idf) const;

    Params params_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::uint32_t> terms_;
    std::vector<std::vector<Posting>> postings_;  ///< per term, sorted by doc
    std::vector<std::size_t> doc_len_;
    double avgdl_ = 0.0;
};

double bm25_score(const Bm25Index& index, std::span<const std::string> query,
                  const std::string& doc_id);

/// Top-k documents by score (ties by ascending id); excluded ids are never
/// returned. Documents scoring zero are still ranked.
std::vector<Scored> bm25_topk(const Bm25Index& index, std::span<const std::string> query,
                              std::size_t k, const std::unordered_set<std::string>& exclude = {});

/// |A ∩ B| / |A ∪ B| with the inputs read as sets; J(∅, ∅) = 0.
double jaccard(std::span<const std::string> a, std::span<const std::string> b);

/// Jaccard over sorted, de-duplicated integer token sets.
double jaccard_sorted(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

/// Unit-cost edit distance over Unicode code points.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Edit distance if it is at most max_distance, otherwise max_distance + 1.
std::size_t levenshtein_bounded(std::u32string_view a, std::u32string_view b,
                                std::size_t max_distance);

std::u32string to_code_points(std::string_view utf8);

enum class LexicalKind { ld, j_ws, j_2g, jk_ws, jk_2g, bm25 };

std::string_view to_string(LexicalKind kind) noexcept;
/// Accepts LD, J-WS, J-2G, JK-WS, JK-2G, BM25 (case-insensitive).
LexicalKind parse_lexical_kind(std::string_view text);

inline constexpr std::size_t kEditDistanceThreshold = 30;
inline constexpr double kJaccardThreshold = 0.3;

/// Baseline similarity join: for every base record, the top-k aux records
/// under the kernel after its filter (LD <= 30 edits, Jaccard >= 0.3,
/// BM25 > 0). LD and JK-* compare the key column; J-* and BM25 compare
/// prepared sentences. Base records without survivors produce no rows.
JoinResult lexical_join(LexicalKind kind, const Dataset& base, const Dataset& aux,
                        const std::optional<std::string>& key_column, std::size_t k);

}  // namespace emberish
