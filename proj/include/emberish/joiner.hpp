#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "emberish/embedding.hpp"
#include "emberish/join_result.hpp"
#include "emberish/joinspec.hpp"
#include "emberish/lexrank.hpp"

namespace emberish {

/// l2: Euclidean distance. inner_product: dot product. Both are computed so
/// that score(a, b) and score(b, a) are bitwise equal.
double metric_score(Metric metric, std::span<const double> a, std::span<const double> b);

ScoreOrder score_order(Metric metric) noexcept;

/// Exact linear-scan index over embeddings.
class EmbeddingIndex {
  public:
    /// Throws ValidationError on an empty input, mixed dimensions or a
    /// duplicate id.
    EmbeddingIndex(std::vector<EmbeddedRecord> entries, Metric metric);

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    Metric metric() const noexcept { return metric_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::span<const double> vector(std::size_t i) const
    {
        return std::span<const double>(data_).subspan(i * dim_, dim_);
    }
    std::optional<std::size_t> index_of(const std::string& id) const;

    /// Scores of the query against every entry, in index order.
    std::vector<double> score_all(std::span<const double> query) const;

    /// Best k entries (ties by ascending id) that pass the threshold:
    /// l2 keeps scores <= threshold, inner_product scores >= threshold.
    /// k = 0 means no limit.
    std::vector<Scored> knn(std::span<const double> query, std::size_t k,
                            std::optional<double> threshold = std::nullopt) const;

  private:
    Metric metric_;
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<double> data_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

EmbeddingIndex build_index(std::vector<EmbeddedRecord> embeddings, Metric metric);

std::vector<Scored> knn(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                        std::optional<double> threshold = std::nullopt);

/// Which side an INNER join indexes. `larger` is the normal execution;
/// `smaller` answers the same query from the other index and exists to check
/// that both give identical results.
enum class IndexSide { larger, smaller };

struct JoinOptions {
    std::optional<double> threshold;
    bool both_directions = false;  ///< INNER only: union of both directions
    IndexSide index_side = IndexSide::larger;
};

/// Join semantics (R = right_size, L = left_size):
///  LEFT   each base record gets its top-R aux records; unmatched base
///         records get one (base, ABSENT) row.
///  RIGHT  mirror: each aux record gets its top-L base records; unmatched aux
///         records get one (ABSENT, aux) row.
///  INNER  pairs (b, a) with a in b's top-R, then each aux record keeps its
///         best L such base records. When |base| > |aux| the equivalent
///         formulation (b in a's top-L, then each base keeps its best R) is
///         used so the larger side is the one indexed. Equal sizes index aux.
///  FULL   union of the LEFT and RIGHT retrievals; a pair found both ways is
///         kept once with direction "both"; records matched in neither
///         direction get ABSENT rows.
/// Ranks are assigned per base id, best score first.
JoinResult execute_join(const JoinSpec& spec, const std::vector<EmbeddedRecord>& base,
                        const std::vector<EmbeddedRecord>& aux, Metric metric,
                        const JoinOptions& options = {});

/// One hop of a chained join. Hop s > 0 looks up the vectors of the ids
/// retrieved by hop s - 1 in query_source (defaulting to the previous hop's
/// index) and searches `index` with k = spec.right_size.
struct ChainStage {
    JoinSpec spec;
    const EmbeddingIndex* index = nullptr;
    const EmbeddingIndex* query_source = nullptr;
    std::optional<double> threshold;
};

/// Relates each query to the records reached after the last hop. A path's
/// score is the sum of its hop scores; for every (query, final id) the best
/// path is kept and recorded in Match::path (one id per hop). Results are
/// capped at the last hop's right_size per query. Queries without any path
/// get an ABSENT row when the first stage is a LEFT or FULL join. Throws
/// ValidationError naming the stage when a retrieved id cannot be found in
/// the next stage's query source.
JoinResult chain_joins(const std::vector<EmbeddedRecord>& queries,
                       const std::vector<ChainStage>& stages);

/// Mean label of the top min(k, available) matches of each base id. ABSENT
/// rows are skipped; base ids without matches are left out. Throws
/// ValidationError when a matched aux id has no label.
std::map<std::string, double> aggregate_labels(const JoinResult& result,
                                               const std::unordered_map<std::string, double>& labels,
                                               std::size_t k);

}  // namespace emberish
