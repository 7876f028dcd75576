#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emberish/joinspec.hpp"

namespace emberish {

/// Which way scores improve: ascending means lower is better (distances).
enum class ScoreOrder { ascending, descending };

/// Retrieval direction a match came from.
enum class MatchDirection { base_to_aux, aux_to_base, both };

std::string_view to_string(MatchDirection direction) noexcept;

/// One output tuple. An unset side is ABSENT (outer joins only); ABSENT
/// rows carry rank 0 and a NaN score.
struct Match {
    std::optional<std::string> base_id;
    std::optional<std::string> aux_id;
    std::size_t rank = 0;
    double score = 0.0;
    MatchDirection direction = MatchDirection::base_to_aux;
    std::vector<std::string> path;  ///< chained joins: id retrieved at each hop

    bool absent() const noexcept { return !base_id || !aux_id; }
};

/// Ranked join output. For every base id the matched rows carry ranks
/// 1..k in order of their scores (best first).
struct JoinResult {
    JoinSpec spec;
    ScoreOrder order = ScoreOrder::ascending;
    bool bidirectional = false;  ///< rows come from both retrieval directions
    std::vector<Match> matches;
};

/// True when score a is strictly better than b under order.
inline bool better(ScoreOrder order, double a, double b) noexcept
{
    return order == ScoreOrder::ascending ? a < b : a > b;
}

/// Reassigns ranks per base id (best score first, ties by aux id) and sorts
/// rows by base id first appearance, then rank. ABSENT rows keep rank 0.
void rerank_by_base(JoinResult& result);

/// CSV with header base_id,aux_id,rank,score; a trailing direction column is
/// added for bidirectional results. ABSENT ids and their scores are empty.
std::string render_result_csv(const JoinResult& result);

/// Reads a result CSV written by render_result_csv. Score order and spec are
/// not stored in the file and are left at their defaults.
JoinResult parse_result_csv(std::string_view text);

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);

}  // namespace emberish
