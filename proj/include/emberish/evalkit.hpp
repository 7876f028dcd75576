#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emberish/encoder.hpp"
#include "emberish/join_result.hpp"
#include "emberish/record.hpp"

namespace emberish {

/// Known related aux ids per base id.
struct TruthSet {
    std::map<std::string, std::set<std::string>> related;

    std::size_t size() const noexcept { return related.size(); }
    bool contains(const std::string& base_id) const { return related.count(base_id) != 0; }
};

TruthSet truth_from_pairs(const std::vector<SupervisionPair>& pairs);

/// Fraction of truth base ids whose whole truth set appears among their
/// matches ranked 1..k. Base ids outside the truth set are ignored; an
/// empty truth set gives 0.
double recall_at_k(const JoinResult& result, const TruthSet& truth, std::size_t k);

/// Fraction of truth edges found among the top-k matches of their base id.
double edge_recall_at_k(const JoinResult& result, const TruthSet& truth, std::size_t k);

/// Mean over truth base ids of 1 / rank of the first related match within
/// the top k, counting 0 when none is there.
double mrr_at_k(const JoinResult& result, const TruthSet& truth, std::size_t k = 10);

/// Mean squared error over the prediction ids. Throws ValidationError when
/// predictions are empty or name an id missing from truth.
double mse(const std::map<std::string, double>& predictions,
           const std::map<std::string, double>& truth);

/// Encoders behind the embedding methods; aux may be null for a shared one.
struct EncoderMethod {
    const Encoder* base = nullptr;
    const Encoder* aux = nullptr;
};

struct ComparisonSetup {
    std::optional<std::string> key_column;  ///< needed by LD and JK-*
    Metric metric = Metric::l2;
    EncoderMethod untrained;
    EncoderMethod trained;
};

struct ComparisonRow {
    std::string method;
    std::size_t k = 0;
    double recall = 0.0;
};

struct ComparisonTable {
    std::vector<std::string> methods;
    std::vector<std::size_t> ks;
    std::vector<ComparisonRow> rows;  ///< method-major, ks in order

    /// Throws std::out_of_range for an unknown cell.
    double at(const std::string& method, std::size_t k) const;
};

/// Method names accepted by run_comparison, in table order.
const std::vector<std::string>& comparison_methods();

/// Result of one comparison method with k matches per base record; only
/// base records present in truth are queried.
JoinResult run_method(const std::string& method, const Dataset& base, const Dataset& aux,
                      const TruthSet& truth, std::size_t k, const ComparisonSetup& setup);

/// recall@k for every method and k.
ComparisonTable run_comparison(const Dataset& base, const Dataset& aux, const TruthSet& truth,
                               const std::vector<std::string>& methods,
                               const std::vector<std::size_t>& ks, const ComparisonSetup& setup);

/// CSV with header method,k,recall.
std::string render_metrics_csv(const ComparisonTable& table);

/// Aligned text table: one row per method, one column per k.
std::string render_metrics_table(const ComparisonTable& table);

}  // namespace emberish
