#include "emberish/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

#include "emberish/csv.hpp"
#include "emberish/error.hpp"
#include "emberish/joiner.hpp"
#include "emberish/lexrank.hpp"

namespace emberish {

TruthSet truth_from_pairs(const std::vector<SupervisionPair>& pairs)
{
    TruthSet t;
    for (const auto& p : pairs) t.related[p.base_id].insert(p.aux_id);
    return t;
}

namespace {

/// aux ids by rank (1-based, ranks <= k) for every base id of interest.
std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::string>>>
top_k(const JoinResult& result, const TruthSet& truth, std::size_t k)
{
    if (k == 0) throw ValidationError("k must be ≥ 1");
    std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::string>>> out;
    for (const auto& m : result.matches) {
        if (m.absent() || m.rank == 0 || m.rank > k || !truth.contains(*m.base_id)) continue;
        out[*m.base_id].emplace_back(m.rank, *m.aux_id);
    }
    for (auto& [id, list] : out) std::sort(list.begin(), list.end());
    return out;
}

}  // namespace

double recall_at_k(const JoinResult& result, const TruthSet& truth, std::size_t k)
{
    const auto top = top_k(result, truth, k);
    if (truth.size() == 0) return 0.0;
    std::size_t hits = 0;
    for (const auto& [base_id, related] : truth.related) {
        auto it = top.find(base_id);
        if (it == top.end()) continue;
        std::set<std::string> found;
        for (const auto& [rank, aux_id] : it->second) found.insert(aux_id);
        if (std::includes(found.begin(), found.end(), related.begin(), related.end())) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double edge_recall_at_k(const JoinResult& result, const TruthSet& truth, std::size_t k)
{
    const auto top = top_k(result, truth, k);
    std::size_t edges = 0;
    std::size_t hits = 0;
    for (const auto& [base_id, related] : truth.related) {
        edges += related.size();
        auto it = top.find(base_id);
        if (it == top.end()) continue;
        for (const auto& [rank, aux_id] : it->second) {
            if (related.count(aux_id)) ++hits;
        }
    }
    return edges == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(edges);
}

double mrr_at_k(const JoinResult& result, const TruthSet& truth, std::size_t k)
{
    const auto top = top_k(result, truth, k);
    if (truth.size() == 0) return 0.0;
    double total = 0.0;
    for (const auto& [base_id, related] : truth.related) {
        auto it = top.find(base_id);
        if (it == top.end()) continue;
        for (const auto& [rank, aux_id] : it->second) {
            if (related.count(aux_id)) {
                total += 1.0 / static_cast<double>(rank);
                break;
            }
        }
    }
    return total / static_cast<double>(truth.size());
}

double mse(const std::map<std::string, double>& predictions,
           const std::map<std::string, double>& truth)
{
    if (predictions.empty()) throw ValidationError("mse: no predictions");
    double total = 0.0;
    for (const auto& [id, p] : predictions) {
        auto it = truth.find(id);
        if (it == truth.end()) throw ValidationError("mse: no true value for " + id);
        const double d = p - it->second;
        total += d * d;
    }
    return total / static_cast<double>(predictions.size());
}

double ComparisonTable::at(const std::string& method, std::size_t k) const
{
    for (const auto& r : rows) {
        if (r.method == method && r.k == k) return r.recall;
    }
    throw std::out_of_range("no comparison cell for " + method + " at k=" + std::to_string(k));
}

const std::vector<std::string>& comparison_methods()
{
    static const std::vector<std::string> names = {
        "LD", "J-WS", "J-2G", "JK-WS", "JK-2G", "BM25", "untrained-encoder", "trained-encoder"};
    return names;
}

JoinResult run_method(const std::string& method, const Dataset& base, const Dataset& aux,
                      const TruthSet& truth, std::size_t k, const ComparisonSetup& setup)
{
    std::vector<Record> queried;
    for (const auto& r : base.records()) {
        if (truth.contains(r.id)) queried.push_back(r);
    }
    const Dataset q(base.name(), base.role(), std::move(queried), base.column_names());
    if (q.empty()) {
        throw ValidationError("no base record of the truth set is present in the base dataset");
    }

    if (method == "untrained-encoder" || method == "trained-encoder") {
        const EncoderMethod& enc = method == "trained-encoder" ? setup.trained : setup.untrained;
        if (enc.base == nullptr) {
            throw ValidationError("method " + method + " needs an encoder");
        }
        const Encoder& aux_enc = enc.aux ? *enc.aux : *enc.base;
        JoinSpec spec{q.name().empty() ? "base" : q.name(), aux.name().empty() ? "aux" : aux.name(),
                      JoinType::left, 1, static_cast<std::int64_t>(k), "none"};
        return execute_join(spec, embed_dataset(*enc.base, q), embed_dataset(aux_enc, aux),
                            setup.metric);
    }
    return lexical_join(parse_lexical_kind(method), q, aux, setup.key_column, k);
}

ComparisonTable run_comparison(const Dataset& base, const Dataset& aux, const TruthSet& truth,
                               const std::vector<std::string>& methods,
                               const std::vector<std::size_t>& ks, const ComparisonSetup& setup)
{
    if (methods.empty() || ks.empty()) {
        throw ValidationError("comparison needs at least one method and one k");
    }
    const auto& known = comparison_methods();
    for (const auto& m : methods) {
        if (std::find(known.begin(), known.end(), m) == known.end()) {
            throw ValidationError("unknown method '" + m + "'");
        }
    }
    for (auto k : ks) {
        if (k == 0) throw ValidationError("k must be ≥ 1");
    }
    const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
    ComparisonTable table;
    table.methods = methods;
    table.ks = ks;
    for (const auto& m : methods) {
        const JoinResult result = run_method(m, base, aux, truth, kmax, setup);
        for (auto k : ks) table.rows.push_back({m, k, recall_at_k(result, truth, k)});
    }
    return table;
}

std::string render_metrics_csv(const ComparisonTable& table)
{
    std::string out = "method,k,recall\n";
    for (const auto& r : table.rows) {
        out += csv_line({r.method, std::to_string(r.k), format_double(r.recall)});
    }
    return out;
}

std::string render_metrics_table(const ComparisonTable& table)
{
    std::size_t width = std::string("method").size();
    for (const auto& m : table.methods) width = std::max(width, m.size());
    std::string out = "method" + std::string(width - 6, ' ');
    for (auto k : table.ks) {
        char cell[32];
        std::snprintf(cell, sizeof cell, "  %9s", ("R@" + std::to_string(k)).c_str());
        out += cell;
    }
    out += '\n';
    for (const auto& m : table.methods) {
        out += m + std::string(width - m.size(), ' ');
        for (auto k : table.ks) {
            char cell[32];
            std::snprintf(cell, sizeof cell, "  %9.4f", table.at(m, k));
            out += cell;
        }
        out += '\n';
    }
    return out;
}

}  // namespace emberish
