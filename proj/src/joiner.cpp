#include "emberish/joiner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "emberish/error.hpp"
#include "emberish/parallel.hpp"

namespace emberish {

std::string_view to_string(Metric metric) noexcept
{
    return metric == Metric::l2 ? "l2" : "inner_product";
}

Metric parse_metric(std::string_view text)
{
    if (text == "l2") return Metric::l2;
    if (text == "inner_product") return Metric::inner_product;
    throw ValidationError("unknown distance '" + std::string(text)
                          + "' (expected l2 or inner_product)");
}

double metric_score(Metric metric, std::span<const double> a, std::span<const double> b)
{
    double acc = 0.0;
    if (metric == Metric::l2) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double t = a[i] - b[i];
            acc += t * t;
        }
        return std::sqrt(acc);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

ScoreOrder score_order(Metric metric) noexcept
{
    return metric == Metric::l2 ? ScoreOrder::ascending : ScoreOrder::descending;
}

EmbeddingIndex::EmbeddingIndex(std::vector<EmbeddedRecord> entries, Metric metric)
    : metric_(metric)
{
    if (entries.empty()) {
        throw ValidationError("cannot build an index over zero embeddings");
    }
    dim_ = entries.front().second.size();
    ids_.reserve(entries.size());
    data_.reserve(entries.size() * dim_);
    for (auto& [id, vec] : entries) {
        if (vec.size() != dim_) {
            throw ValidationError("embedding " + id + " has dimension " + std::to_string(vec.size())
                                  + ", expected " + std::to_string(dim_));
        }
        if (!by_id_.emplace(id, ids_.size()).second) {
            throw ValidationError("duplicate id " + id + " in index");
        }
        ids_.push_back(std::move(id));
        data_.insert(data_.end(), vec.begin(), vec.end());
    }
}

std::optional<std::size_t> EmbeddingIndex::index_of(const std::string& id) const
{
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

std::vector<double> EmbeddingIndex::score_all(std::span<const double> query) const
{
    if (query.size() != dim_) {
        throw ValidationError("query has dimension " + std::to_string(query.size()) + ", index has "
                              + std::to_string(dim_));
    }
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) {
        out[i] = metric_score(metric_, query, vector(i));
    }
    return out;
}

namespace {

bool passes(Metric metric, double score, const std::optional<double>& threshold)
{
    if (!threshold) return true;
    return metric == Metric::l2 ? score <= *threshold : score >= *threshold;
}

/// (entry index, score) of the best k entries; k = 0 keeps everything.
std::vector<std::pair<std::size_t, double>> knn_positions(const EmbeddingIndex& index,
                                                          std::span<const double> query,
                                                          std::size_t k,
                                                          const std::optional<double>& threshold)
{
    const auto scores = index.score_all(query);
    const auto& ids = index.ids();
    const ScoreOrder order = score_order(index.metric());
    std::vector<std::size_t> cand;
    cand.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (passes(index.metric(), scores[i], threshold)) cand.push_back(i);
    }
    const std::size_t take = k == 0 ? cand.size() : std::min(k, cand.size());
    auto cmp = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return better(order, scores[a], scores[b]);
        return ids[a] < ids[b];
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), cmp);
    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.emplace_back(cand[i], scores[cand[i]]);
    return out;
}

}  // namespace

std::vector<Scored> EmbeddingIndex::knn(std::span<const double> query, std::size_t k,
                                        std::optional<double> threshold) const
{
    std::vector<Scored> out;
    for (auto& [i, s] : knn_positions(*this, query, k, threshold)) out.push_back({ids_[i], s});
    return out;
}

EmbeddingIndex build_index(std::vector<EmbeddedRecord> embeddings, Metric metric)
{
    return EmbeddingIndex(std::move(embeddings), metric);
}

std::vector<Scored> knn(const EmbeddingIndex& index, std::span<const double> query, std::size_t k,
                        std::optional<double> threshold)
{
    return index.knn(query, k, threshold);
}

namespace {

struct Pair {
    std::size_t b;  ///< base position
    std::size_t a;  ///< aux position
    double score;
    MatchDirection direction;
};

using Side = std::vector<EmbeddedRecord>;

/// For every record of `queries`, its best k records of `targets` found by
/// searching an index over `targets`. flip says the queries are aux records.
std::vector<Pair> retrieve_direct(const Side& queries, const Side& targets, Metric metric,
                                  std::size_t k, const std::optional<double>& threshold, bool flip)
{
    const EmbeddingIndex index(targets, metric);
    std::vector<std::vector<std::pair<std::size_t, double>>> hits(queries.size());
    parallel_for(queries.size(), [&](std::size_t q) {
        hits[q] = knn_positions(index, queries[q].second, k, threshold);
    });
    std::vector<Pair> out;
    const auto dir = flip ? MatchDirection::aux_to_base : MatchDirection::base_to_aux;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        for (auto& [t, s] : hits[q]) {
            out.push_back(flip ? Pair{t, q, s, dir} : Pair{q, t, s, dir});
        }
    }
    return out;
}

/// Same answer as retrieve_direct, computed from an index over `queries`:
/// every target searches that index without a limit and the hits are
/// regrouped per query.
std::vector<Pair> retrieve_inverted(const Side& queries, const Side& targets, Metric metric,
                                    std::size_t k, const std::optional<double>& threshold, bool flip)
{
    const EmbeddingIndex index(queries, metric);
    std::vector<std::vector<std::pair<std::size_t, double>>> hits(targets.size());
    parallel_for(targets.size(), [&](std::size_t t) {
        hits[t] = knn_positions(index, targets[t].second, 0, threshold);
    });
    std::vector<std::vector<std::pair<std::size_t, double>>> per_query(queries.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
        for (auto& [q, s] : hits[t]) per_query[q].emplace_back(t, s);
    }
    const ScoreOrder order = score_order(metric);
    std::vector<Pair> out;
    const auto dir = flip ? MatchDirection::aux_to_base : MatchDirection::base_to_aux;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        auto& list = per_query[q];
        std::sort(list.begin(), list.end(), [&](const auto& x, const auto& y) {
            if (x.second != y.second) return better(order, x.second, y.second);
            return targets[x.first].first < targets[y.first].first;
        });
        if (list.size() > k) list.resize(k);
        for (auto& [t, s] : list) {
            out.push_back(flip ? Pair{t, q, s, dir} : Pair{q, t, s, dir});
        }
    }
    return out;
}

/// Keeps, for every record on one side, its best `keep` pairs.
std::vector<Pair> cap_per(std::vector<Pair> pairs, bool per_aux, std::size_t keep,
                          const Side& base, const Side& aux, ScoreOrder order)
{
    auto key = [&](const Pair& p) { return per_aux ? p.a : p.b; };
    auto other_id = [&](const Pair& p) -> const std::string& {
        return per_aux ? base[p.b].first : aux[p.a].first;
    };
    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        const Pair& p = pairs[x];
        const Pair& q = pairs[y];
        if (key(p) != key(q)) return key(p) < key(q);
        if (p.score != q.score) return better(order, p.score, q.score);
        return other_id(p) < other_id(q);
    });
    std::vector<bool> kept(pairs.size(), false);
    std::size_t run = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i == 0 || key(pairs[idx[i]]) != key(pairs[idx[i - 1]])) run = 0;
        if (run++ < keep) kept[idx[i]] = true;
    }
    std::vector<Pair> out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (kept[i]) out.push_back(pairs[i]);
    }
    return out;
}

/// Merges pairs found in both directions into one "both" row.
std::vector<Pair> merge_union(const std::vector<Pair>& x, const std::vector<Pair>& y,
                              std::size_t n_aux, ScoreOrder order)
{
    std::unordered_map<std::size_t, std::size_t> slot;
    std::vector<Pair> out;
    for (const auto* list : {&x, &y}) {
        for (const auto& p : *list) {
            const std::size_t key = p.b * n_aux + p.a;
            auto [it, fresh] = slot.emplace(key, out.size());
            if (fresh) {
                out.push_back(p);
                continue;
            }
            Pair& kept = out[it->second];
            if (kept.direction != p.direction) kept.direction = MatchDirection::both;
            if (better(order, p.score, kept.score)) kept.score = p.score;
        }
    }
    return out;
}

std::size_t checked_size(std::int64_t v, const char* what)
{
    if (v < 1) throw ValidationError(std::string(what) + " must be ≥ 1");
    return static_cast<std::size_t>(v);
}

}  // namespace

JoinResult execute_join(const JoinSpec& spec, const std::vector<EmbeddedRecord>& base,
                        const std::vector<EmbeddedRecord>& aux, Metric metric,
                        const JoinOptions& options)
{
    if (base.empty() || aux.empty()) {
        throw ValidationError("join needs non-empty base and aux embeddings");
    }
    const std::size_t R = checked_size(spec.right_size, "right size");
    const std::size_t L = checked_size(spec.left_size, "left size");
    const ScoreOrder order = score_order(metric);
    const auto& thr = options.threshold;

    JoinResult result;
    result.spec = spec;
    result.order = order;

    std::vector<Pair> pairs;
    bool absent_base = false;
    bool absent_aux = false;
    switch (spec.join_type) {
    case JoinType::left:
        pairs = retrieve_direct(base, aux, metric, R, thr, false);
        absent_base = true;
        break;
    case JoinType::right:
        pairs = retrieve_direct(aux, base, metric, L, thr, true);
        absent_aux = true;
        break;
    case JoinType::full:
        pairs = merge_union(retrieve_direct(base, aux, metric, R, thr, false),
                            retrieve_direct(aux, base, metric, L, thr, true), aux.size(), order);
        absent_base = absent_aux = true;
        result.bidirectional = true;
        break;
    case JoinType::inner:
        if (options.both_directions) {
            pairs = merge_union(retrieve_direct(base, aux, metric, R, thr, false),
                                retrieve_direct(aux, base, metric, L, thr, true), aux.size(), order);
            result.bidirectional = true;
            break;
        }
        {
            const bool index_aux = base.size() <= aux.size();
            const bool direct = options.index_side == IndexSide::larger;
            if (index_aux) {
                // base queries: top-R per base, then at most L per aux.
                pairs = direct ? retrieve_direct(base, aux, metric, R, thr, false)
                               : retrieve_inverted(base, aux, metric, R, thr, false);
                pairs = cap_per(std::move(pairs), true, L, base, aux, order);
            } else {
                pairs = direct ? retrieve_direct(aux, base, metric, L, thr, true)
                               : retrieve_inverted(aux, base, metric, L, thr, true);
                pairs = cap_per(std::move(pairs), false, R, base, aux, order);
            }
        }
        break;
    }

    // Emit in base order, then ABSENT-base rows in aux order.
    std::vector<std::vector<const Pair*>> per_base(base.size());
    std::vector<bool> aux_matched(aux.size(), false);
    for (const auto& p : pairs) {
        per_base[p.b].push_back(&p);
        aux_matched[p.a] = true;
    }
    for (std::size_t b = 0; b < base.size(); ++b) {
        for (const Pair* p : per_base[b]) {
            Match m;
            m.base_id = base[b].first;
            m.aux_id = aux[p->a].first;
            m.score = p->score;
            m.direction = p->direction;
            result.matches.push_back(std::move(m));
        }
        if (per_base[b].empty() && absent_base) {
            Match m;
            m.base_id = base[b].first;
            m.score = std::numeric_limits<double>::quiet_NaN();
            result.matches.push_back(std::move(m));
        }
    }
    if (absent_aux) {
        for (std::size_t a = 0; a < aux.size(); ++a) {
            if (aux_matched[a]) continue;
            Match m;
            m.aux_id = aux[a].first;
            m.score = std::numeric_limits<double>::quiet_NaN();
            m.direction = MatchDirection::aux_to_base;
            result.matches.push_back(std::move(m));
        }
    }
    rerank_by_base(result);
    return result;
}

JoinResult chain_joins(const std::vector<EmbeddedRecord>& queries,
                       const std::vector<ChainStage>& stages)
{
    if (stages.empty()) {
        throw ValidationError("a chained join needs at least one stage");
    }
    for (std::size_t s = 0; s < stages.size(); ++s) {
        if (stages[s].index == nullptr) {
            throw ValidationError("stage " + std::to_string(s + 1) + " has no index");
        }
        if (stages[s].index->metric() != stages[0].index->metric()) {
            throw ValidationError("stage " + std::to_string(s + 1) + " uses a different metric");
        }
        checked_size(stages[s].spec.right_size, "right size");
    }
    const Metric metric = stages[0].index->metric();
    const ScoreOrder order = score_order(metric);

    struct Path {
        std::vector<std::string> ids;
        double score = 0.0;
    };

    JoinResult result;
    result.spec = stages.front().spec;
    result.spec.aux_ref = stages.back().spec.aux_ref;
    result.spec.right_size = stages.back().spec.right_size;
    result.order = order;
    const bool keep_absent = stages.front().spec.join_type == JoinType::left
        || stages.front().spec.join_type == JoinType::full;

    std::vector<std::vector<Path>> finals(queries.size());
    parallel_for(queries.size(), [&](std::size_t q) {
        std::vector<Path> frontier;
        const auto& first = stages[0];
        for (auto& hit : first.index->knn(queries[q].second,
                                          static_cast<std::size_t>(first.spec.right_size),
                                          first.threshold)) {
            frontier.push_back({{hit.id}, hit.score});
        }
        for (std::size_t s = 1; s < stages.size(); ++s) {
            const auto& st = stages[s];
            const EmbeddingIndex* source = st.query_source ? st.query_source : stages[s - 1].index;
            std::vector<Path> next;
            std::unordered_map<std::string, std::size_t> best;
            for (const auto& path : frontier) {
                const auto pos = source->index_of(path.ids.back());
                if (!pos) {
                    throw ValidationError("stage " + std::to_string(s + 1) + ": retrieved id "
                                          + path.ids.back() + " is missing from its query source");
                }
                for (auto& hit : st.index->knn(source->vector(*pos),
                                               static_cast<std::size_t>(st.spec.right_size),
                                               st.threshold)) {
                    Path ext{path.ids, path.score + hit.score};
                    ext.ids.push_back(hit.id);
                    auto [it, fresh] = best.emplace(hit.id, next.size());
                    if (fresh) {
                        next.push_back(std::move(ext));
                    } else if (better(order, ext.score, next[it->second].score)) {
                        next[it->second] = std::move(ext);
                    }
                }
            }
            frontier = std::move(next);
        }
        std::sort(frontier.begin(), frontier.end(), [&](const Path& x, const Path& y) {
            if (x.score != y.score) return better(order, x.score, y.score);
            return x.ids.back() < y.ids.back();
        });
        const auto cap = static_cast<std::size_t>(stages.back().spec.right_size);
        if (frontier.size() > cap) frontier.resize(cap);
        finals[q] = std::move(frontier);
    });

    for (std::size_t q = 0; q < queries.size(); ++q) {
        for (auto& path : finals[q]) {
            Match m;
            m.base_id = queries[q].first;
            m.aux_id = path.ids.back();
            m.score = path.score;
            m.path = std::move(path.ids);
            result.matches.push_back(std::move(m));
        }
        if (finals[q].empty() && keep_absent) {
            Match m;
            m.base_id = queries[q].first;
            m.score = std::numeric_limits<double>::quiet_NaN();
            result.matches.push_back(std::move(m));
        }
    }
    rerank_by_base(result);
    return result;
}

std::map<std::string, double> aggregate_labels(const JoinResult& result,
                                               const std::unordered_map<std::string, double>& labels,
                                               std::size_t k)
{
    if (k == 0) {
        throw ValidationError("aggregation size must be ≥ 1");
    }
    std::map<std::string, std::vector<std::pair<std::size_t, double>>> ranked;
    for (const auto& m : result.matches) {
        if (m.absent()) continue;
        auto it = labels.find(*m.aux_id);
        if (it == labels.end()) {
            throw ValidationError("no label for matched aux id " + *m.aux_id);
        }
        ranked[*m.base_id].emplace_back(m.rank, it->second);
    }
    std::map<std::string, double> out;
    for (auto& [id, list] : ranked) {
        std::stable_sort(list.begin(), list.end(),
                         [](const auto& x, const auto& y) { return x.first < y.first; });
        const std::size_t n = std::min(k, list.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += list[i].second;
        out[id] = sum / static_cast<double>(n);
    }
    return out;
}

}  // namespace emberish
