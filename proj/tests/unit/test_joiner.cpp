#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "emberish/error.hpp"
#include "emberish/joiner.hpp"
#include "support.hpp"

using namespace emberish;

namespace {

using Pair = std::pair<std::string, std::string>;

std::vector<EmbeddedRecord> random_embeddings(Rng& rng, const std::string& prefix, std::size_t n,
                                              std::size_t d)
{
    std::vector<EmbeddedRecord> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({prefix + std::to_string(i), testing::random_vector(rng, d)});
    return out;
}

double l2(const EmbeddingVector& a, const EmbeddingVector& b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Brute-force ranking of every candidate for one query.
std::vector<std::pair<double, std::string>> ranked(const EmbeddingVector& q,
                                                   const std::vector<EmbeddedRecord>& side)
{
    std::vector<std::pair<double, std::string>> out;
    for (const auto& [id, v] : side) out.push_back({l2(q, v), id});
    std::sort(out.begin(), out.end());
    return out;
}

std::set<Pair> top_pairs(const std::vector<EmbeddedRecord>& queries, const std::vector<EmbeddedRecord>& side,
                         std::size_t k, bool query_is_base)
{
    std::set<Pair> out;
    for (const auto& [id, v] : queries) {
        const auto r = ranked(v, side);
        for (std::size_t i = 0; i < std::min(k, r.size()); ++i) {
            out.insert(query_is_base ? Pair{id, r[i].second} : Pair{r[i].second, id});
        }
    }
    return out;
}

// Keeps, for each record on the capped side, its best `cap` pairs.
std::set<Pair> cap_pairs(const std::set<Pair>& pairs, const std::map<std::string, EmbeddingVector>& vecs,
                         std::size_t cap, bool cap_by_aux)
{
    std::map<std::string, std::vector<std::pair<double, Pair>>> groups;
    for (const auto& p : pairs) {
        const auto& key = cap_by_aux ? p.second : p.first;
        groups[key].push_back({l2(vecs.at(p.first), vecs.at(p.second)), p});
    }
    std::set<Pair> out;
    for (auto& [key, g] : groups) {
        std::sort(g.begin(), g.end());
        for (std::size_t i = 0; i < std::min(cap, g.size()); ++i) out.insert(g[i].second);
    }
    return out;
}

std::set<Pair> matched_pairs(const JoinResult& r)
{
    std::set<Pair> out;
    for (const auto& m : r.matches) {
        if (!m.absent()) out.insert({*m.base_id, *m.aux_id});
    }
    return out;
}

void check_rank_invariants(const JoinResult& r)
{
    std::map<std::string, std::vector<const Match*>> per_base;
    for (const auto& m : r.matches) {
        if (m.absent()) {
            CHECK(m.rank == 0);
            CHECK(std::isnan(m.score));
            continue;
        }
        per_base[*m.base_id].push_back(&m);
    }
    for (const auto& [id, rows] : per_base) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(rows[i]->rank == i + 1);
            if (i > 0) CHECK_FALSE(better(r.order, rows[i]->score, rows[i - 1]->score));
        }
    }
}

JoinSpec spec(JoinType type, std::int64_t left, std::int64_t right)
{
    return JoinSpec{"b", "a", type, left, right, "s"};
}

}  // namespace

TEST_CASE("three-point nearest neighbours")
{
    const EmbeddingIndex index({{"a", {0, 0}}, {"b", {1, 0}}, {"c", {0, 2}}}, Metric::l2);
    const std::vector<double> q{0.6, 0};
    const auto got = index.knn(q, 2);
    REQUIRE(got.size() == 2);
    CHECK(got[0].id == "b");
    CHECK(got[0].score == doctest::Approx(0.4));
    CHECK(got[1].id == "a");
    CHECK(got[1].score == doctest::Approx(0.6));
    CHECK(index.knn(q, 2, 0.1).empty());
    CHECK(index.knn(q, 0).size() == 3);
}

TEST_CASE("index basics")
{
    const EmbeddingIndex one({{"only", {1, 2}}}, Metric::inner_product);
    const std::vector<double> q{-5, 3};
    CHECK(one.knn(q, 4) == std::vector<Scored>{{"only", 1.0}});

    const EmbeddingIndex dup({{"y", {1, 1}}, {"x", {1, 1}}}, Metric::l2);
    const std::vector<double> same{1, 1};
    const auto got = dup.knn(same, 2);
    CHECK(got == std::vector<Scored>{{"x", 0.0}, {"y", 0.0}});

    CHECK_THROWS_AS(EmbeddingIndex({}, Metric::l2), ValidationError);
    CHECK_THROWS_AS(EmbeddingIndex({{"a", {1}}, {"b", {1, 2}}}, Metric::l2), ValidationError);
    CHECK_THROWS_AS(EmbeddingIndex({{"a", {1}}, {"a", {2}}}, Metric::l2), ValidationError);
    CHECK(parse_metric("inner_product") == Metric::inner_product);
    CHECK_THROWS_AS(parse_metric("cosine"), ValidationError);
}

TEST_CASE("knn equals an exhaustive sort")
{
    Rng rng(6);
    const auto data = random_embeddings(rng, "e", 100, 8);
    const EmbeddingIndex l2_index(data, Metric::l2);
    const EmbeddingIndex ip_index(data, Metric::inner_product);
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = testing::random_vector(rng, 8);
        std::vector<std::pair<double, std::string>> by_l2, by_ip;
        for (const auto& [id, v] : data) {
            by_l2.push_back({l2(q, v), id});
            double dot = 0;
            for (std::size_t i = 0; i < 8; ++i) dot += q[i] * v[i];
            by_ip.push_back({-dot, id});
        }
        std::sort(by_l2.begin(), by_l2.end());
        std::sort(by_ip.begin(), by_ip.end());
        for (std::size_t k : {1u, 5u, 37u, 100u, 150u}) {
            const auto a = l2_index.knn(q, k);
            const auto b = knn(ip_index, q, k);
            REQUIRE(a.size() == std::min<std::size_t>(k, 100));
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].id == by_l2[i].second);
                CHECK(a[i].score == doctest::Approx(by_l2[i].first).epsilon(1e-12));
                CHECK(b[i].id == by_ip[i].second);
            }
        }
        const auto self = l2_index.knn(data[trial].second, 1);
        CHECK(self[0].id == data[trial].first);
        CHECK(self[0].score == 0.0);
    }
}

TEST_CASE("unit vectors rank the same under both metrics")
{
    Rng rng(10);
    auto data = random_embeddings(rng, "e", 60, 6);
    for (auto& [id, v] : data) {
        double n = 0;
        for (double x : v) n += x * x;
        for (double& x : v) x /= std::sqrt(n);
    }
    const EmbeddingIndex a(data, Metric::l2), b(data, Metric::inner_product);
    for (int i = 0; i < 10; ++i) {
        const auto& q = data[i].second;
        auto ids = [](const std::vector<Scored>& s) {
            std::vector<std::string> out;
            for (const auto& x : s) out.push_back(x.id);
            return out;
        };
        CHECK(ids(a.knn(q, 60)) == ids(b.knn(q, 60)));
    }
}

TEST_CASE("metric scores are symmetric")
{
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto x = testing::random_vector(rng, 7), y = testing::random_vector(rng, 7);
        CHECK(metric_score(Metric::l2, x, y) == metric_score(Metric::l2, y, x));
        CHECK(metric_score(Metric::inner_product, x, y) == metric_score(Metric::inner_product, y, x));
    }
}

TEST_CASE("inner join matches the brute-force definition")
{
    Rng rng(44);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t nb = 5 + rng.uniform_index(25), na = 5 + rng.uniform_index(25);
        const auto base = random_embeddings(rng, "b", nb, 4);
        const auto aux = random_embeddings(rng, "a", na, 4);
        std::map<std::string, EmbeddingVector> vecs(base.begin(), base.end());
        vecs.insert(aux.begin(), aux.end());
        const std::size_t left = 1 + rng.uniform_index(3), right = 1 + rng.uniform_index(4);
        std::set<Pair> want;
        if (nb <= na) {
            want = cap_pairs(top_pairs(base, aux, right, true), vecs, left, true);
        } else {
            want = cap_pairs(top_pairs(aux, base, left, false), vecs, right, false);
        }
        const auto s = spec(JoinType::inner, static_cast<std::int64_t>(left), static_cast<std::int64_t>(right));
        const auto got = execute_join(s, base, aux, Metric::l2);
        CHECK(matched_pairs(got) == want);
        CHECK(got.matches.size() == want.size());
        check_rank_invariants(got);

        std::map<std::string, std::size_t> per_base, per_aux;
        for (const auto& m : got.matches) {
            per_base[*m.base_id]++;
            per_aux[*m.aux_id]++;
        }
        for (const auto& [id, c] : per_base) CHECK(c <= right);
        for (const auto& [id, c] : per_aux) CHECK(c <= left);

        const auto dual = execute_join(s, base, aux, Metric::l2, {std::nullopt, false, IndexSide::smaller});
        CHECK(render_result_csv(dual) == render_result_csv(got));
    }
}

TEST_CASE("inner join is the same whichever side is indexed on a 20x30 instance")
{
    Rng rng(2030);
    const auto base = random_embeddings(rng, "b", 20, 5);
    const auto aux = random_embeddings(rng, "a", 30, 5);
    for (std::int64_t left : {1, 2, 5}) {
        for (std::int64_t right : {1, 3, 10}) {
            for (auto metric : {Metric::l2, Metric::inner_product}) {
                const auto s = spec(JoinType::inner, left, right);
                const auto a = execute_join(s, base, aux, metric);
                const auto b = execute_join(s, base, aux, metric, {std::nullopt, false, IndexSide::smaller});
                CHECK(render_result_csv(a) == render_result_csv(b));
                // swapping roles mirrors the pairs
                const auto swapped = execute_join(spec(JoinType::inner, right, left), aux, base, metric);
                std::set<Pair> mirrored;
                for (const auto& [x, y] : matched_pairs(swapped)) mirrored.insert({y, x});
                CHECK(mirrored == matched_pairs(a));
            }
        }
    }
}

TEST_CASE("outer joins follow the join-type algebra")
{
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const auto base = random_embeddings(rng, "b", 8 + rng.uniform_index(10), 3);
        const auto aux = random_embeddings(rng, "a", 8 + rng.uniform_index(10), 3);
        const std::int64_t left = 2, right = 3;
        const std::optional<double> threshold = 1.2;
        const JoinOptions opts{threshold, false, IndexSide::larger};

        const auto inner = execute_join(spec(JoinType::inner, left, right), base, aux, Metric::l2, opts);
        const auto full = execute_join(spec(JoinType::full, left, right), base, aux, Metric::l2, opts);
        const auto leftj = execute_join(spec(JoinType::left, left, right), base, aux, Metric::l2, opts);
        const auto rightj = execute_join(spec(JoinType::right, left, right), base, aux, Metric::l2, opts);
        for (const auto* r : {&inner, &full, &leftj, &rightj}) check_rank_invariants(*r);

        const auto inner_pairs = matched_pairs(inner);
        const auto full_pairs = matched_pairs(full);
        CHECK(std::includes(full_pairs.begin(), full_pairs.end(), inner_pairs.begin(), inner_pairs.end()));
        CHECK(full.bidirectional);
        CHECK_FALSE(leftj.bidirectional);

        // LEFT is each base's thresholded top-R plus ABSENT rows
        std::set<Pair> left_want;
        std::set<std::string> unmatched_base;
        for (const auto& [id, v] : base) {
            bool any = false;
            const auto r = ranked(v, aux);
            for (std::size_t i = 0; i < static_cast<std::size_t>(right); ++i) {
                if (r[i].first <= *threshold) {
                    left_want.insert({id, r[i].second});
                    any = true;
                }
            }
            if (!any) unmatched_base.insert(id);
        }
        CHECK(matched_pairs(leftj) == left_want);
        std::set<std::string> absent_base;
        for (const auto& m : leftj.matches) {
            if (m.absent()) {
                CHECK_FALSE(m.aux_id.has_value());
                absent_base.insert(*m.base_id);
            }
        }
        CHECK(absent_base == unmatched_base);

        // RIGHT mirrors it with top-L per aux
        std::set<Pair> right_want;
        std::set<std::string> unmatched_aux;
        for (const auto& [id, v] : aux) {
            bool any = false;
            const auto r = ranked(v, base);
            for (std::size_t i = 0; i < static_cast<std::size_t>(left); ++i) {
                if (r[i].first <= *threshold) {
                    right_want.insert({r[i].second, id});
                    any = true;
                }
            }
            if (!any) unmatched_aux.insert(id);
        }
        CHECK(matched_pairs(rightj) == right_want);
        std::set<std::string> absent_aux;
        for (const auto& m : rightj.matches) {
            if (m.absent()) absent_aux.insert(*m.aux_id);
        }
        CHECK(absent_aux == unmatched_aux);

        // FULL is the union of both retrievals; pairs found both ways say so
        std::set<Pair> union_pairs = left_want;
        union_pairs.insert(right_want.begin(), right_want.end());
        CHECK(full_pairs == union_pairs);
        for (const auto& m : full.matches) {
            if (m.absent()) continue;
            const Pair p{*m.base_id, *m.aux_id};
            const bool l = left_want.contains(p), r = right_want.contains(p);
            CHECK(m.direction == (l && r ? MatchDirection::both
                                  : l    ? MatchDirection::base_to_aux
                                         : MatchDirection::aux_to_base));
        }
        std::set<std::string> full_absent_base, full_absent_aux;
        for (const auto& m : full.matches) {
            if (!m.absent()) continue;
            if (m.base_id) full_absent_base.insert(*m.base_id);
            if (m.aux_id) full_absent_aux.insert(*m.aux_id);
        }
        std::set<std::string> in_full_base, in_full_aux;
        for (const auto& [b, a] : full_pairs) {
            in_full_base.insert(b);
            in_full_aux.insert(a);
        }
        for (const auto& [id, v] : base) CHECK(in_full_base.contains(id) != full_absent_base.contains(id));
        for (const auto& [id, v] : aux) CHECK(in_full_aux.contains(id) != full_absent_aux.contains(id));
    }
}

TEST_CASE("LEFT join with an unreachable threshold returns ABSENT rows only")
{
    Rng rng(3);
    const auto base = random_embeddings(rng, "b", 4, 3);
    const auto aux = random_embeddings(rng, "a", 6, 3);
    const auto r = execute_join(spec(JoinType::left, 1, 10), base, aux, Metric::l2, {-1.0, false, IndexSide::larger});
    REQUIRE(r.matches.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(*r.matches[i].base_id == base[i].first);
        CHECK_FALSE(r.matches[i].aux_id.has_value());
    }
    const auto csv = render_result_csv(r);
    CHECK(csv.find("b0,,0,") != std::string::npos);
}

TEST_CASE("sizes larger than the data return fewer rows")
{
    Rng rng(9);
    const auto base = random_embeddings(rng, "b", 3, 3);
    const auto aux = random_embeddings(rng, "a", 5, 3);
    const auto r = execute_join(spec(JoinType::inner, 100, 100), base, aux, Metric::l2);
    CHECK(r.matches.size() == 15);
    CHECK_THROWS_AS(execute_join(spec(JoinType::inner, 1, 1), {}, aux, Metric::l2), ValidationError);
}

TEST_CASE("both directions for INNER is the union without ABSENT rows")
{
    Rng rng(12);
    const auto base = random_embeddings(rng, "b", 10, 3);
    const auto aux = random_embeddings(rng, "a", 14, 3);
    const auto s = spec(JoinType::inner, 1, 2);
    const auto both = execute_join(s, base, aux, Metric::l2, {std::nullopt, true, IndexSide::larger});
    const auto full = execute_join(spec(JoinType::full, 1, 2), base, aux, Metric::l2);
    CHECK(matched_pairs(both) == matched_pairs(full));
    for (const auto& m : both.matches) CHECK_FALSE(m.absent());
}

TEST_CASE("joins are deterministic")
{
    Rng rng(5);
    const auto base = random_embeddings(rng, "b", 30, 4);
    const auto aux = random_embeddings(rng, "a", 20, 4);
    for (auto t : {JoinType::inner, JoinType::left, JoinType::right, JoinType::full}) {
        const auto s = spec(t, 2, 3);
        CHECK(render_result_csv(execute_join(s, base, aux, Metric::l2))
              == render_result_csv(execute_join(s, base, aux, Metric::l2)));
    }
}

TEST_CASE("a single-stage chain equals a LEFT join")
{
    Rng rng(8);
    const auto base = random_embeddings(rng, "b", 12, 4);
    const auto aux = random_embeddings(rng, "a", 9, 4);
    const EmbeddingIndex index(aux, Metric::l2);
    const auto s = spec(JoinType::left, 1, 3);
    const auto chained = chain_joins(base, {ChainStage{s, &index, nullptr, std::nullopt}});
    const auto direct = execute_join(s, base, aux, Metric::l2);
    CHECK(render_result_csv(chained) == render_result_csv(direct));
    for (const auto& m : chained.matches) CHECK(m.path.size() == 1);
}

TEST_CASE("two bijective hops compose")
{
    // A_i sits next to B_{p(i)}, B_j next to C_{q(j)}
    const std::vector<std::size_t> p{2, 0, 3, 1}, q{1, 3, 0, 2};
    std::vector<EmbeddedRecord> a, b, c;
    for (std::size_t i = 0; i < 4; ++i) {
        const double x = 10.0 * static_cast<double>(i);
        a.push_back({"A" + std::to_string(i), {x, 0.0}});
    }
    b.resize(4);
    c.resize(4);
    for (std::size_t i = 0; i < 4; ++i) {
        b[p[i]] = {"B" + std::to_string(p[i]), {10.0 * static_cast<double>(i) + 0.1, 0.0}};
    }
    for (std::size_t j = 0; j < 4; ++j) {
        const std::size_t i = static_cast<std::size_t>(std::find(p.begin(), p.end(), j) - p.begin());
        c[q[j]] = {"C" + std::to_string(q[j]), {10.0 * static_cast<double>(i) + 0.2, 0.0}};
    }
    const EmbeddingIndex bi(b, Metric::l2), ci(c, Metric::l2);
    const auto result = chain_joins(a, {ChainStage{{"A", "B", JoinType::left, 1, 1, "s"}, &bi, nullptr, {}},
                                        ChainStage{{"B", "C", JoinType::left, 1, 1, "s"}, &ci, &bi, {}}});
    REQUIRE(result.matches.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& m = result.matches[i];
        CHECK(*m.base_id == "A" + std::to_string(i));
        CHECK(*m.aux_id == "C" + std::to_string(q[p[i]]));
        CHECK(m.path == std::vector<std::string>{"B" + std::to_string(p[i]), "C" + std::to_string(q[p[i]])});
        CHECK(m.score == doctest::Approx(0.2));
    }
}

TEST_CASE("broken chain linkage names the stage")
{
    const std::vector<EmbeddedRecord> a{{"A0", {0.0}}}, b{{"B0", {0.0}}}, other{{"X0", {0.0}}};
    const EmbeddingIndex bi(b, Metric::l2), oi(other, Metric::l2);
    try {
        chain_joins(a, {ChainStage{{"A", "B", JoinType::left, 1, 1, "s"}, &bi, nullptr, {}},
                        ChainStage{{"B", "X", JoinType::left, 1, 1, "s"}, &oi, &oi, {}}});
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("stage 2") != std::string::npos);
    }
}

TEST_CASE("label aggregation")
{
    JoinResult r;
    r.order = ScoreOrder::ascending;
    r.matches = {{std::string("u"), std::string("x"), 1, 0.1, {}, {}},
                 {std::string("u"), std::string("y"), 2, 0.2, {}, {}},
                 {std::string("u"), std::string("z"), 3, 0.3, {}, {}},
                 {std::string("v"), std::nullopt, 0, std::nan(""), {}, {}}};
    const std::unordered_map<std::string, double> labels{{"x", 2.0}, {"y", 4.0}, {"z", 9.0}};
    CHECK(aggregate_labels(r, labels, 1) == std::map<std::string, double>{{"u", 2.0}});
    CHECK(aggregate_labels(r, labels, 2) == std::map<std::string, double>{{"u", 3.0}});
    CHECK(aggregate_labels(r, labels, 10) == std::map<std::string, double>{{"u", 5.0}});
    CHECK_THROWS_AS(aggregate_labels(r, {{"x", 1.0}}, 3), ValidationError);
    CHECK_THROWS_AS(aggregate_labels(r, labels, 0), ValidationError);
}

TEST_CASE("result csv round-trips")
{
    Rng rng(2);
    const auto base = random_embeddings(rng, "b", 6, 3);
    const auto aux = random_embeddings(rng, "a", 4, 3);
    const auto r = execute_join(spec(JoinType::full, 1, 2), base, aux, Metric::l2, {0.9, false, IndexSide::larger});
    const auto csv = render_result_csv(r);
    CHECK(csv.rfind("base_id,aux_id,rank,score,direction\n", 0) == 0);
    const auto back = parse_result_csv(csv);
    CHECK(render_result_csv(back) == csv);
}
