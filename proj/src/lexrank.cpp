#include "emberish/lexrank.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "emberish/error.hpp"
#include "emberish/parallel.hpp"

namespace emberish {

Bm25Index::Bm25Index(std::vector<std::string> doc_ids,
                     const std::vector<std::vector<std::string>>& docs, Params params)
    : params_(params), doc_ids_(std::move(doc_ids))
{
    if (doc_ids_.size() != docs.size()) {
        throw ValidationError("bm25: id count does not match document count");
    }
    by_id_.reserve(doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        if (!by_id_.emplace(doc_ids_[i], i).second) {
            throw ValidationError("bm25: duplicate document id " + doc_ids_[i]);
        }
    }
    doc_len_.resize(docs.size());
    std::size_t total = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        doc_len_[d] = docs[d].size();
        total += docs[d].size();
        std::unordered_map<std::uint32_t, std::uint32_t> tf;
        for (const auto& tok : docs[d]) {
            auto [it, fresh] = terms_.emplace(tok, static_cast<std::uint32_t>(postings_.size()));
            if (fresh) {
                postings_.emplace_back();
            }
            ++tf[it->second];
        }
        std::vector<std::pair<std::uint32_t, std::uint32_t>> sorted(tf.begin(), tf.end());
        std::sort(sorted.begin(), sorted.end());
        for (auto [term, count] : sorted) {
            postings_[term].push_back({static_cast<std::uint32_t>(d), count});
        }
    }
    avgdl_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
}

Bm25Index Bm25Index::from_sentences(const std::vector<Sentence>& sentences, Params params)
{
    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> docs;
    ids.reserve(sentences.size());
    docs.reserve(sentences.size());
    for (const auto& s : sentences) {
        ids.push_back(s.record_id);
        docs.push_back(s.tokens);
    }
    return Bm25Index(std::move(ids), docs, params);
}

std::optional<std::uint32_t> Bm25Index::term_of(std::string_view term) const
{
    auto it = terms_.find(std::string(term));
    if (it == terms_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::size_t> Bm25Index::index_of(const std::string& doc_id) const
{
    auto it = by_id_.find(doc_id);
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t Bm25Index::document_frequency(std::string_view term) const
{
    auto t = term_of(term);
    return t ? postings_[*t].size() : 0;
}

double Bm25Index::idf(std::string_view term) const
{
    const double n = static_cast<double>(size());
    const double df = static_cast<double>(document_frequency(term));
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Bm25Index::term_weight(double tf, std::size_t doc, double idf) const
{
    const double len_norm = avgdl_ > 0.0 ? static_cast<double>(doc_len_[doc]) / avgdl_ : 0.0;
    const double k1 = params_.k1;
    const double b = params_.b;
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len_norm));
}

double Bm25Index::score_at(std::span<const std::string> query, std::size_t doc) const
{
    double s = 0.0;
    for (const auto& q : query) {
        auto t = term_of(q);
        if (!t) {
            continue;
        }
        const auto& plist = postings_[*t];
        auto it = std::lower_bound(plist.begin(), plist.end(), doc,
                                   [](const Posting& p, std::size_t d) { return p.doc < d; });
        if (it == plist.end() || it->doc != doc) {
            continue;
        }
        s += term_weight(it->tf, doc, idf(q));
    }
    return s;
}

double Bm25Index::score(std::span<const std::string> query, const std::string& doc_id) const
{
    auto doc = index_of(doc_id);
    if (!doc) {
        throw ValidationError("bm25: unknown document id " + doc_id);
    }
    return score_at(query, *doc);
}

std::vector<double> Bm25Index::score_all(std::span<const std::string> query) const
{
    std::vector<double> acc(size(), 0.0);
    for (const auto& q : query) {
        auto t = term_of(q);
        if (!t) {
            continue;
        }
        const double w_idf = idf(q);
        for (const auto& p : postings_[*t]) {
            acc[p.doc] += term_weight(p.tf, p.doc, w_idf);
        }
    }
    return acc;
}

double bm25_score(const Bm25Index& index, std::span<const std::string> query,
                  const std::string& doc_id)
{
    return index.score(query, doc_id);
}

std::vector<Scored> bm25_topk(const Bm25Index& index, std::span<const std::string> query,
                              std::size_t k, const std::unordered_set<std::string>& exclude)
{
    const auto scores = index.score_all(query);
    const auto& ids = index.doc_ids();
    std::vector<std::size_t> cand;
    cand.reserve(ids.size());
    for (std::size_t d = 0; d < ids.size(); ++d) {
        if (!exclude.contains(ids[d])) {
            cand.push_back(d);
        }
    }
    const std::size_t take = std::min(k, cand.size());
    auto cmp = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return scores[a] > scores[b];
        }
        return ids[a] < ids[b];
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), cmp);
    std::vector<Scored> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back({ids[cand[i]], scores[cand[i]]});
    }
    return out;
}

double jaccard(std::span<const std::string> a, std::span<const std::string> b)
{
    std::vector<std::string_view> sa(a.begin(), a.end());
    std::vector<std::string_view> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    std::sort(sb.begin(), sb.end());
    sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
    if (sa.empty() && sb.empty()) {
        return 0.0;
    }
    std::size_t inter = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < sa.size() && j < sb.size()) {
        if (sa[i] == sb[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (sa[i] < sb[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard_sorted(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b)
{
    if (a.empty() && b.empty()) {
        return 0.0;
    }
    std::size_t inter = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::u32string to_code_points(std::string_view s)
{
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        char32_t cp = b0;
        if (b0 >= 0xC0 && b0 < 0xE0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if (b0 >= 0xE0 && b0 < 0xF0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if (b0 >= 0xF0 && b0 < 0xF8) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len == 1 || i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            ok = (b & 0xC0) == 0x80;
            cp = (cp << 6) | (b & 0x3F);
        }
        if (!ok) {
            len = 1;
            cp = b0;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::size_t levenshtein_bounded(std::u32string_view a, std::u32string_view b,
                                std::size_t max_distance)
{
    if (a.size() < b.size()) {
        std::swap(a, b);
    }
    if (a.size() - b.size() > max_distance) {
        return max_distance + 1;
    }
    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        std::size_t row_min = row[0];
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
            row_min = std::min(row_min, row[j]);
        }
        if (row_min > max_distance) {
            return max_distance + 1;
        }
    }
    return std::min(row[b.size()], max_distance + 1);
}

std::size_t levenshtein(std::string_view a, std::string_view b)
{
    const auto ca = to_code_points(a);
    const auto cb = to_code_points(b);
    return levenshtein_bounded(ca, cb, std::max(ca.size(), cb.size()));
}

std::string_view to_string(LexicalKind kind) noexcept
{
    switch (kind) {
    case LexicalKind::ld: return "LD";
    case LexicalKind::j_ws: return "J-WS";
    case LexicalKind::j_2g: return "J-2G";
    case LexicalKind::jk_ws: return "JK-WS";
    case LexicalKind::jk_2g: return "JK-2G";
    case LexicalKind::bm25: return "BM25";
    }
    return "BM25";
}

LexicalKind parse_lexical_kind(std::string_view text)
{
    std::string u(text);
    std::transform(u.begin(), u.end(), u.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (u == "LD") return LexicalKind::ld;
    if (u == "J-WS") return LexicalKind::j_ws;
    if (u == "J-2G") return LexicalKind::j_2g;
    if (u == "JK-WS") return LexicalKind::jk_ws;
    if (u == "JK-2G") return LexicalKind::jk_2g;
    if (u == "BM25") return LexicalKind::bm25;
    throw ValidationError("unknown baseline '" + std::string(text)
                          + "' (expected LD, J-WS, J-2G, JK-WS, JK-2G or BM25)");
}

namespace {

bool uses_key_column(LexicalKind kind)
{
    return kind == LexicalKind::ld || kind == LexicalKind::jk_ws || kind == LexicalKind::jk_2g;
}

std::vector<std::string> key_values(const Dataset& ds, const std::string& column)
{
    const auto& cols = ds.column_names();
    if (std::find(cols.begin(), cols.end(), column) == cols.end()) {
        throw ValidationError("missing key column '" + column + "' in dataset " + ds.name());
    }
    std::vector<std::string> out;
    out.reserve(ds.size());
    for (const auto& r : ds.records()) {
        const std::string* v = r.find(column);
        out.push_back(v ? *v : std::string{});
    }
    return out;
}

class Vocabulary {
  public:
    std::vector<std::uint32_t> encode_set(const std::vector<std::string>& tokens)
    {
        std::vector<std::uint32_t> ids;
        ids.reserve(tokens.size());
        for (const auto& t : tokens) {
            auto [it, fresh] = map_.emplace(t, static_cast<std::uint32_t>(map_.size()));
            ids.push_back(it->second);
        }
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    }

  private:
    std::unordered_map<std::string, std::uint32_t> map_;
};

}  // namespace

JoinResult lexical_join(LexicalKind kind, const Dataset& base, const Dataset& aux,
                        const std::optional<std::string>& key_column, std::size_t k)
{
    if (k == 0) {
        throw ValidationError("lexical join: k must be ≥ 1");
    }
    if (uses_key_column(kind) && (!key_column || key_column->empty())) {
        throw ValidationError(std::string(to_string(kind)) + " requires a key column");
    }

    JoinResult result;
    result.spec.base_ref = base.name().empty() ? "base" : base.name();
    result.spec.aux_ref = aux.name().empty() ? "aux" : aux.name();
    result.spec.join_type = JoinType::inner;
    result.spec.right_size = static_cast<std::int64_t>(k);
    result.spec.left_size = static_cast<std::int64_t>(std::max<std::size_t>(1, base.size()));
    result.spec.supervision_ref = "none";
    result.order = kind == LexicalKind::ld ? ScoreOrder::ascending : ScoreOrder::descending;

    // per_base[i] holds (aux index, score) survivors for base record i.
    std::vector<std::vector<std::pair<std::size_t, double>>> per_base(base.size());

    if (kind == LexicalKind::ld) {
        auto bk = key_values(base, *key_column);
        auto ak = key_values(aux, *key_column);
        std::vector<std::u32string> bcp;
        std::vector<std::u32string> acp;
        for (auto& s : bk) bcp.push_back(to_code_points(s));
        for (auto& s : ak) acp.push_back(to_code_points(s));
        parallel_for(base.size(), [&](std::size_t i) {
            for (std::size_t j = 0; j < aux.size(); ++j) {
                const auto d = levenshtein_bounded(bcp[i], acp[j], kEditDistanceThreshold);
                if (d <= kEditDistanceThreshold) {
                    per_base[i].emplace_back(j, static_cast<double>(d));
                }
            }
        });
    } else if (kind == LexicalKind::bm25) {
        const auto bs = prepare_dataset(base, TokenizerMode::whitespace);
        const auto as = prepare_dataset(aux, TokenizerMode::whitespace);
        const auto index = Bm25Index::from_sentences(as);
        parallel_for(base.size(), [&](std::size_t i) {
            const auto scores = index.score_all(bs[i].tokens);
            for (std::size_t j = 0; j < scores.size(); ++j) {
                if (scores[j] > 0.0) {
                    per_base[i].emplace_back(j, scores[j]);
                }
            }
        });
    } else {
        const TokenizerMode mode = (kind == LexicalKind::j_2g || kind == LexicalKind::jk_2g)
            ? TokenizerMode::char2gram
            : TokenizerMode::whitespace;
        std::vector<std::string> btext;
        std::vector<std::string> atext;
        if (uses_key_column(kind)) {
            btext = key_values(base, *key_column);
            atext = key_values(aux, *key_column);
        } else {
            for (const auto& r : base.records()) btext.push_back(sentence_text(r));
            for (const auto& r : aux.records()) atext.push_back(sentence_text(r));
        }
        Vocabulary vocab;
        std::vector<std::vector<std::uint32_t>> bsets;
        std::vector<std::vector<std::uint32_t>> asets;
        for (const auto& t : btext) bsets.push_back(vocab.encode_set(tokenize(t, mode)));
        for (const auto& t : atext) asets.push_back(vocab.encode_set(tokenize(t, mode)));
        parallel_for(base.size(), [&](std::size_t i) {
            for (std::size_t j = 0; j < aux.size(); ++j) {
                const double s = jaccard_sorted(bsets[i], asets[j]);
                if (s >= kJaccardThreshold) {
                    per_base[i].emplace_back(j, s);
                }
            }
        });
    }

    const ScoreOrder order = result.order;
    for (std::size_t i = 0; i < base.size(); ++i) {
        auto& cands = per_base[i];
        const std::size_t take = std::min(k, cands.size());
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take),
                          cands.end(), [&](const auto& x, const auto& y) {
                              if (x.second != y.second) {
                                  return better(order, x.second, y.second);
                              }
                              return aux[x.first].id < aux[y.first].id;
                          });
        for (std::size_t r = 0; r < take; ++r) {
            Match m;
            m.base_id = base[i].id;
            m.aux_id = aux[cands[r].first].id;
            m.rank = r + 1;
            m.score = cands[r].second;
            result.matches.push_back(std::move(m));
        }
    }
    return result;
}

}  // namespace emberish
