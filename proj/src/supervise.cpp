#include "emberish/supervise.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "emberish/error.hpp"
#include "emberish/parallel.hpp"
#include "emberish/prepare.hpp"

namespace emberish {

NegativeSampler::NegativeSampler(std::vector<SupervisionPair> pairs, const Dataset& base,
                                 const Dataset& aux, SamplerConfig cfg)
    : pairs_(std::move(pairs)), aux_(&aux), cfg_(cfg)
{
    if (pairs_.empty()) {
        throw ValidationError("negative sampling needs at least one supervision pair");
    }
    if (cfg_.tier_size == 0) {
        throw ValidationError("tier_size must be ≥ 1");
    }
    if (cfg_.kind == SamplerKind::custom) {
        throw ValidationError("the custom sampler expects supervision triples, not pairs");
    }
    if (aux.size() < 2) {
        throw ValidationError("cannot sample negative: aux dataset has fewer than 2 records");
    }
    for (const auto& p : pairs_) {
        if (!base.contains(p.base_id)) {
            throw ValidationError("supervision pair references unknown base id " + p.base_id);
        }
        if (!aux.contains(p.aux_id)) {
            throw ValidationError("supervision pair references unknown aux id " + p.aux_id);
        }
        positives_[p.base_id].insert(p.aux_id);
    }
    for (const auto& [anchor, pos] : positives_) {
        if (pos.size() >= aux.size()) {
            throw ValidationError("cannot sample negative for " + anchor
                                  + ": every aux record is a known positive");
        }
    }
    if (cfg_.kind == SamplerKind::random) {
        return;
    }

    // Anchors in first-appearance order so tier construction is stable.
    std::vector<std::string> anchors;
    for (const auto& p : pairs_) {
        if (!tiers_.count(p.base_id)) {
            tiers_.emplace(p.base_id, std::vector<std::string>{});
            anchors.push_back(p.base_id);
        }
    }
    const auto aux_sentences = prepare_dataset(aux);
    std::vector<std::vector<std::string>*> slots;
    for (const auto& a : anchors) {
        slots.push_back(&tiers_[a]);
    }

    if (cfg_.kind == SamplerKind::stratified_bm25) {
        const auto index = Bm25Index::from_sentences(aux_sentences);
        parallel_for(anchors.size(), [&](std::size_t i) {
            const auto query = prepare_sentence(base[*base.index_of(anchors[i])]).tokens;
            const auto& pos = positives_.at(anchors[i]);
            for (const auto& s : bm25_topk(index, query, cfg_.tier_size,
                                           std::unordered_set<std::string>(pos.begin(), pos.end()))) {
                if (s.score > 0.0) {
                    slots[i]->push_back(s.id);
                }
            }
        });
    } else {
        parallel_for(anchors.size(), [&](std::size_t i) {
            const auto query = prepare_sentence(base[*base.index_of(anchors[i])]).tokens;
            const auto& pos = positives_.at(anchors[i]);
            std::vector<Scored> scored;
            for (const auto& s : aux_sentences) {
                if (pos.count(s.record_id)) {
                    continue;
                }
                const double j = jaccard(query, s.tokens);
                if (j > 0.0) {
                    scored.push_back({s.record_id, j});
                }
            }
            std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
                return a.score != b.score ? a.score > b.score : a.id < b.id;
            });
            if (scored.size() > cfg_.tier_size) {
                scored.resize(cfg_.tier_size);
            }
            for (auto& s : scored) {
                slots[i]->push_back(std::move(s.id));
            }
        });
    }
}

const std::vector<std::string>& NegativeSampler::tier(const std::string& anchor_id) const
{
    static const std::vector<std::string> empty;
    auto it = tiers_.find(anchor_id);
    return it == tiers_.end() ? empty : it->second;
}

std::string NegativeSampler::draw_uniform(const std::unordered_set<std::string>& positives,
                                          Rng& rng) const
{
    const std::size_t n = aux_->size();
    if (positives.size() * 2 <= n) {
        for (;;) {
            const auto& id = (*aux_)[rng.uniform_index(n)].id;
            if (!positives.count(id)) {
                return id;
            }
        }
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        if (!positives.count((*aux_)[i].id)) {
            candidates.push_back(i);
        }
    }
    return (*aux_)[candidates[rng.uniform_index(candidates.size())]].id;
}

std::string NegativeSampler::draw(const std::string& anchor_id, Rng& rng) const
{
    const auto& pos = positives_.at(anchor_id);
    const auto& t = tier(anchor_id);
    if (!t.empty()) {
        return t[rng.uniform_index(t.size())];
    }
    return draw_uniform(pos, rng);
}

std::vector<SupervisionTriple> NegativeSampler::sample(int epoch) const
{
    Rng rng(derive_seed(cfg_.seed, "negatives-" + std::to_string(epoch)));
    std::vector<SupervisionTriple> out;
    out.reserve(pairs_.size());
    for (const auto& p : pairs_) {
        out.push_back({p.base_id, p.aux_id, draw(p.base_id, rng)});
    }
    return out;
}

std::vector<SupervisionTriple> sample_triples(const std::vector<SupervisionPair>& pairs,
                                              const Dataset& base, const Dataset& aux,
                                              const SamplerConfig& cfg)
{
    return NegativeSampler(pairs, base, aux, cfg).sample(0);
}

std::vector<SupervisionTriple> build_pretraining_pairs(const Dataset& base, const Dataset& aux,
                                                       std::size_t per_record, std::uint64_t seed)
{
    if (base.empty() || aux.empty()) {
        throw ValidationError("pretraining pairs need non-empty datasets");
    }
    std::vector<SupervisionTriple> out;
    if (aux.size() < 2 || per_record == 0) {
        return out;
    }
    const auto index = Bm25Index::from_sentences(prepare_dataset(aux));
    const auto base_sentences = prepare_dataset(base);
    std::vector<std::string> top(base.size());
    parallel_for(base.size(), [&](std::size_t i) {
        top[i] = bm25_topk(index, base_sentences[i].tokens, 1).front().id;
    });

    Rng rng(derive_seed(seed, "pretrain-negatives"));
    out.reserve(base.size() * per_record);
    for (std::size_t i = 0; i < base.size(); ++i) {
        const std::size_t skip = *aux.index_of(top[i]);
        for (std::size_t r = 0; r < per_record; ++r) {
            std::size_t j = rng.uniform_index(aux.size() - 1);
            if (j >= skip) {
                ++j;
            }
            out.push_back({base[i].id, top[i], aux[j].id});
        }
    }
    return out;
}

std::size_t preset_perturbations(std::string_view preset)
{
    if (preset == "easy") return 5;
    if (preset == "hard") return 15;
    throw ValidationError("unknown preset '" + std::string(preset) + "' (expected easy or hard)");
}

namespace {

std::vector<std::string> split_words(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            out.emplace_back(text.substr(start, i - start));
        }
    }
    return out;
}

std::string join_words(const std::vector<std::string>& words)
{
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

}  // namespace

std::size_t perturbation_budget(std::size_t value_tokens, const PerturbationConfig& cfg)
{
    if (cfg.perturbations_per_row == 0) {
        return 0;
    }
    const auto cap = static_cast<std::size_t>(
        std::floor(cfg.max_fraction * static_cast<double>(value_tokens)));
    return std::min(cfg.perturbations_per_row, std::max<std::size_t>(1, cap));
}

FuzzyJoinData generate_fuzzy_join(const Dataset& source, const PerturbationConfig& cfg)
{
    if (!(cfg.max_fraction > 0.0 && cfg.max_fraction <= 1.0)) {
        throw ValidationError("max_fraction must be in (0, 1]");
    }
    if (cfg.copies_per_row == 0) {
        throw ValidationError("copies_per_row must be ≥ 1");
    }

    std::set<std::string> vocab_set;
    for (const auto& r : source.records()) {
        for (const auto& f : r.fields) {
            for (auto& w : split_words(f.value)) vocab_set.insert(std::move(w));
        }
    }
    const std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());

    const std::size_t n = source.size();
    std::vector<std::vector<Record>> rows(n);
    parallel_for(n, [&](std::size_t r) {
        const Record& src = source[r];
        Rng rng(cfg.seed ^ static_cast<std::uint64_t>(r));
        for (std::size_t c = 0; c < cfg.copies_per_row; ++c) {
            // Flattened value tokens tagged with their field.
            std::vector<std::pair<std::size_t, std::string>> toks;
            for (std::size_t f = 0; f < src.fields.size(); ++f) {
                for (auto& w : split_words(src.fields[f].value)) toks.emplace_back(f, std::move(w));
            }
            const std::size_t edits = src.fields.empty() ? 0 : perturbation_budget(toks.size(), cfg);
            for (std::size_t e = 0; e < edits; ++e) {
                std::size_t op = rng.uniform_index(3);
                if (toks.empty() || vocab.empty()) {
                    op = vocab.empty() ? 1 : 0;
                    if (toks.empty() && vocab.empty()) break;
                }
                if (op == 0) {
                    const std::size_t pos = rng.uniform_index(toks.size() + 1);
                    const std::size_t field = toks.empty() ? 0
                        : pos < toks.size()                ? toks[pos].first
                                                           : toks.back().first;
                    toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(pos),
                                {field, vocab[rng.uniform_index(vocab.size())]});
                } else if (op == 1) {
                    toks.erase(toks.begin()
                               + static_cast<std::ptrdiff_t>(rng.uniform_index(toks.size())));
                } else {
                    const std::size_t pos = rng.uniform_index(toks.size());
                    toks[pos].second = vocab[rng.uniform_index(vocab.size())];
                }
            }
            std::vector<std::vector<std::string>> per_field(src.fields.size());
            for (auto& [f, w] : toks) per_field[f].push_back(std::move(w));
            Record out{src.id + "-" + std::to_string(c), {}};
            for (std::size_t f = 0; f < src.fields.size(); ++f) {
                out.fields.push_back({src.fields[f].key, join_words(per_field[f])});
            }
            rows[r].push_back(std::move(out));
        }
    });

    FuzzyJoinData data;
    std::vector<Record> base_records;
    base_records.reserve(n * cfg.copies_per_row);
    for (std::size_t r = 0; r < n; ++r) {
        for (auto& rec : rows[r]) {
            data.truth.push_back({rec.id, source[r].id});
            base_records.push_back(std::move(rec));
        }
    }
    data.base = Dataset("base", Role::base, std::move(base_records), source.column_names());
    data.aux = Dataset("aux", Role::auxiliary, source.records(), source.column_names());
    return data;
}

TruthSplit split_train_test(const std::vector<SupervisionPair>& truth, double test_fraction,
                            std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ValidationError("test_fraction must be in (0, 1)");
    }
    std::vector<std::string> groups;
    std::unordered_set<std::string> seen;
    for (const auto& p : truth) {
        if (seen.insert(p.aux_id).second) groups.push_back(p.aux_id);
    }
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(groups.size())));
    if (groups.size() >= 2) {
        n_test = std::clamp<std::size_t>(n_test, 1, groups.size() - 1);
    }
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(std::span<std::string>(groups));
    const std::unordered_set<std::string> test_groups(groups.begin(),
                                                      groups.begin() + static_cast<std::ptrdiff_t>(n_test));
    TruthSplit split;
    for (const auto& p : truth) {
        (test_groups.count(p.aux_id) ? split.test : split.train).push_back(p);
    }
    return split;
}

namespace {

constexpr const char* kOnsets[] = {"b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n",
                                   "p", "r", "s", "t", "v", "w", "z", "br", "st", "tr", "gr"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
constexpr const char* kCodas[] = {"", "", "n", "r", "s", "t", "l", "m", "ck", "nd"};
constexpr const char* kGenres[] = {"drama",  "comedy",  "thriller", "horror",  "romance",
                                   "action", "western", "musical",  "fantasy", "mystery",
                                   "crime",  "family"};

std::vector<std::string> pseudo_words(std::size_t n, Rng& rng)
{
    std::set<std::string> seen;
    std::vector<std::string> out;
    while (out.size() < n) {
        std::string w;
        const std::size_t syllables = 1 + rng.uniform_index(3);
        for (std::size_t s = 0; s < syllables; ++s) {
            w += kOnsets[rng.uniform_index(std::size(kOnsets))];
            w += kVowels[rng.uniform_index(std::size(kVowels))];
            w += kCodas[rng.uniform_index(std::size(kCodas))];
        }
        if (seen.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

Dataset synthesize_source(std::size_t rows, std::uint64_t seed)
{
    Rng rng(derive_seed(seed, "source"));
    const std::size_t vocab_size = std::max<std::size_t>(50, rows * 3);
    const auto words = pseudo_words(vocab_size, rng);
    // Zipf(1) cumulative weights over word ranks.
    std::vector<double> cdf(vocab_size);
    double total = 0.0;
    for (std::size_t i = 0; i < vocab_size; ++i) {
        total += 1.0 / static_cast<double>(i + 1);
        cdf[i] = total;
    }
    std::vector<Record> records;
    records.reserve(rows);
    auto zipf_words = [&](std::size_t n) {
        std::vector<std::string> out;
        for (std::size_t t = 0; t < n; ++t) {
            const double u = rng.uniform_real() * total;
            const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            out.push_back(words[std::min<std::size_t>(it - cdf.begin(), vocab_size - 1)]);
        }
        return join_words(out);
    };
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string title = zipf_words(2 + rng.uniform_index(4));
        const std::string year = std::to_string(1950 + rng.uniform_index(71));
        const std::string genre = kGenres[rng.uniform_index(std::size(kGenres))];
        const std::string plot = zipf_words(14 + rng.uniform_index(17));
        records.push_back(
            {std::to_string(r), {{"title", title}, {"year", year}, {"genre", genre}, {"plot", plot}}});
    }
    return Dataset("source", Role::auxiliary, std::move(records), {"title", "year", "genre", "plot"});
}

}  // namespace emberish
