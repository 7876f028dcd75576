#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "emberish/config.hpp"
#include "emberish/lexrank.hpp"
#include "emberish/random.hpp"
#include "emberish/record.hpp"

namespace emberish {

struct SamplerConfig {
    SamplerKind kind = SamplerKind::stratified_bm25;
    std::size_t tier_size = 20;
    std::uint64_t seed = 0;
};

/// Draws one negative per supervision pair. Candidate tiers for the
/// stratified kinds are computed once per anchor and reused across epochs.
class NegativeSampler {
  public:
    /// Throws ValidationError for an empty pair list, tier_size 0, an aux
    /// dataset with fewer than 2 records, or the custom kind.
    NegativeSampler(std::vector<SupervisionPair> pairs, const Dataset& base, const Dataset& aux,
                    SamplerConfig cfg);

    /// One triple per pair, in pair order. Each epoch uses its own stream.
    std::vector<SupervisionTriple> sample(int epoch) const;

    /// Stratified candidates for an anchor (empty for the random kind).
    const std::vector<std::string>& tier(const std::string& anchor_id) const;

  private:
    std::string draw(const std::string& anchor_id, Rng& rng) const;
    std::string draw_uniform(const std::unordered_set<std::string>& positives, Rng& rng) const;

    std::vector<SupervisionPair> pairs_;
    const Dataset* aux_;
    SamplerConfig cfg_;
    std::unordered_map<std::string, std::unordered_set<std::string>> positives_;
    std::unordered_map<std::string, std::vector<std::string>> tiers_;
};

/// Triples for the first epoch of a NegativeSampler.
std::vector<SupervisionTriple> sample_triples(const std::vector<SupervisionPair>& pairs,
                                              const Dataset& base, const Dataset& aux,
                                              const SamplerConfig& cfg);

/// Self-supervised triples: for each base record the positive is its BM25
/// top-1 aux record and the negative a uniform draw from the other aux
/// records; per_record draws per base record. Empty when aux has fewer than
/// two records.
std::vector<SupervisionTriple> build_pretraining_pairs(const Dataset& base, const Dataset& aux,
                                                       std::size_t per_record = 1,
                                                       std::uint64_t seed = 0);

struct PerturbationConfig {
    std::size_t perturbations_per_row = 5;
    double max_fraction = 0.25;
    std::size_t copies_per_row = 5;
    std::uint64_t seed = 0;
};

/// perturbations_per_row for a named preset: "easy" -> 5, "hard" -> 15.
std::size_t preset_perturbations(std::string_view preset);

struct FuzzyJoinData {
    Dataset base;
    Dataset aux;
    std::vector<SupervisionPair> truth;
};

/// Synthetic fuzzy-join workload. aux is the source unchanged; base holds
/// copies_per_row perturbed copies of each source row, with ids
/// "<source id>-<copy>". Edits (insert, delete, replace, chosen uniformly)
/// touch value tokens only. A row with L value tokens receives
/// min(perturbations_per_row, max(1, floor(max_fraction * L))) edits, or
/// none when perturbations_per_row is 0. New tokens are drawn from the
/// sorted source vocabulary. Row r uses the stream seeded by seed ^ r.
FuzzyJoinData generate_fuzzy_join(const Dataset& source, const PerturbationConfig& cfg);

/// Number of edits generate_fuzzy_join applies to a row of L value tokens.
std::size_t perturbation_budget(std::size_t value_tokens, const PerturbationConfig& cfg);

struct TruthSplit {
    std::vector<SupervisionPair> train;
    std::vector<SupervisionPair> test;
};

/// Splits by aux id group so that no aux id lands in both halves.
/// round(test_fraction * groups) groups go to test (at least one and at most
/// groups - 1 when there are two or more groups). Pair order is preserved.
TruthSplit split_train_test(const std::vector<SupervisionPair>& truth, double test_fraction,
                            std::uint64_t seed);

/// A movie-like source table (title, year, genre, plot) with Zipf-distributed
/// pseudo-word titles and plots. Ids are row ordinals.
Dataset synthesize_source(std::size_t rows, std::uint64_t seed);

}  // namespace emberish
