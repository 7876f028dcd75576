#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emberish/embedding.hpp"
#include "emberish/joinspec.hpp"
#include "emberish/prepare.hpp"

namespace emberish {

enum class EncoderInit { random, pretrained_artifact };
enum class SamplerKind { random, stratified_bm25, stratified_jaccard, custom };
enum class Pooling { mean };

std::string_view to_string(SamplerKind kind) noexcept;
SamplerKind parse_sampler_kind(std::string_view text);

/// Engine configuration. Every key except data_dir has a default; the JSON
/// keys are the member names.
struct EngineConfig {
    std::string data_dir;

    // join specification
    JoinType join_type = JoinType::inner;
    std::int64_t left_size = 1;
    std::int64_t right_size = 10;
    std::optional<double> threshold;
    bool both_directions = false;

    // encoders
    int num_encoders = 1;
    EncoderInit encoder_init = EncoderInit::random;
    bool finetune = true;
    std::size_t embedding_dim = 200;
    std::size_t hash_dim = 1u << 16;
    Pooling pooling = Pooling::mean;
    TokenizerMode tokenizer = TokenizerMode::whitespace;
    Metric distance = Metric::l2;
    bool normalize = true;

    // supervision and sampling
    double supervision_fraction = 1.0;
    SamplerKind sampler = SamplerKind::stratified_bm25;
    std::size_t tier_size = 20;
    bool freeze_negatives = false;

    // optimisation
    int epochs = 10;
    std::size_t batch_size = 8;
    double learning_rate = 1e-5;
    double loss_margin = 1.0;

    // self-supervised pretraining
    bool pretrain = true;
    int pretrain_epochs = 20;
    std::size_t pretrain_per_record = 1;

    // lexical baselines
    std::string key_column;

    // synthetic fuzzy-join generation
    std::string generate_preset = "easy";
    std::size_t source_rows = 1000;
    std::size_t copies_per_row = 5;
    double max_fraction = 0.25;
    double test_fraction = 0.2;

    std::uint64_t seed = 42;

    bool operator==(const EngineConfig&) const = default;
};

/// Names of every accepted JSON key.
const std::vector<std::string>& config_keys();

/// Parses a JSON object. Unknown keys, type mismatches, out-of-range values
/// and a missing data_dir raise ValidationError naming the key.
EngineConfig parse_config(std::string_view json_text);

/// JSON snapshot of a config (used in run manifests); parse_config accepts it.
std::string render_config(const EngineConfig& config);

}  // namespace emberish
