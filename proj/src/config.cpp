#include "emberish/config.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

#include "emberish/error.hpp"

namespace emberish {

using nlohmann::json;

std::string_view to_string(SamplerKind kind) noexcept
{
    switch (kind) {
    case SamplerKind::random: return "random";
    case SamplerKind::stratified_bm25: return "stratified_bm25";
    case SamplerKind::stratified_jaccard: return "stratified_jaccard";
    case SamplerKind::custom: return "custom";
    }
    return "random";
}

SamplerKind parse_sampler_kind(std::string_view text)
{
    if (text == "random") return SamplerKind::random;
    if (text == "stratified_bm25") return SamplerKind::stratified_bm25;
    if (text == "stratified_jaccard") return SamplerKind::stratified_jaccard;
    if (text == "custom") return SamplerKind::custom;
    throw ValidationError("sampler: unknown kind '" + std::string(text)
                          + "' (expected random, stratified_bm25, stratified_jaccard or custom)");
}

namespace {

const std::vector<std::string> kKeys{
    "data_dir",         "join_type",       "left_size",         "right_size",
    "threshold",        "both_directions", "num_encoders",      "encoder_init",
    "finetune",         "embedding_dim",   "hash_dim",          "pooling",
    "tokenizer",        "distance",        "normalize",         "supervision_fraction",
    "sampler",          "tier_size",       "freeze_negatives",  "epochs",
    "batch_size",       "learning_rate",   "loss_margin",       "pretrain",
    "pretrain_epochs",  "pretrain_per_record", "key_column",    "generate_preset",
    "source_rows",      "copies_per_row",  "max_fraction",      "test_fraction",
    "seed",
};

[[noreturn]] void type_error(const std::string& key, std::string_view expected)
{
    throw ValidationError(key + ": expected " + std::string(expected));
}

std::string get_string(const json& v, const std::string& key)
{
    if (!v.is_string()) type_error(key, "string");
    return v.get<std::string>();
}

bool get_bool(const json& v, const std::string& key)
{
    if (!v.is_boolean()) type_error(key, "boolean");
    return v.get<bool>();
}

double get_number(const json& v, const std::string& key)
{
    if (!v.is_number()) type_error(key, "number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) type_error(key, "finite number");
    return d;
}

std::int64_t get_integer(const json& v, const std::string& key)
{
    if (!v.is_number_integer()) type_error(key, "integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(
                                      std::numeric_limits<std::int64_t>::max())) {
        type_error(key, "integer in signed 64-bit range");
    }
    return v.get<std::int64_t>();
}

std::int64_t get_positive(const json& v, const std::string& key)
{
    const auto n = get_integer(v, key);
    if (n < 1) throw ValidationError(key + ": must be ≥ 1");
    return n;
}

}  // namespace

const std::vector<std::string>& config_keys()
{
    return kKeys;
}

EngineConfig parse_config(std::string_view json_text)
{
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ValidationError("config must be a JSON object");
    }

    EngineConfig cfg;
    bool have_data_dir = false;
    for (auto it = root.begin(); it != root.end(); ++it) {
        const std::string& key = it.key();
        const json& v = it.value();
        if (key == "data_dir") {
            cfg.data_dir = get_string(v, key);
            have_data_dir = !cfg.data_dir.empty();
        } else if (key == "join_type") {
            cfg.join_type = parse_join_type(get_string(v, key));
        } else if (key == "left_size") {
            cfg.left_size = get_positive(v, key);
        } else if (key == "right_size") {
            cfg.right_size = get_positive(v, key);
        } else if (key == "threshold") {
            if (v.is_null()) {
                cfg.threshold.reset();
            } else {
                cfg.threshold = get_number(v, key);
            }
        } else if (key == "both_directions") {
            cfg.both_directions = get_bool(v, key);
        } else if (key == "num_encoders") {
            const auto n = get_integer(v, key);
            if (n != 1 && n != 2) throw ValidationError("num_encoders: must be 1 or 2");
            cfg.num_encoders = static_cast<int>(n);
        } else if (key == "encoder_init") {
            const auto s = get_string(v, key);
            if (s == "random") {
                cfg.encoder_init = EncoderInit::random;
            } else if (s == "pretrained_artifact") {
                cfg.encoder_init = EncoderInit::pretrained_artifact;
            } else {
                throw ValidationError("encoder_init: expected random or pretrained_artifact");
            }
        } else if (key == "finetune") {
            cfg.finetune = get_bool(v, key);
        } else if (key == "embedding_dim") {
            cfg.embedding_dim = static_cast<std::size_t>(get_positive(v, key));
        } else if (key == "hash_dim") {
            cfg.hash_dim = static_cast<std::size_t>(get_positive(v, key));
        } else if (key == "pooling") {
            const auto s = get_string(v, key);
            if (s == "cls") {
                throw ValidationError(
                    "pooling: \"cls\" needs a transformer encoder with a leading CLS token; "
                    "the hashed bag-of-tokens encoder supports only \"mean\"");
            }
            if (s != "mean") throw ValidationError("pooling: expected \"mean\"");
            cfg.pooling = Pooling::mean;
        } else if (key == "tokenizer") {
            try {
                cfg.tokenizer = parse_tokenizer_mode(get_string(v, key));
            } catch (const ValidationError&) {
                throw ValidationError("tokenizer: expected whitespace or char2gram");
            }
        } else if (key == "distance") {
            cfg.distance = parse_metric(get_string(v, key));
        } else if (key == "normalize") {
            cfg.normalize = get_bool(v, key);
        } else if (key == "supervision_fraction") {
            const double f = get_number(v, key);
            if (!(f > 0.0 && f <= 1.0)) throw ValidationError("supervision_fraction: must be in (0, 1]");
            cfg.supervision_fraction = f;
        } else if (key == "sampler") {
            cfg.sampler = parse_sampler_kind(get_string(v, key));
        } else if (key == "tier_size") {
            cfg.tier_size = static_cast<std::size_t>(get_positive(v, key));
        } else if (key == "freeze_negatives") {
            cfg.freeze_negatives = get_bool(v, key);
        } else if (key == "epochs") {
            const auto n = get_integer(v, key);
            if (n < 0) throw ValidationError("epochs: must be ≥ 0");
            cfg.epochs = static_cast<int>(n);
        } else if (key == "batch_size") {
            cfg.batch_size = static_cast<std::size_t>(get_positive(v, key));
        } else if (key == "learning_rate") {
            const double lr = get_number(v, key);
            if (!(lr > 0.0)) throw ValidationError("learning_rate: must be > 0");
            cfg.learning_rate = lr;
        } else if (key == "loss_margin") {
            const double a = get_number(v, key);
            if (a < 0.0) throw ValidationError("loss_margin: must be ≥ 0");
            cfg.loss_margin = a;
        } else if (key == "pretrain") {
            cfg.pretrain = get_bool(v, key);
        } else if (key == "pretrain_epochs") {
            const auto n = get_integer(v, key);
            if (n < 0) throw ValidationError("pretrain_epochs: must be ≥ 0");
            cfg.pretrain_epochs = static_cast<int>(n);
        } else if (key == "pretrain_per_record") {
            cfg.pretrain_per_record = static_cast<std::size_t>(get_positive(v, key));
        } else if (key == "key_column") {
            cfg.key_column = get_string(v, key);
        } else if (key == "generate_preset") {
            const auto s = get_string(v, key);
            if (s != "easy" && s != "hard") throw ValidationError("generate_preset: expected easy or hard");
            cfg.generate_preset = s;
        } else if (key == "source_rows") {
            cfg.source_rows = static_cast<std::size_t>(get_positive(v, key));
        } else if (key == "copies_per_row") {
            cfg.copies_per_row = static_cast<std::size_t>(get_positive(v, key));
        } else if (key == "max_fraction") {
            const double f = get_number(v, key);
            if (!(f > 0.0 && f <= 1.0)) throw ValidationError("max_fraction: must be in (0, 1]");
            cfg.max_fraction = f;
        } else if (key == "test_fraction") {
            const double f = get_number(v, key);
            if (!(f > 0.0 && f < 1.0)) throw ValidationError("test_fraction: must be in (0, 1)");
            cfg.test_fraction = f;
        } else if (key == "seed") {
            if (v.is_number_unsigned()) {
                cfg.seed = v.get<std::uint64_t>();
            } else {
                cfg.seed = static_cast<std::uint64_t>(get_integer(v, key));
            }
        } else {
            throw ValidationError("unknown config key '" + key + "'");
        }
    }
    if (!have_data_dir) {
        throw ValidationError("data_dir required");
    }
    return cfg;
}

std::string render_config(const EngineConfig& c)
{
    nlohmann::ordered_json j;
    j["data_dir"] = c.data_dir;
    j["join_type"] = std::string(to_string(c.join_type));
    j["left_size"] = c.left_size;
    j["right_size"] = c.right_size;
    j["threshold"] = c.threshold ? json(*c.threshold) : json(nullptr);
    j["both_directions"] = c.both_directions;
    j["num_encoders"] = c.num_encoders;
    j["encoder_init"] = c.encoder_init == EncoderInit::random ? "random" : "pretrained_artifact";
    j["finetune"] = c.finetune;
    j["embedding_dim"] = c.embedding_dim;
    j["hash_dim"] = c.hash_dim;
    j["pooling"] = "mean";
    j["tokenizer"] = std::string(to_string(c.tokenizer));
    j["distance"] = std::string(to_string(c.distance));
    j["normalize"] = c.normalize;
    j["supervision_fraction"] = c.supervision_fraction;
    j["sampler"] = std::string(to_string(c.sampler));
    j["tier_size"] = c.tier_size;
    j["freeze_negatives"] = c.freeze_negatives;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["loss_margin"] = c.loss_margin;
    j["pretrain"] = c.pretrain;
    j["pretrain_epochs"] = c.pretrain_epochs;
    j["pretrain_per_record"] = c.pretrain_per_record;
    j["key_column"] = c.key_column;
    j["generate_preset"] = c.generate_preset;
    j["source_rows"] = c.source_rows;
    j["copies_per_row"] = c.copies_per_row;
    j["max_fraction"] = c.max_fraction;
    j["test_fraction"] = c.test_fraction;
    j["seed"] = c.seed;
    return j.dump(2);
}

}  // namespace emberish
