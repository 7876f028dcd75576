#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "emberish/config.hpp"
#include "emberish/evalkit.hpp"
#include "emberish/train.hpp"

namespace emberish {

/// Fixed artifact names under data_dir.
namespace files {
inline constexpr const char* base = "base.csv";
inline constexpr const char* aux = "aux.csv";
inline constexpr const char* supervision = "supervision.csv";
inline constexpr const char* truth_train = "truth_train.csv";
inline constexpr const char* truth_test = "truth_test.csv";
inline constexpr const char* model = "model.bin";
inline constexpr const char* model_aux = "model_aux.bin";
inline constexpr const char* pretrained = "pretrained.bin";
inline constexpr const char* pretrained_aux = "pretrained_aux.bin";
inline constexpr const char* embeddings_base = "embeddings_base.bin";
inline constexpr const char* embeddings_aux = "embeddings_aux.bin";
inline constexpr const char* result = "result.csv";
inline constexpr const char* paths = "paths.csv";
inline constexpr const char* loss_trace = "loss_trace.csv";
inline constexpr const char* pretrain_loss_trace = "pretrain_loss_trace.csv";
inline constexpr const char* metrics = "metrics.csv";
inline constexpr const char* aggregates = "aggregates.csv";
}  // namespace files

/// Encoder shape implied by a config; the hash seed derives from the run seed.
EncoderShape encoder_shape(const EngineConfig& config);

/// Randomly initialised encoder(s) as the trainer starts from them.
EncoderPair initial_encoders(const EngineConfig& config);

struct TrainedModels {
    EncoderPair models;
    std::vector<double> pretrain_loss;  ///< empty when pretraining is off
    std::vector<double> loss;
};

/// The train command without file I/O: optional BM25 pretraining, then
/// supervised triplet training with negatives from the configured sampler.
/// `start` replaces the random initialisation when given.
TrainedModels train_models(const EngineConfig& config, const Dataset& base, const Dataset& aux,
                           const Supervision& supervision,
                           std::optional<EncoderPair> start = std::nullopt);

/// Seeded subset keeping ceil(fraction * n) items (at least one) in their
/// original order.
std::vector<std::size_t> supervision_subset(std::size_t n, double fraction, std::uint64_t seed);

/// <data_dir>/<ref>.csv when that file exists, otherwise <data_dir>/<fallback>.
std::filesystem::path resolve_table(const EngineConfig& config, const std::string& ref,
                                    const char* fallback);

/// Writes base.csv, aux.csv, truth_train.csv, truth_test.csv and
/// supervision.csv (a copy of the training truth). The source table is
/// synthesised unless a path is given.
void cmd_generate(const EngineConfig& config, const std::optional<std::filesystem::path>& source);

/// Trains from base.csv, aux.csv and supervision.csv; writes model.bin
/// (and model_aux.bin for two encoders), loss traces and pretrained.bin.
TrainedModels cmd_train(const EngineConfig& config);

struct JoinRequest {
    std::optional<std::filesystem::path> spec_file;
    std::optional<std::string> baseline;  ///< lexical kind, bypasses the encoder
    bool dump_sentences = false;
};

/// Join spec from the config's join_type and sizes.
JoinSpec default_join_spec(const EngineConfig& config);

JoinResult cmd_join(const EngineConfig& config, const JoinRequest& request);

struct EvaluateRequest {
    std::optional<std::filesystem::path> results;  ///< default result.csv
    std::optional<std::filesystem::path> truth;    ///< default truth_test.csv
    std::vector<std::size_t> ks{1, 10};
    bool compare = false;
    std::vector<std::string> methods;  ///< compare mode; empty means all
};

/// Metrics of a result file, or of every comparison method in compare mode.
/// Writes metrics.csv and prints an aligned table to out.
ComparisonTable cmd_evaluate(const EngineConfig& config, const EvaluateRequest& request,
                             std::ostream& out);

struct PipelineRequest {
    std::filesystem::path chain_file;
    std::optional<std::filesystem::path> labels;       ///< CSV id,label for final records
    std::optional<std::filesystem::path> label_truth;  ///< CSV id,label for query records
    std::vector<std::size_t> ks{1, 10, 20, 30};
};

/// Runs the chain of join statements in chain_file with the trained model.
/// Writes result.csv and paths.csv; with labels also aggregates.csv, and
/// with label_truth the MSE per k to out.
JoinResult cmd_pipeline(const EngineConfig& config, const PipelineRequest& request,
                        std::ostream& out);

/// Reads a two-column CSV (id,label) into a map.
std::unordered_map<std::string, double> load_labels(const std::filesystem::path& path);

/// Entry point of the emberish executable. Exit codes: 0 success,
/// 1 invalid input or usage, 2 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace emberish
