#include "emberish/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "emberish/csv.hpp"
#include "emberish/digest.hpp"
#include "emberish/error.hpp"
#include "emberish/joiner.hpp"
#include "emberish/lexrank.hpp"
#include "emberish/random.hpp"
#include "emberish/supervise.hpp"

namespace emberish {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

fs::path in_dir(const EngineConfig& config, const char* name)
{
    return fs::path(config.data_dir) / name;
}

/// Run manifest: config snapshot, input and output digests, stage timings.
class Manifest {
  public:
    Manifest(std::string command, const EngineConfig& config)
        : command_(std::move(command)), config_(config)
    {}

    void input(const fs::path& path) { inputs_.push_back(path); }
    void output(const fs::path& path) { outputs_.push_back(path); }

    template <typename Fn>
    auto timed(const std::string& stage, Fn&& fn)
    {
        const auto t0 = std::chrono::steady_clock::now();
        struct Record {
            Manifest* m;
            std::string stage;
            std::chrono::steady_clock::time_point t0;
            ~Record()
            {
                m->timings_.emplace_back(
                    stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            }
        } rec{this, stage, t0};
        return fn();
    }

    void write() const
    {
        ojson j;
        j["command"] = command_;
        j["seed"] = config_.seed;
        j["config"] = ojson::parse(render_config(config_));
        auto digests = [&](const std::vector<fs::path>& paths) {
            ojson arr = ojson::array();
            for (const auto& p : paths) {
                arr.push_back({{"path", p.lexically_relative(config_.data_dir).generic_string()},
                               {"sha256", sha256_file(p)}});
            }
            return arr;
        };
        j["inputs"] = digests(inputs_);
        j["outputs"] = digests(outputs_);
        ojson t = ojson::object();
        for (const auto& [stage, secs] : timings_) t[stage] = secs;
        j["timings_seconds"] = t;
        write_text_file(fs::path(config_.data_dir) / (command_ + "_manifest.json"), j.dump(2) + "\n");
    }

  private:
    std::string command_;
    EngineConfig config_;
    std::vector<fs::path> inputs_;
    std::vector<fs::path> outputs_;
    std::vector<std::pair<std::string, double>> timings_;
};

void require_files(const std::vector<fs::path>& paths)
{
    std::vector<std::string> missing;
    for (const auto& p : paths) {
        if (!fs::exists(p)) missing.push_back(p.string());
    }
    if (missing.empty()) return;
    std::string msg = "missing input file(s):";
    for (const auto& m : missing) msg += " " + m;
    throw ValidationError(msg);
}

std::vector<SupervisionPair> load_pairs(const fs::path& path)
{
    auto sup = parse_supervision(read_text_file(path));
    if (sup.is_triples()) {
        throw ValidationError(path.string() + ": expected base_id,aux_id pairs");
    }
    return sup.pairs;
}

std::string render_loss_trace(const std::vector<double>& loss)
{
    std::string out = "epoch,loss\n";
    for (std::size_t e = 0; e < loss.size(); ++e) {
        out += csv_line({std::to_string(e + 1), format_double(loss[e])});
    }
    return out;
}

void save_encoders(const EngineConfig& config, const EncoderPair& models, const char* base_name,
                   const char* aux_name, Manifest& manifest)
{
    save_model(in_dir(config, base_name), models.base());
    manifest.output(in_dir(config, base_name));
    if (!models.shared()) {
        save_model(in_dir(config, aux_name), models.aux());
        manifest.output(in_dir(config, aux_name));
    }
}

EncoderPair load_encoders(const EngineConfig& config, const char* base_name, const char* aux_name)
{
    const auto base_path = in_dir(config, base_name);
    require_files({base_path});
    auto base = load_model(base_path);
    if (config.num_encoders == 2) {
        const auto aux_path = in_dir(config, aux_name);
        require_files({aux_path});
        return EncoderPair(std::move(base), load_model(aux_path));
    }
    return EncoderPair(std::move(base));
}

}  // namespace

EncoderShape encoder_shape(const EngineConfig& config)
{
    EncoderShape shape;
    shape.hash_dim = config.hash_dim;
    shape.output_dim = config.embedding_dim;
    shape.normalize = config.normalize;
    shape.tokenizer = config.tokenizer;
    shape.hash_seed = derive_seed(config.seed, "hash");
    return shape;
}

EncoderPair initial_encoders(const EngineConfig& config)
{
    const auto shape = encoder_shape(config);
    auto base = HashedBagEncoder::random(shape, derive_seed(config.seed, "init"));
    if (config.num_encoders == 2) {
        return EncoderPair(std::move(base),
                           HashedBagEncoder::random(shape, derive_seed(config.seed, "init-aux")));
    }
    return EncoderPair(std::move(base));
}

std::vector<std::size_t> supervision_subset(std::size_t n, double fraction, std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (fraction >= 1.0 || n == 0) return idx;
    const auto keep = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))), 1, n);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(idx));
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

TrainedModels train_models(const EngineConfig& config, const Dataset& base, const Dataset& aux,
                           const Supervision& supervision, std::optional<EncoderPair> start)
{
    TrainedModels out{start ? std::move(*start) : initial_encoders(config), {}, {}};

    TrainConfig tc;
    tc.batch_size = config.batch_size;
    tc.learning_rate = config.learning_rate;
    tc.margin = config.loss_margin;

    if (config.pretrain && config.pretrain_epochs > 0) {
        const auto triples = build_pretraining_pairs(base, aux, config.pretrain_per_record,
                                                     derive_seed(config.seed, "pretrain-pairs"));
        if (!triples.empty()) {
            TrainConfig pc = tc;
            pc.epochs = config.pretrain_epochs;
            pc.seed = derive_seed(config.seed, "pretrain");
            out.pretrain_loss = train(out.models, triples, base, aux, pc).epoch_loss;
        }
    }
    if (!config.finetune || config.epochs == 0) {
        return out;
    }

    tc.epochs = config.epochs;
    tc.seed = derive_seed(config.seed, "train");
    const auto subset_seed = derive_seed(config.seed, "supervision-fraction");
    if (supervision.is_triples()) {
        std::vector<SupervisionTriple> triples;
        for (auto i : supervision_subset(supervision.triples.size(), config.supervision_fraction,
                                         subset_seed)) {
            triples.push_back(supervision.triples[i]);
        }
        out.loss = train(out.models, triples, base, aux, tc).epoch_loss;
        return out;
    }
    if (config.sampler == SamplerKind::custom) {
        throw ValidationError("sampler custom needs supervision triples (anchor,positive,negative)");
    }
    std::vector<SupervisionPair> pairs;
    for (auto i : supervision_subset(supervision.pairs.size(), config.supervision_fraction,
                                     subset_seed)) {
        pairs.push_back(supervision.pairs[i]);
    }
    SamplerConfig sc{config.sampler, config.tier_size, derive_seed(config.seed, "sampler")};
    const NegativeSampler sampler(std::move(pairs), base, aux, sc);
    const bool frozen = config.freeze_negatives;
    out.loss = train(out.models, [&](int epoch) { return sampler.sample(frozen ? 0 : epoch); },
                     base, aux, tc)
                   .epoch_loss;
    return out;
}

fs::path resolve_table(const EngineConfig& config, const std::string& ref, const char* fallback)
{
    const fs::path own = fs::path(config.data_dir) / (ref + ".csv");
    if (!ref.empty() && fs::exists(own)) return own;
    return in_dir(config, fallback);
}

void cmd_generate(const EngineConfig& config, const std::optional<fs::path>& source_path)
{
    Manifest manifest("generate", config);
    const Dataset source = manifest.timed("source", [&] {
        if (source_path) {
            manifest.input(*source_path);
            return load_dataset(*source_path, Role::auxiliary);
        }
        return synthesize_source(config.source_rows, derive_seed(config.seed, "source"));
    });
    PerturbationConfig pc;
    pc.perturbations_per_row = preset_perturbations(config.generate_preset);
    pc.max_fraction = config.max_fraction;
    pc.copies_per_row = config.copies_per_row;
    pc.seed = derive_seed(config.seed, "perturb");
    auto data = manifest.timed("perturb", [&] { return generate_fuzzy_join(source, pc); });
    const auto split = split_train_test(data.truth, config.test_fraction,
                                        derive_seed(config.seed, "split"));

    const std::vector<std::pair<const char*, std::string>> outputs = {
        {files::base, render_dataset_csv(data.base)},
        {files::aux, render_dataset_csv(data.aux)},
        {files::truth_train, render_pairs_csv(split.train)},
        {files::truth_test, render_pairs_csv(split.test)},
        {files::supervision, render_pairs_csv(split.train)},
    };
    for (const auto& [name, text] : outputs) {
        write_text_file(in_dir(config, name), text);
        manifest.output(in_dir(config, name));
    }
    manifest.write();
}

TrainedModels cmd_train(const EngineConfig& config)
{
    const auto base_path = in_dir(config, files::base);
    const auto aux_path = in_dir(config, files::aux);
    const auto sup_path = in_dir(config, files::supervision);
    require_files({base_path, aux_path, sup_path});
    Manifest manifest("train", config);
    const Dataset base = load_dataset(base_path, Role::base);
    const Dataset aux = load_dataset(aux_path, Role::auxiliary);
    const Supervision sup = load_supervision(sup_path, base, aux);
    for (const auto& p : {base_path, aux_path, sup_path}) manifest.input(p);

    std::optional<EncoderPair> start;
    EngineConfig run = config;
    if (config.encoder_init == EncoderInit::pretrained_artifact) {
        start = load_encoders(config, files::pretrained, files::pretrained_aux);
        manifest.input(in_dir(config, files::pretrained));
        run.pretrain = false;  // the artifact is already pretrained
    }

    TrainedModels trained = manifest.timed("train", [&] {
        if (run.pretrain && run.pretrain_epochs > 0) {
            // Pretraining alone first so its artifact can be saved.
            EngineConfig pre = run;
            pre.finetune = false;
            auto stage = train_models(pre, base, aux, sup, std::move(start));
            if (!stage.pretrain_loss.empty()) {
                save_encoders(config, stage.models, files::pretrained, files::pretrained_aux, manifest);
                write_text_file(in_dir(config, files::pretrain_loss_trace),
                                render_loss_trace(stage.pretrain_loss));
                manifest.output(in_dir(config, files::pretrain_loss_trace));
            }
            EngineConfig fine = run;
            fine.pretrain = false;
            auto done = train_models(fine, base, aux, sup, std::move(stage.models));
            done.pretrain_loss = std::move(stage.pretrain_loss);
            return done;
        }
        return train_models(run, base, aux, sup, std::move(start));
    });

    save_encoders(config, trained.models, files::model, files::model_aux, manifest);
    write_text_file(in_dir(config, files::loss_trace), render_loss_trace(trained.loss));
    manifest.output(in_dir(config, files::loss_trace));
    manifest.write();
    return trained;
}

JoinSpec default_join_spec(const EngineConfig& config)
{
    return JoinSpec{"base", "aux", config.join_type, config.left_size, config.right_size,
                    "supervision"};
}

JoinResult cmd_join(const EngineConfig& config, const JoinRequest& request)
{
    Manifest manifest("join", config);
    JoinSpec spec = default_join_spec(config);
    if (request.spec_file) {
        require_files({*request.spec_file});
        spec = parse_join_spec(read_text_file(*request.spec_file));
        manifest.input(*request.spec_file);
    }
    const auto base_path = resolve_table(config, spec.base_ref, files::base);
    const auto aux_path = resolve_table(config, spec.aux_ref, files::aux);
    require_files({base_path, aux_path});
    const Dataset base = load_dataset(base_path, Role::base);
    const Dataset aux = load_dataset(aux_path, Role::auxiliary);
    manifest.input(base_path);
    manifest.input(aux_path);

    JoinResult result;
    if (request.baseline) {
        if (spec.join_type != JoinType::inner) {
            throw ValidationError("lexical baselines support INNER joins only");
        }
        const auto kind = parse_lexical_kind(*request.baseline);
        std::optional<std::string> key;
        if (!config.key_column.empty()) key = config.key_column;
        else if (!aux.column_names().empty()) key = aux.column_names().front();
        result = manifest.timed("join", [&] {
            return lexical_join(kind, base, aux, key, static_cast<std::size_t>(spec.right_size));
        });
        result.spec = spec;
    } else {
        const EncoderPair models = load_encoders(config, files::model, files::model_aux);
        manifest.input(in_dir(config, files::model));
        if (!models.shared()) manifest.input(in_dir(config, files::model_aux));
        if (request.dump_sentences) {
            const std::pair<const char*, const Dataset*> sides[] = {{"sentences_base.jsonl", &base},
                                                                    {"sentences_aux.jsonl", &aux}};
            for (const auto& [name, ds] : sides) {
                write_text_file(in_dir(config, name),
                                render_sentences_jsonl(prepare_dataset(*ds, config.tokenizer)));
                manifest.output(in_dir(config, name));
            }
        }
        const auto embedded = manifest.timed("embed", [&] {
            return std::make_pair(embed_dataset(models.base(), base), embed_dataset(models.aux(), aux));
        });
        const auto& eb = embedded.first;
        const auto& ea = embedded.second;
        write_text_file(in_dir(config, files::embeddings_base), serialize_embeddings(eb));
        write_text_file(in_dir(config, files::embeddings_aux), serialize_embeddings(ea));
        manifest.output(in_dir(config, files::embeddings_base));
        manifest.output(in_dir(config, files::embeddings_aux));
        JoinOptions opts;
        opts.threshold = config.threshold;
        opts.both_directions = config.both_directions;
        result = manifest.timed("join", [&] { return execute_join(spec, eb, ea, config.distance, opts); });
    }
    write_text_file(in_dir(config, files::result), render_result_csv(result));
    manifest.output(in_dir(config, files::result));
    manifest.write();
    return result;
}

ComparisonTable cmd_evaluate(const EngineConfig& config, const EvaluateRequest& request,
                             std::ostream& out)
{
    Manifest manifest("evaluate", config);
    const fs::path truth_path = request.truth.value_or(in_dir(config, files::truth_test));
    require_files({truth_path});
    const TruthSet truth = truth_from_pairs(load_pairs(truth_path));
    manifest.input(truth_path);
    if (request.ks.empty()) throw ValidationError("evaluate needs at least one k");

    ComparisonTable table;
    if (request.compare) {
        const auto base_path = in_dir(config, files::base);
        const auto aux_path = in_dir(config, files::aux);
        const auto model_path = in_dir(config, files::model);
        require_files({base_path, aux_path});
        const Dataset base = load_dataset(base_path, Role::base);
        const Dataset aux = load_dataset(aux_path, Role::auxiliary);
        manifest.input(base_path);
        manifest.input(aux_path);
        const auto methods = request.methods.empty() ? comparison_methods() : request.methods;
        const bool wants_trained =
            std::find(methods.begin(), methods.end(), "trained-encoder") != methods.end();
        const EncoderPair untrained = initial_encoders(config);
        std::optional<EncoderPair> trained;
        if (wants_trained) {
            trained = load_encoders(config, files::model, files::model_aux);
            manifest.input(model_path);
        }
        ComparisonSetup setup;
        setup.metric = config.distance;
        if (!config.key_column.empty()) setup.key_column = config.key_column;
        else if (!aux.column_names().empty()) setup.key_column = aux.column_names().front();
        setup.untrained = {&untrained.base(), untrained.shared() ? nullptr : &untrained.aux()};
        if (trained) {
            setup.trained = {&trained->base(), trained->shared() ? nullptr : &trained->aux()};
        }
        table = manifest.timed("compare", [&] {
            return run_comparison(base, aux, truth, methods, request.ks, setup);
        });
    } else {
        const fs::path results_path = request.results.value_or(in_dir(config, files::result));
        require_files({results_path});
        const JoinResult result = parse_result_csv(read_text_file(results_path));
        manifest.input(results_path);
        table.methods = {"result"};
        table.ks = request.ks;
        for (auto k : request.ks) {
            if (k == 0) throw ValidationError("k must be ≥ 1");
            table.rows.push_back({"result", k, recall_at_k(result, truth, k)});
        }
        out << render_metrics_table(table);
        out << "MRR@10 " << std::fixed << std::setprecision(4) << mrr_at_k(result, truth, 10)
            << "\n";
        out.unsetf(std::ios::floatfield);
        write_text_file(in_dir(config, files::metrics), render_metrics_csv(table));
        manifest.output(in_dir(config, files::metrics));
        manifest.write();
        return table;
    }
    out << render_metrics_table(table);
    write_text_file(in_dir(config, files::metrics), render_metrics_csv(table));
    manifest.output(in_dir(config, files::metrics));
    manifest.write();
    return table;
}

std::unordered_map<std::string, double> load_labels(const fs::path& path)
{
    const auto rows = parse_csv(read_text_file(path));
    std::unordered_map<std::string, double> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& c = rows[r].cells;
        if (c.size() != 2) {
            throw ValidationError(path.string() + ": expected id,label on line "
                                  + std::to_string(rows[r].line));
        }
        char* end = nullptr;
        const double v = std::strtod(c[1].c_str(), &end);
        if (c[1].empty() || end != c[1].c_str() + c[1].size() || !std::isfinite(v)) {
            if (r == 0) continue;  // header
            throw ValidationError(path.string() + ": bad label on line "
                                  + std::to_string(rows[r].line));
        }
        if (!out.emplace(c[0], v).second) {
            throw ValidationError(path.string() + ": duplicate id " + c[0]);
        }
    }
    return out;
}

JoinResult cmd_pipeline(const EngineConfig& config, const PipelineRequest& request,
                        std::ostream& out)
{
    Manifest manifest("pipeline", config);
    require_files({request.chain_file});
    const auto specs = parse_join_specs(read_text_file(request.chain_file));
    manifest.input(request.chain_file);
    if (specs.empty()) throw ValidationError("chain file has no join statements");
    const EncoderPair models = load_encoders(config, files::model, files::model_aux);
    manifest.input(in_dir(config, files::model));

    // Tables by reference, embedded with the aux-side encoder except the
    // stage-0 queries.
    std::map<std::string, fs::path> table_paths;
    auto table = [&](const std::string& ref, const char* fallback) {
        auto it = table_paths.find(ref);
        if (it != table_paths.end()) return it->second;
        const auto p = resolve_table(config, ref, fallback);
        require_files({p});
        manifest.input(p);
        return table_paths[ref] = p;
    };
    std::map<std::string, EmbeddingIndex> indexes;
    auto index_for = [&](const std::string& ref) -> const EmbeddingIndex& {
        auto it = indexes.find(ref);
        if (it != indexes.end()) return it->second;
        const Dataset ds = load_dataset(table(ref, files::aux), Role::auxiliary);
        return indexes.emplace(ref, EmbeddingIndex(embed_dataset(models.aux(), ds), config.distance))
            .first->second;
    };

    const Dataset queries = load_dataset(table(specs.front().base_ref, files::base), Role::base);
    const auto query_emb = embed_dataset(models.base(), queries);
    std::vector<ChainStage> stages;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        ChainStage st;
        st.spec = specs[s];
        st.index = &index_for(specs[s].aux_ref);
        if (s > 0 && specs[s].base_ref != specs[s - 1].aux_ref) {
            st.query_source = &index_for(specs[s].base_ref);
        }
        st.threshold = config.threshold;
        stages.push_back(st);
    }
    const JoinResult result = manifest.timed("chain", [&] { return chain_joins(query_emb, stages); });

    write_text_file(in_dir(config, files::result), render_result_csv(result));
    manifest.output(in_dir(config, files::result));
    std::vector<std::string> header = {"base_id"};
    for (std::size_t s = 0; s < stages.size(); ++s) header.push_back("hop_" + std::to_string(s + 1));
    header.push_back("score");
    std::string paths = csv_line(header);
    for (const auto& m : result.matches) {
        if (m.absent()) continue;
        std::vector<std::string> row = {*m.base_id};
        row.insert(row.end(), m.path.begin(), m.path.end());
        row.push_back(format_double(m.score));
        paths += csv_line(row);
    }
    write_text_file(in_dir(config, files::paths), paths);
    manifest.output(in_dir(config, files::paths));

    if (request.labels) {
        require_files({*request.labels});
        const auto labels = load_labels(*request.labels);
        manifest.input(*request.labels);
        std::optional<std::map<std::string, double>> truth;
        if (request.label_truth) {
            require_files({*request.label_truth});
            const auto t = load_labels(*request.label_truth);
            truth.emplace(t.begin(), t.end());
            manifest.input(*request.label_truth);
        }
        std::string agg = "base_id,k,prediction\n";
        for (auto k : request.ks) {
            const auto preds = aggregate_labels(result, labels, k);
            for (const auto& [id, v] : preds) {
                agg += csv_line({id, std::to_string(k), format_double(v)});
            }
            if (truth && !preds.empty()) {
                out << "MSE@" << k << " " << format_double(mse(preds, *truth)) << "\n";
            }
        }
        write_text_file(in_dir(config, files::aggregates), agg);
        manifest.output(in_dir(config, files::aggregates));
    }
    manifest.write();
    return result;
}

namespace {

/// Command-line flags that override config keys.
struct Override {
    const char* flag;
    const char* key;
    enum Kind { text, number, flag_true, flag_false } kind;
    const char* help;
};

constexpr Override kOverrides[] = {
    {"--join-type", "join_type", Override::text, "INNER, LEFT, RIGHT or FULL"},
    {"--left-size", "left_size", Override::number, "matches per aux record"},
    {"--right-size", "right_size", Override::number, "matches per base record"},
    {"--threshold", "threshold", Override::number, "similarity threshold"},
    {"--both-directions", "both_directions", Override::flag_true, "INNER: union of both directions"},
    {"--no-pretrain", "pretrain", Override::flag_false, "skip self-supervised pretraining"},
    {"--key-column", "key_column", Override::text, "column for LD and JK-* baselines"},
    {"--preset", "generate_preset", Override::text, "easy or hard"},
    {"--epochs", "epochs", Override::number, "training epochs"},
    {"--pretrain-epochs", "pretrain_epochs", Override::number, "pretraining epochs"},
    {"--learning-rate", "learning_rate", Override::number, "Adam learning rate"},
    {"--batch-size", "batch_size", Override::number, "triples per batch"},
    {"--margin", "loss_margin", Override::number, "triplet margin"},
    {"--sampler", "sampler", Override::text, "random, stratified_bm25, stratified_jaccard, custom"},
    {"--tier-size", "tier_size", Override::number, "stratified tier size"},
    {"--freeze-negatives", "freeze_negatives", Override::flag_true, "draw negatives once"},
    {"--num-encoders", "num_encoders", Override::number, "1 (shared) or 2"},
    {"--encoder-init", "encoder_init", Override::text, "random or pretrained_artifact"},
    {"--embedding-dim", "embedding_dim", Override::number, "output dimension"},
    {"--hash-dim", "hash_dim", Override::number, "hash buckets"},
    {"--tokenizer", "tokenizer", Override::text, "whitespace or char2gram"},
    {"--distance", "distance", Override::text, "l2 or inner_product"},
    {"--supervision-fraction", "supervision_fraction", Override::number, "fraction of pairs used"},
    {"--source-rows", "source_rows", Override::number, "rows of the synthetic source"},
    {"--copies-per-row", "copies_per_row", Override::number, "perturbed copies per source row"},
    {"--test-fraction", "test_fraction", Override::number, "held-out fraction of origins"},
    {"--seed", "seed", Override::number, "run seed"},
};

EngineConfig build_config(const std::optional<std::string>& config_path,
                          const std::optional<std::string>& data_dir,
                          const std::map<std::string, std::string>& values,
                          const std::map<std::string, bool>& flags)
{
    nlohmann::json j = nlohmann::json::object();
    if (config_path) {
        const std::string text = read_text_file(*config_path);
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ValidationError("config must be a JSON object");
    }
    if (data_dir) {
        j["data_dir"] = *data_dir;
    } else if (!j.contains("data_dir")) {
        if (const char* env = std::getenv("EMBERISH_DATA_DIR"); env != nullptr && *env != '\0') {
            j["data_dir"] = env;
        }
    }
    for (const auto& o : kOverrides) {
        if (o.kind == Override::flag_true || o.kind == Override::flag_false) {
            auto it = flags.find(o.key);
            if (it != flags.end() && it->second) j[o.key] = o.kind == Override::flag_true;
            continue;
        }
        auto it = values.find(o.key);
        if (it == values.end()) continue;
        if (o.kind == Override::text) {
            j[o.key] = it->second;
        } else {
            try {
                j[o.key] = nlohmann::json::parse(it->second);
            } catch (const nlohmann::json::parse_error&) {
                throw ValidationError(std::string(o.flag) + ": expected a number");
            }
            if (!j[o.key].is_number()) throw ValidationError(std::string(o.flag) + ": expected a number");
        }
    }
    return parse_config(j.dump());
}

std::vector<std::size_t> to_sizes(const std::vector<long long>& v, const char* flag)
{
    std::vector<std::size_t> out;
    for (auto x : v) {
        if (x < 1) throw ValidationError(std::string(flag) + ": values must be ≥ 1");
        out.push_back(static_cast<std::size_t>(x));
    }
    return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Keyless joins over learned record embeddings", "emberish"};
    app.require_subcommand(1);
    app.fallthrough();
    // a repeated option overrides the earlier value
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::optional<std::string> config_path;
    std::optional<std::string> data_dir;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--data-dir", data_dir, "data directory (fallback: EMBERISH_DATA_DIR)");
    for (const auto& o : kOverrides) {
        if (o.kind == Override::flag_true || o.kind == Override::flag_false) {
            app.add_flag(o.flag, flags[o.key], o.help);
        } else {
            app.add_option_function<std::string>(
                o.flag, [&values, key = o.key](const std::string& v) { values[key] = v; }, o.help);
        }
    }

    auto* gen = app.add_subcommand("generate", "write a synthetic fuzzy-join workload");
    std::optional<std::string> source;
    gen->add_option("--source", source, "source table (CSV or JSONL) instead of the synthetic one");

    app.add_subcommand("train", "train the encoder(s)");

    auto* join = app.add_subcommand("join", "embed both tables and run the join");
    JoinRequest jreq;
    std::optional<std::string> spec_file;
    std::optional<std::string> baseline;
    join->add_option("--spec", spec_file, "file holding one join statement");
    join->add_option("--baseline", baseline, "LD, J-WS, J-2G, JK-WS, JK-2G or BM25");
    join->add_flag("--dump-sentences", jreq.dump_sentences, "write prepared sentences as JSONL");

    auto* eval = app.add_subcommand("evaluate", "recall@k of a result file or of all methods");
    std::optional<std::string> results;
    std::optional<std::string> truth;
    std::vector<long long> eval_ks;
    bool compare = false;
    std::vector<std::string> methods;
    eval->add_option("--results", results, "result CSV (default result.csv)");
    eval->add_option("--truth", truth, "truth pairs CSV (default truth_test.csv)");
    eval->add_option("--k", eval_ks, "cutoffs (default 1 10)");
    eval->add_flag("--compare", compare, "run the baseline comparison");
    eval->add_option("--methods", methods, "comparison methods (default all)");

    auto* pipe = app.add_subcommand("pipeline", "chained joins and label aggregation");
    std::string chain;
    std::optional<std::string> labels;
    std::optional<std::string> label_truth;
    std::vector<long long> pipe_ks;
    pipe->add_option("--chain", chain, "file with one join statement per hop")->required();
    pipe->add_option("--labels", labels, "CSV id,label for the last hop's records");
    pipe->add_option("--label-truth", label_truth, "CSV id,label for the query records");
    pipe->add_option("--k", pipe_ks, "aggregation sizes (default 1 10 20 30)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        const EngineConfig config = build_config(config_path, data_dir, values, flags);
        if (gen->parsed()) {
            cmd_generate(config, source ? std::optional<fs::path>(*source) : std::nullopt);
            out << "wrote " << config.data_dir << "/{base,aux,truth_train,truth_test,supervision}.csv\n";
        } else if (app.got_subcommand("train")) {
            const auto t = cmd_train(config);
            out << "wrote " << (fs::path(config.data_dir) / files::model).string();
            if (!t.loss.empty()) out << " (final loss " << format_double(t.loss.back()) << ")";
            out << "\n";
        } else if (join->parsed()) {
            if (spec_file) jreq.spec_file = *spec_file;
            jreq.baseline = baseline;
            const auto r = cmd_join(config, jreq);
            out << "wrote " << (fs::path(config.data_dir) / files::result).string() << " ("
                << r.matches.size() << " rows)\n";
        } else if (eval->parsed()) {
            EvaluateRequest req;
            if (results) req.results = *results;
            if (truth) req.truth = *truth;
            if (!eval_ks.empty()) req.ks = to_sizes(eval_ks, "--k");
            req.compare = compare;
            req.methods = methods;
            cmd_evaluate(config, req, out);
        } else if (pipe->parsed()) {
            PipelineRequest req;
            req.chain_file = chain;
            if (labels) req.labels = *labels;
            if (label_truth) req.label_truth = *label_truth;
            if (!pipe_ks.empty()) req.ks = to_sizes(pipe_ks, "--k");
            const auto r = cmd_pipeline(config, req, out);
            out << "wrote " << (fs::path(config.data_dir) / files::result).string() << " ("
                << r.matches.size() << " rows)\n";
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const RuntimeFailure& e) {
        err << "failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace emberish
