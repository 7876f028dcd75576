#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <sstream>

#include "emberish/cli.hpp"
#include "emberish/csv.hpp"
#include "emberish/digest.hpp"
#include "emberish/error.hpp"
#include "support.hpp"

using namespace emberish;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "emberish");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

// Small, fast settings shared by every end-to-end run.
std::vector<std::string> small(const testing::TempDir& dir, std::vector<std::string> extra = {})
{
    std::vector<std::string> args{"--data-dir", dir.str(), "--source-rows", "30", "--copies-per-row", "2",
                                  "--embedding-dim", "8", "--hash-dim", "512", "--epochs", "2",
                                  "--pretrain-epochs", "1", "--learning-rate", "0.01", "--seed", "5"};
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

std::string digest(const testing::TempDir& dir, const char* name)
{
    return sha256_file(dir.path() / name);
}

EngineConfig config_for(const testing::TempDir& dir)
{
    EngineConfig c;
    c.data_dir = dir.str();
    c.source_rows = 30;
    c.copies_per_row = 2;
    c.embedding_dim = 8;
    c.hash_dim = 512;
    c.epochs = 2;
    c.pretrain_epochs = 1;
    c.learning_rate = 0.01;
    c.seed = 5;
    return c;
}

}  // namespace

TEST_CASE("usage errors exit with 1, help with 0")
{
    CHECK(run({}).code == 1);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"pipeline", "--data-dir", "/tmp"}).code == 1);  // --chain is required
}

TEST_CASE("invalid input exits with 1 and names the problem")
{
    testing::TempDir dir("cli-invalid");
    const auto none = run({"train", "--data-dir", dir.str()});
    CHECK(none.code == 1);
    CHECK(none.err.find("base.csv") != std::string::npos);

    const auto bad = run({"generate", "--data-dir", dir.str(), "--left-size", "0"});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("left_size") != std::string::npos);

    write_text_file(dir.path() / "cfg.json", R"({"data_dir": ")" + dir.str() + R"(", "shoe_size": 9})");
    const auto unknown = run({"generate", "--config", (dir.path() / "cfg.json").string()});
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("shoe_size") != std::string::npos);

    write_text_file(dir.path() / "bad.spec", "base INNER KEYLESS JOIN aux LEFT SIZE 0 RIGHT SIZE 1 USING s;");
    REQUIRE(run(with(small(dir), {"generate"})).code == 0);
    const auto spec = run(with(small(dir), {"join", "--baseline", "BM25", "--spec", (dir.path() / "bad.spec").string()}));
    CHECK(spec.code == 1);
    CHECK(spec.err.find("offset") != std::string::npos);
}

TEST_CASE("runtime failures exit with 2")
{
    testing::TempDir dir("cli-runtime");
    REQUIRE(run(with(small(dir), {"generate"})).code == 0);
    const auto r = run(with(small(dir), {"--no-pretrain", "--learning-rate", "1e300", "--epochs", "3", "train"}));
    CHECK(r.code == 2);
    CHECK(r.err.find("non-finite") != std::string::npos);
}

TEST_CASE("generate writes the workload and is reproducible")
{
    testing::TempDir a("cli-gen-a"), b("cli-gen-b");
    REQUIRE(run(with(small(a), {"generate"})).code == 0);
    REQUIRE(run(with(small(b), {"generate"})).code == 0);
    for (const char* f : {files::base, files::aux, files::truth_train, files::truth_test, files::supervision}) {
        CAPTURE(f);
        CHECK(digest(a, f) == digest(b, f));
    }
    CHECK(read_text_file(a.path() / files::supervision) == read_text_file(a.path() / files::truth_train));
    CHECK(load_dataset(a.path() / files::base).size() == 60);
    CHECK(load_dataset(a.path() / files::aux).size() == 30);

    const auto manifest = nlohmann::json::parse(read_text_file(a.path() / "generate_manifest.json"));
    CHECK(manifest["seed"] == 5);
    CHECK(manifest["outputs"].size() >= 5);
}

TEST_CASE("presets set the number of perturbations")
{
    testing::TempDir easy("cli-easy"), hard("cli-hard");
    REQUIRE(run(with(small(easy), {"--source-rows", "60", "generate"})).code == 0);
    REQUIRE(run(with(small(hard), {"--source-rows", "60", "--preset", "hard", "generate"})).code == 0);
    CHECK(digest(easy, files::base) != digest(hard, files::base));
    CHECK(digest(easy, files::aux) == digest(hard, files::aux));
}

TEST_CASE("train, join and evaluate resolve everything from the data directory")
{
    testing::TempDir dir("cli-flow");
    ::setenv("EMBERISH_DATA_DIR", dir.str().c_str(), 1);
    std::vector<std::string> common{"--source-rows", "30", "--copies-per-row", "2", "--embedding-dim", "8",
                                    "--hash-dim", "512", "--epochs", "3", "--pretrain-epochs", "1",
                                    "--learning-rate", "0.01"};
    REQUIRE(run(with(common, {"generate"})).code == 0);
    const auto t = run(with(common, {"train"}));
    ::unsetenv("EMBERISH_DATA_DIR");
    REQUIRE(t.code == 0);
    CHECK(fs::exists(dir.path() / files::model));
    CHECK(fs::exists(dir.path() / files::pretrained));
    const auto trace = parse_csv(read_text_file(dir.path() / files::loss_trace));
    CHECK(trace.size() == 1 + 3);
    CHECK(trace[0].cells == std::vector<std::string>{"epoch", "loss"});

    const auto j = run(with(small(dir), {"--join-type", "LEFT", "join"}));
    REQUIRE(j.code == 0);
    const auto result = parse_result_csv(read_text_file(dir.path() / files::result));
    CHECK(result.matches.size() == 60 * 10);
    CHECK(fs::exists(dir.path() / files::embeddings_base));

    const auto e = run(with(small(dir), {"evaluate", "--truth", (dir.path() / files::truth_train).string()}));
    REQUIRE(e.code == 0);
    CHECK(e.out.find("MRR@10") != std::string::npos);
    CHECK(fs::exists(dir.path() / files::metrics));
}

TEST_CASE("training is reproducible and --no-pretrain skips pretraining")
{
    testing::TempDir a("cli-train-a"), b("cli-train-b"), c("cli-train-c");
    for (const auto* d : {&a, &b, &c}) REQUIRE(run(with(small(*d), {"generate"})).code == 0);
    REQUIRE(run(with(small(a), {"train"})).code == 0);
    REQUIRE(run(with(small(b), {"train"})).code == 0);
    CHECK(digest(a, files::model) == digest(b, files::model));
    CHECK(digest(a, files::loss_trace) == digest(b, files::loss_trace));

    REQUIRE(run(with(small(c), {"--no-pretrain", "train"})).code == 0);
    CHECK_FALSE(fs::exists(c.path() / files::pretrained));
    CHECK(digest(a, files::model) != digest(c, files::model));

    REQUIRE(run(with(small(a), {"join"})).code == 0);
    REQUIRE(run(with(small(b), {"join"})).code == 0);
    CHECK(digest(a, files::result) == digest(b, files::result));
}

TEST_CASE("default join is INNER with sizes 1 and 10")
{
    EngineConfig c;
    const auto s = default_join_spec(c);
    CHECK(s.join_type == JoinType::inner);
    CHECK(s.left_size == 1);
    CHECK(s.right_size == 10);
}

TEST_CASE("INNER output respects the cardinality bound")
{
    testing::TempDir dir("cli-inner");
    REQUIRE(run(with(small(dir), {"generate"})).code == 0);
    REQUIRE(run(with(small(dir), {"train"})).code == 0);
    REQUIRE(run(with(small(dir), {"--left-size", "2", "--right-size", "3", "join"})).code == 0);
    const auto result = parse_result_csv(read_text_file(dir.path() / files::result));
    // 60 base records, 30 aux; aux is queried, each aux keeps at most 2 base records
    CHECK(result.matches.size() <= 30 * 2);
    CHECK_FALSE(result.matches.empty());
}

TEST_CASE("baseline joins need no model")
{
    testing::TempDir dir("cli-baseline");
    REQUIRE(run(with(small(dir), {"generate"})).code == 0);
    const auto r = run(with(small(dir), {"join", "--baseline", "BM25", "--dump-sentences"}));
    REQUIRE(r.code == 0);
    CHECK_FALSE(fs::exists(dir.path() / files::model));
    const auto result = parse_result_csv(read_text_file(dir.path() / files::result));
    CHECK_FALSE(result.matches.empty());
    CHECK(run(with(small(dir), {"join"})).code == 1);  // learned path needs model.bin
}

TEST_CASE("evaluate works from the result file alone")
{
    testing::TempDir dir("cli-eval");
    write_text_file(dir.path() / "truth.csv", "base_id,aux_id\nq1,a\nq2,b\n");
    write_text_file(dir.path() / "perfect.csv", "base_id,aux_id,rank,score\nq1,a,1,0\nq2,b,1,0.5\nq2,a,2,1\n");
    const auto r = run({"--data-dir", dir.str(), "evaluate", "--results", (dir.path() / "perfect.csv").string(),
                        "--truth", (dir.path() / "truth.csv").string(), "--k", "1", "2"});
    REQUIRE(r.code == 0);
    const auto metrics = parse_csv(read_text_file(dir.path() / files::metrics));
    REQUIRE(metrics.size() == 3);
    CHECK(metrics[1].cells[1] == "1");
    CHECK(std::stod(metrics[1].cells[2]) == 1.0);
}

TEST_CASE("compare mode covers every method")
{
    testing::TempDir dir("cli-compare");
    REQUIRE(run(with(small(dir), {"generate"})).code == 0);
    REQUIRE(run(with(small(dir), {"train"})).code == 0);
    const auto r = run(with(small(dir), {"evaluate", "--compare", "--k", "1", "10"}));
    REQUIRE(r.code == 0);
    const auto metrics = parse_csv(read_text_file(dir.path() / files::metrics));
    CHECK(metrics.size() == 1 + comparison_methods().size() * 2);
    for (const auto& m : comparison_methods()) CHECK(r.out.find(m) != std::string::npos);
}

TEST_CASE("a one-hop pipeline equals the LEFT join")
{
    testing::TempDir dir("cli-pipe");
    REQUIRE(run(with(small(dir), {"generate"})).code == 0);
    REQUIRE(run(with(small(dir), {"train"})).code == 0);
    write_text_file(dir.path() / "left.spec", "base LEFT KEYLESS JOIN aux LEFT SIZE 1 RIGHT SIZE 3 USING supervision;");
    REQUIRE(run(with(small(dir), {"join", "--spec", (dir.path() / "left.spec").string()})).code == 0);
    const auto joined = read_text_file(dir.path() / files::result);

    // labels are the source year; base records inherit theirs through the truth pairs
    const auto aux = load_dataset(dir.path() / files::aux);
    std::map<std::string, std::string> year;
    std::string labels = "id,label\n";
    for (const auto& r : aux.records()) {
        year[r.id] = *r.find("year");
        labels += r.id + "," + year[r.id] + "\n";
    }
    write_text_file(dir.path() / "labels.csv", labels);
    std::string truth = "id,label\n";
    for (const char* f : {files::truth_train, files::truth_test}) {
        for (const auto& p : parse_supervision(read_text_file(dir.path() / f)).pairs) {
            truth += p.base_id + "," + year.at(p.aux_id) + "\n";
        }
    }
    write_text_file(dir.path() / "label_truth.csv", truth);

    const auto p = run(with(small(dir), {"pipeline", "--chain", (dir.path() / "left.spec").string(), "--labels",
                                         (dir.path() / "labels.csv").string(), "--label-truth",
                                         (dir.path() / "label_truth.csv").string()}));
    REQUIRE(p.code == 0);
    CHECK(read_text_file(dir.path() / files::result) == joined);
    CHECK(p.out.find("MSE@1") != std::string::npos);
    CHECK(p.out.find("MSE@30") != std::string::npos);
    const auto agg = parse_csv(read_text_file(dir.path() / files::aggregates));
    CHECK(agg[0].cells == std::vector<std::string>{"base_id", "k", "prediction"});
    CHECK(agg.size() == 1 + 60 * 4);
    const auto paths = parse_csv(read_text_file(dir.path() / files::paths));
    CHECK(paths[0].cells == std::vector<std::string>{"base_id", "hop_1", "score"});
}

TEST_CASE("supervision subsets are seeded and order-preserving")
{
    const auto half = supervision_subset(10, 0.5, 3);
    CHECK(half.size() == 5);
    CHECK(std::is_sorted(half.begin(), half.end()));
    CHECK(half == supervision_subset(10, 0.5, 3));
    CHECK(supervision_subset(10, 1.0, 3).size() == 10);
    CHECK(supervision_subset(3, 0.01, 3).size() == 1);
    CHECK(supervision_subset(7, 0.5, 3).size() == 4);
}

TEST_CASE("given triples are trained on as they are")
{
    testing::TempDir dir("cli-triples");
    const auto base = testing::text_dataset("b", Role::base, {"red apple", "blue car"});
    const auto aux = testing::text_dataset("a", Role::auxiliary, {"red apple", "blue car", "green pear"});
    Supervision sup;
    sup.triples = {{"b0", "a0", "a2"}, {"b1", "a1", "a0"}};
    auto cfg = config_for(dir);
    cfg.pretrain = false;
    cfg.sampler = SamplerKind::custom;
    const auto via_cli = train_models(cfg, base, aux, sup);

    auto models = initial_encoders(cfg);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.margin = cfg.loss_margin;
    tc.seed = derive_seed(cfg.seed, "train");
    const auto direct = train(models, sup.triples, base, aux, tc);
    CHECK(direct.epoch_loss == via_cli.loss);
    CHECK(models.base() == via_cli.models.base());

    Supervision pairs;
    pairs.pairs = {{"b0", "a0"}};
    CHECK_THROWS_AS(train_models(cfg, base, aux, pairs), ValidationError);
}

TEST_CASE("two encoders write two model files")
{
    testing::TempDir dir("cli-two");
    REQUIRE(run(with(small(dir), {"generate"})).code == 0);
    REQUIRE(run(with(small(dir), {"--num-encoders", "2", "train"})).code == 0);
    CHECK(fs::exists(dir.path() / files::model_aux));
    const auto base_model = load_model(dir.path() / files::model);
    const auto aux_model = load_model(dir.path() / files::model_aux);
    CHECK_FALSE(base_model == aux_model);
}
