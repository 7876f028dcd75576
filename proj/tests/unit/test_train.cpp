#include <doctest.h>

#include <cmath>

#include "emberish/error.hpp"
#include "emberish/train.hpp"
#include "support.hpp"

using namespace emberish;

namespace {

double distance(const EmbeddingVector& a, const EmbeddingVector& b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

EncoderShape tiny_shape(bool normalize)
{
    EncoderShape s;
    s.hash_dim = 8;
    s.output_dim = 4;
    s.normalize = normalize;
    s.hash_seed = 5;
    return s;
}

std::vector<EncodedTriple> random_triples(Rng& rng, std::size_t n, std::size_t hash_dim)
{
    auto bag = [&] {
        std::vector<std::uint32_t> b(1 + rng.uniform_index(4));
        for (auto& x : b) x = static_cast<std::uint32_t>(rng.uniform_index(hash_dim));
        return b;
    };
    std::vector<EncodedTriple> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({bag(), bag(), bag()});
    return out;
}

// Central differences of the mean loss over every parameter of one encoder.
void check_gradient(EncoderPair& models, HashedBagEncoder& target, const DenseGradients& grad,
                    std::span<const EncodedTriple> triples, double margin)
{
    const double h = 1e-5;
    auto probe = [&](std::span<double> params, const std::vector<double>& analytic) {
        REQUIRE(params.size() == analytic.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = params[i];
            params[i] = saved + h;
            const double up = mean_triplet_loss(models, triples, margin);
            params[i] = saved - h;
            const double down = mean_triplet_loss(models, triples, margin);
            params[i] = saved;
            const double numeric = (up - down) / (2 * h);
            const bool close = testing::relative_error(analytic[i], numeric) < 1e-4
                || std::fabs(analytic[i] - numeric) < 1e-9;
            CHECK(close);
        }
    };
    probe(target.table(), grad.table);
    probe(target.projection(), grad.projection);
    probe(target.bias(), grad.bias);
}

}  // namespace

TEST_CASE("triplet loss arithmetic")
{
    const std::vector<double> a{0, 0}, p1{1, 0}, n3{0, 3}, p2{2, 0}, n1{0, 1};
    CHECK(triplet_loss(a, p1, n3, 1.0) == 0.0);
    CHECK(triplet_loss(a, p2, n1, 0.5) == doctest::Approx(1.5));
    CHECK(triplet_loss(a, a, n1, 2.0) == doctest::Approx(1.0));
    CHECK(triplet_loss(a, a, n3, 2.0) == 0.0);
    const std::vector<double> bad{1, 2, 3};
    CHECK_THROWS_AS(triplet_loss(a, bad, n1, 1.0), ValidationError);
}

TEST_CASE("loss is non-negative and zero exactly when the margin holds")
{
    Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        const auto a = testing::random_vector(rng, 5);
        const auto p = testing::random_vector(rng, 5);
        const auto n = testing::random_vector(rng, 5);
        const double margin = rng.uniform_real();
        const double loss = triplet_loss(a, p, n, margin);
        CHECK(loss >= 0.0);
        CHECK((loss == 0.0) == (distance(a, p) + margin <= distance(a, n)));
        CHECK(triplet_loss_gradient(a, p, n, margin).loss == loss);
    }
}

TEST_CASE("embedding-level gradient matches finite differences")
{
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = testing::random_vector(rng, 4);
        auto p = testing::random_vector(rng, 4);
        auto n = testing::random_vector(rng, 4);
        const double margin = 10.0;
        const auto g = triplet_loss_gradient(a, p, n, margin);
        using Slot = std::pair<std::vector<double>*, const std::vector<double>*>;
        for (const Slot& pair : {Slot{&a, &g.anchor}, Slot{&p, &g.positive}, Slot{&n, &g.negative}}) {
            auto& v = *pair.first;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double saved = v[i];
                v[i] = saved + 1e-6;
                const double up = triplet_loss(a, p, n, margin);
                v[i] = saved - 1e-6;
                const double down = triplet_loss(a, p, n, margin);
                v[i] = saved;
                CHECK((*pair.second)[i] == doctest::Approx((up - down) / 2e-6).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("parameter gradients match finite differences on small models")
{
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const bool normalize = trial % 2 == 0;
        EncoderPair models(HashedBagEncoder::random(tiny_shape(normalize), 100 + trial));
        const auto triples = random_triples(rng, 3, 8);
        const double margin = 10.0;  // keeps every hinge active
        const auto grads = triplet_loss_gradients(models, triples, margin);
        CHECK_FALSE(grads.aux.has_value());
        CHECK(grads.loss == doctest::Approx(mean_triplet_loss(models, triples, margin)));
        check_gradient(models, models.base(), grads.base, triples, margin);
    }
}

TEST_CASE("separate encoders each get their own gradient")
{
    Rng rng(32);
    EncoderPair models(HashedBagEncoder::random(tiny_shape(true), 1),
                       HashedBagEncoder::random(tiny_shape(true), 2));
    const auto triples = random_triples(rng, 4, 8);
    const auto grads = triplet_loss_gradients(models, triples, 10.0);
    REQUIRE(grads.aux.has_value());
    check_gradient(models, models.base(), grads.base, triples, 10.0);
    check_gradient(models, models.aux(), *grads.aux, triples, 10.0);
}

TEST_CASE("inactive hinge leaves parameters untouched")
{
    const auto base = testing::text_dataset("b", Role::base, {"alpha"});
    const auto aux = testing::text_dataset("a", Role::auxiliary, {"alpha", "omega"});
    EncoderShape shape;
    shape.hash_dim = 32;
    shape.output_dim = 4;
    EncoderPair models(HashedBagEncoder::random(shape, 1));
    // identical sentences give a zero positive distance; with margin 0 the loss is 0
    const std::vector<SupervisionTriple> triples{{"b0", "a0", "a1"}};
    const auto before = models.base();
    TrainConfig cfg;
    cfg.margin = 0.0;
    cfg.epochs = 3;
    cfg.learning_rate = 0.1;
    // "text alpha" vs "text alpha": distance 0; any negative is at distance >= 0
    const auto report = train(models, triples, base, aux, cfg);
    CHECK(report.epoch_loss == std::vector<double>(3, 0.0));
    CHECK(models.base() == before);
}

TEST_CASE("training lowers the loss on a small synthetic set")
{
    std::vector<std::string> texts;
    Rng rng(40);
    for (int i = 0; i < 20; ++i) {
        std::string s;
        for (int w = 0; w < 3; ++w) s += "t" + std::to_string(rng.uniform_index(30)) + " ";
        texts.push_back(s);
    }
    const auto aux = testing::text_dataset("a", Role::auxiliary, texts);
    const auto base = testing::text_dataset("b", Role::base, texts);
    std::vector<SupervisionTriple> triples;
    for (int i = 0; i < 20; ++i) {
        triples.push_back({"b" + std::to_string(i), "a" + std::to_string(i), "a" + std::to_string((i + 7) % 20)});
    }
    EncoderShape shape;
    shape.hash_dim = 256;
    shape.output_dim = 16;
    EncoderPair models(HashedBagEncoder::random(shape, 3));
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.learning_rate = 1e-2;
    cfg.seed = 8;
    const auto report = train(models, triples, base, aux, cfg);
    REQUIRE(report.epoch_loss.size() == 15);
    CHECK(report.epoch_loss.back() <= report.epoch_loss.front());
    CHECK(report.steps == 15 * 3);
    CHECK(models.base().all_finite());

    EncoderPair again(HashedBagEncoder::random(shape, 3));
    CHECK(train(again, triples, base, aux, cfg).epoch_loss == report.epoch_loss);
    CHECK(again.base() == models.base());
}

TEST_CASE("shared encoder maps identical records identically")
{
    const auto base = testing::text_dataset("b", Role::base, {"same words here", "x y"});
    const auto aux = testing::text_dataset("a", Role::auxiliary, {"same words here", "p q", "r s"});
    EncoderShape shape;
    shape.hash_dim = 64;
    shape.output_dim = 8;
    EncoderPair models(HashedBagEncoder::random(shape, 3));
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.learning_rate = 1e-2;
    train(models, {{"b0", "a0", "a1"}, {"b1", "a2", "a1"}}, base, aux, cfg);
    CHECK(models.shared());
    CHECK(embed_dataset(models.base(), base)[0].second == embed_dataset(models.aux(), aux)[0].second);
}

TEST_CASE("unknown ids and diverging runs are reported")
{
    const auto base = testing::text_dataset("b", Role::base, {"a"});
    const auto aux = testing::text_dataset("a", Role::auxiliary, {"a", "b"});
    EncoderShape shape;
    shape.hash_dim = 16;
    shape.output_dim = 4;
    EncoderPair models(HashedBagEncoder::random(shape, 3));
    CHECK_THROWS_AS(train(models, {{"b9", "a0", "a1"}}, base, aux, TrainConfig{}), ValidationError);
    CHECK_THROWS_AS(train(models, std::vector<SupervisionTriple>{}, base, aux, TrainConfig{}),
                    ValidationError);

    models.base().bias()[0] = std::nan("");
    CHECK_THROWS_AS(train(models, {{"b0", "a0", "a1"}}, base, aux, TrainConfig{}), RuntimeFailure);
}
