#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "emberish/encoder.hpp"
#include "emberish/record.hpp"

namespace emberish {

/// max(||a - p||_2 - ||a - n||_2 + margin, 0). Throws ValidationError on a
/// dimension mismatch.
double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin);

struct TripletGradient {
    double loss = 0.0;
    std::vector<double> anchor;
    std::vector<double> positive;
    std::vector<double> negative;
};

/// Loss and its (sub)gradient with respect to the three embeddings. A zero
/// distance contributes a zero subgradient.
TripletGradient triplet_loss_gradient(std::span<const double> anchor,
                                      std::span<const double> positive,
                                      std::span<const double> negative, double margin);

/// One encoder shared by both datasets, or one encoder per dataset.
class EncoderPair {
  public:
    explicit EncoderPair(HashedBagEncoder shared) : base_(std::move(shared)) {}
    EncoderPair(HashedBagEncoder base, HashedBagEncoder aux)
        : base_(std::move(base)), aux_(std::move(aux))
    {}

    bool shared() const noexcept { return !aux_.has_value(); }
    HashedBagEncoder& base() noexcept { return base_; }
    const HashedBagEncoder& base() const noexcept { return base_; }
    HashedBagEncoder& aux() noexcept { return aux_ ? *aux_ : base_; }
    const HashedBagEncoder& aux() const noexcept { return aux_ ? *aux_ : base_; }

  private:
    HashedBagEncoder base_;
    std::optional<HashedBagEncoder> aux_;
};

/// A training triple with its sentences already hashed to bucket ids.
struct EncodedTriple {
    std::vector<std::uint32_t> anchor;
    std::vector<std::uint32_t> positive;
    std::vector<std::uint32_t> negative;
};

struct DenseGradients {
    std::vector<double> table;
    std::vector<double> projection;
    std::vector<double> bias;
};

struct LossGradients {
    double loss = 0.0;  ///< mean over the triples
    DenseGradients base;
    std::optional<DenseGradients> aux;  ///< set for unshared encoders
};

/// Mean triplet loss over the triples; anchors go through the base encoder,
/// positives and negatives through the aux encoder.
double mean_triplet_loss(const EncoderPair& models, std::span<const EncodedTriple> triples,
                         double margin);

/// Mean loss and its exact gradient with respect to every parameter.
LossGradients triplet_loss_gradients(const EncoderPair& models,
                                     std::span<const EncodedTriple> triples, double margin);

struct TrainConfig {
    int epochs = 1;
    std::size_t batch_size = 8;
    double learning_rate = 1e-5;
    double margin = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> epoch_loss;  ///< mean per-triple loss of each epoch
    std::size_t steps = 0;
};

/// Supplies the triples for an epoch (lets samplers redraw negatives).
using TripleProvider = std::function<std::vector<SupervisionTriple>(int epoch)>;

/// Mini-batch Adam on the mean triplet loss. Batches are drawn from an
/// epoch-wise shuffle seeded by cfg.seed. Table rows use lazy (sparse) Adam
/// updates; the projection and bias use dense Adam. Throws RuntimeFailure
/// if the loss becomes non-finite.
TrainReport train(EncoderPair& models, const TripleProvider& triples, const Dataset& base,
                  const Dataset& aux, const TrainConfig& cfg);

TrainReport train(EncoderPair& models, const std::vector<SupervisionTriple>& triples,
                  const Dataset& base, const Dataset& aux, const TrainConfig& cfg);

}  // namespace emberish
