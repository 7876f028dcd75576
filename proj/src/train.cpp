#include "emberish/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "emberish/error.hpp"
#include "emberish/random.hpp"

namespace emberish {

namespace {

double distance(std::span<const double> a, std::span<const double> b)
{
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        sq += t * t;
    }
    return std::sqrt(sq);
}

void check_dims(std::span<const double> a, std::span<const double> p, std::span<const double> n)
{
    if (a.size() != p.size() || a.size() != n.size()) {
        throw ValidationError("triplet loss: embedding dimensions differ ("
                              + std::to_string(a.size()) + ", " + std::to_string(p.size()) + ", "
                              + std::to_string(n.size()) + ")");
    }
}

}  // namespace

double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin)
{
    check_dims(anchor, positive, negative);
    return std::max(distance(anchor, positive) - distance(anchor, negative) + margin, 0.0);
}

TripletGradient triplet_loss_gradient(std::span<const double> anchor,
                                      std::span<const double> positive,
                                      std::span<const double> negative, double margin)
{
    check_dims(anchor, positive, negative);
    const std::size_t d = anchor.size();
    TripletGradient g;
    g.anchor.assign(d, 0.0);
    g.positive.assign(d, 0.0);
    g.negative.assign(d, 0.0);
    const double dp = distance(anchor, positive);
    const double dn = distance(anchor, negative);
    const double raw = dp - dn + margin;
    if (raw <= 0.0) {
        return g;
    }
    g.loss = raw;
    for (std::size_t i = 0; i < d; ++i) {
        const double up = dp > 0.0 ? (anchor[i] - positive[i]) / dp : 0.0;
        const double un = dn > 0.0 ? (anchor[i] - negative[i]) / dn : 0.0;
        g.anchor[i] = up - un;
        g.positive[i] = -up;
        g.negative[i] = un;
    }
    return g;
}

namespace {

/// Gradient accumulator with sparse table rows.
class GradAccumulator {
  public:
    explicit GradAccumulator(std::size_t d) : d_(d), projection(d * d, 0.0), bias(d, 0.0) {}

    double* row(std::uint32_t bucket)
    {
        auto [it, fresh] = slot_.emplace(bucket, rows.size());
        if (fresh) {
            rows.push_back(bucket);
            values.resize(values.size() + d_, 0.0);
        }
        return values.data() + it->second * d_;
    }

    void clear()
    {
        slot_.clear();
        rows.clear();
        values.clear();
        std::fill(projection.begin(), projection.end(), 0.0);
        std::fill(bias.begin(), bias.end(), 0.0);
    }

    DenseGradients to_dense(std::size_t hash_dim) const
    {
        DenseGradients g;
        g.table.assign(hash_dim * d_, 0.0);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            std::copy_n(values.data() + r * d_, d_, g.table.data() + rows[r] * d_);
        }
        g.projection = projection;
        g.bias = bias;
        return g;
    }

    std::size_t dim() const noexcept { return d_; }

  private:
    std::size_t d_;
    std::unordered_map<std::uint32_t, std::size_t> slot_;

  public:
    std::vector<std::uint32_t> rows;
    std::vector<double> values;
    std::vector<double> projection;
    std::vector<double> bias;
};

/// Backpropagates d(loss)/d(out) * scale through normalisation, projection
/// and mean pooling into acc.
void backward(const HashedBagEncoder& model, const ForwardCache& cache,
              std::span<const double> grad_out, double scale, GradAccumulator& acc,
              std::vector<double>& scratch_y, std::vector<double>& scratch_pool)
{
    if (cache.buckets.empty()) {
        return;
    }
    const std::size_t d = model.output_dim();
    scratch_y.assign(d, 0.0);
    if (model.shape().normalize) {
        if (cache.norm <= 0.0) {
            return;
        }
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            dot += cache.out[i] * grad_out[i];
        }
        for (std::size_t i = 0; i < d; ++i) {
            scratch_y[i] = scale * (grad_out[i] - cache.out[i] * dot) / cache.norm;
        }
    } else {
        for (std::size_t i = 0; i < d; ++i) {
            scratch_y[i] = scale * grad_out[i];
        }
    }

    const auto w = model.projection();
    scratch_pool.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double gy = scratch_y[i];
        if (gy == 0.0) {
            continue;
        }
        acc.bias[i] += gy;
        double* gw = acc.projection.data() + i * d;
        const double* wrow = w.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
            gw[j] += gy * cache.pooled[j];
            scratch_pool[j] += wrow[j] * gy;
        }
    }
    const double inv = 1.0 / static_cast<double>(cache.buckets.size());
    for (std::uint32_t b : cache.buckets) {
        double* gr = acc.row(b);
        for (std::size_t j = 0; j < d; ++j) {
            gr[j] += scratch_pool[j] * inv;
        }
    }
}

/// Forward + backward for a batch; returns the summed loss.
class BatchEngine {
  public:
    explicit BatchEngine(const EncoderPair& models)
        : base_acc(models.base().output_dim()), aux_acc(models.aux().output_dim())
    {}

    void clear()
    {
        base_acc.clear();
        aux_acc.clear();
    }

    /// Accumulates scale * d(loss)/d(params) and returns the triple's loss.
    double accumulate(const EncoderPair& models, const EncodedTriple& t, double margin, double scale)
    {
        models.base().forward(t.anchor, ca_);
        models.aux().forward(t.positive, cp_);
        models.aux().forward(t.negative, cn_);
        auto g = triplet_loss_gradient(ca_.out, cp_.out, cn_.out, margin);
        if (g.loss > 0.0) {
            GradAccumulator& aux_target = models.shared() ? base_acc : aux_acc;
            backward(models.base(), ca_, g.anchor, scale, base_acc, sy_, sp_);
            backward(models.aux(), cp_, g.positive, scale, aux_target, sy_, sp_);
            backward(models.aux(), cn_, g.negative, scale, aux_target, sy_, sp_);
        }
        return g.loss;
    }

    GradAccumulator base_acc;
    GradAccumulator aux_acc;

  private:
    ForwardCache ca_, cp_, cn_;
    std::vector<double> sy_, sp_;
};

class AdamState {
  public:
    AdamState(const HashedBagEncoder& model, const TrainConfig& cfg)
        : cfg_(cfg), d_(model.output_dim()), m_proj_(d_ * d_, 0.0), v_proj_(d_ * d_, 0.0),
          m_bias_(d_, 0.0), v_bias_(d_, 0.0)
    {}

    void step(HashedBagEncoder& model, const GradAccumulator& g, std::size_t t)
    {
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t));
        update(model.projection(), g.projection, m_proj_, v_proj_, c1, c2);
        update(model.bias(), g.bias, m_bias_, v_bias_, c1, c2);
        for (std::size_t r = 0; r < g.rows.size(); ++r) {
            auto& st = rows_[g.rows[r]];
            if (st.m.empty()) {
                st.m.assign(d_, 0.0);
                st.v.assign(d_, 0.0);
            }
            update(model.row(g.rows[r]),
                   std::span<const double>(g.values.data() + r * d_, d_), st.m, st.v, c1, c2);
        }
    }

  private:
    struct RowState {
        std::vector<double> m;
        std::vector<double> v;
    };

    void update(std::span<double> p, std::span<const double> grad, std::vector<double>& m,
                std::vector<double>& v, double c1, double c2) const
    {
        const double b1 = cfg_.beta1;
        const double b2 = cfg_.beta2;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            const double mh = m[i] / c1;
            const double vh = v[i] / c2;
            p[i] -= cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon);
        }
    }

    TrainConfig cfg_;
    std::size_t d_;
    std::vector<double> m_proj_, v_proj_, m_bias_, v_bias_;
    std::unordered_map<std::uint32_t, RowState> rows_;
};

}  // namespace

double mean_triplet_loss(const EncoderPair& models, std::span<const EncodedTriple> triples,
                         double margin)
{
    if (triples.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& t : triples) {
        const auto a = models.base().encode_buckets(t.anchor);
        const auto p = models.aux().encode_buckets(t.positive);
        const auto n = models.aux().encode_buckets(t.negative);
        total += triplet_loss(a, p, n, margin);
    }
    return total / static_cast<double>(triples.size());
}

LossGradients triplet_loss_gradients(const EncoderPair& models,
                                     std::span<const EncodedTriple> triples, double margin)
{
    BatchEngine engine(models);
    LossGradients out;
    if (triples.empty()) {
        out.base = engine.base_acc.to_dense(models.base().hash_dim());
        return out;
    }
    const double scale = 1.0 / static_cast<double>(triples.size());
    double total = 0.0;
    for (const auto& t : triples) {
        total += engine.accumulate(models, t, margin, scale);
    }
    out.loss = total * scale;
    out.base = engine.base_acc.to_dense(models.base().hash_dim());
    if (!models.shared()) {
        out.aux = engine.aux_acc.to_dense(models.aux().hash_dim());
    }
    return out;
}

TrainReport train(EncoderPair& models, const TripleProvider& provider, const Dataset& base,
                  const Dataset& aux, const TrainConfig& cfg)
{
    if (cfg.learning_rate <= 0.0) {
        throw ValidationError("learning_rate must be > 0");
    }
    if (cfg.margin < 0.0) {
        throw ValidationError("margin must be ≥ 0");
    }
    if (cfg.batch_size == 0) {
        throw ValidationError("batch_size must be ≥ 1");
    }

    auto hash_all = [](const HashedBagEncoder& m, const Dataset& ds) {
        std::vector<std::vector<std::uint32_t>> out;
        out.reserve(ds.size());
        for (const auto& r : ds.records()) {
            out.push_back(m.buckets(prepare_sentence(r, m.tokenizer()).tokens));
        }
        return out;
    };
    const auto base_buckets = hash_all(models.base(), base);
    const auto aux_buckets = hash_all(models.aux(), aux);

    auto lookup = [](const Dataset& ds, const std::string& id, const char* role) {
        auto i = ds.index_of(id);
        if (!i) {
            throw ValidationError(std::string("training triple references unknown ") + role
                                  + " id " + id);
        }
        return *i;
    };

    AdamState adam_base(models.base(), cfg);
    std::optional<AdamState> adam_aux;
    if (!models.shared()) {
        adam_aux.emplace(models.aux(), cfg);
    }
    BatchEngine engine(models);
    TrainReport report;
    Rng shuffle_rng(derive_seed(cfg.seed, "train-shuffle"));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto ids = provider(epoch);
        if (ids.empty()) {
            throw ValidationError("training needs at least one triple");
        }
        std::vector<EncodedTriple> triples;
        triples.reserve(ids.size());
        for (const auto& t : ids) {
            triples.push_back({base_buckets[lookup(base, t.anchor_id, "anchor")],
                               aux_buckets[lookup(aux, t.positive_id, "positive")],
                               aux_buckets[lookup(aux, t.negative_id, "negative")]});
        }
        std::vector<std::size_t> order(triples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        double epoch_total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>(end - start);
            engine.clear();
            double batch_total = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                batch_total += engine.accumulate(models, triples[order[i]], cfg.margin, scale);
            }
            if (!std::isfinite(batch_total)) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", batch " << start / cfg.batch_size
                    << " (first anchor " << ids[order[start]].anchor_id
                    << "); lower the learning rate or check the inputs";
                throw RuntimeFailure(msg.str());
            }
            epoch_total += batch_total;
            ++report.steps;
            adam_base.step(models.base(), engine.base_acc, report.steps);
            if (adam_aux) {
                adam_aux->step(models.aux(), engine.aux_acc, report.steps);
            }
        }
        report.epoch_loss.push_back(epoch_total / static_cast<double>(triples.size()));
    }
    if (!models.base().all_finite() || !models.aux().all_finite()) {
        throw RuntimeFailure("training produced non-finite parameters");
    }
    return report;
}

TrainReport train(EncoderPair& models, const std::vector<SupervisionTriple>& triples,
                  const Dataset& base, const Dataset& aux, const TrainConfig& cfg)
{
    return train(models, [&](int) { return triples; }, base, aux, cfg);
}

}  // namespace emberish
