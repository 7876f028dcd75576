#include "emberish/encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "emberish/csv.hpp"
#include "emberish/error.hpp"
#include "emberish/parallel.hpp"
#include "emberish/random.hpp"

namespace emberish {

HashedBagEncoder::HashedBagEncoder(EncoderShape shape)
    : shape_(shape), table_(shape.hash_dim * shape.output_dim, 0.0),
      projection_(shape.output_dim * shape.output_dim, 0.0), bias_(shape.output_dim, 0.0)
{
    if (shape.hash_dim == 0 || shape.output_dim == 0) {
        throw ValidationError("encoder dimensions must be positive");
    }
    if (shape.hash_dim > 0xFFFFFFFFull) {
        throw ValidationError("hash_dim must fit in 32 bits");
    }
}

HashedBagEncoder HashedBagEncoder::random(EncoderShape shape, std::uint64_t init_seed)
{
    HashedBagEncoder m(shape);
    Rng rng(init_seed);
    for (double& v : m.table_) {
        v = rng.normal();
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(shape.output_dim));
    for (double& v : m.projection_) {
        v = (2.0 * rng.uniform_real() - 1.0) * bound;
    }
    for (double& v : m.bias_) {
        v = (2.0 * rng.uniform_real() - 1.0) * bound;
    }
    return m;
}

void set_identity_projection(HashedBagEncoder& model)
{
    const std::size_t d = model.output_dim();
    auto w = model.projection();
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        w[i * d + i] = 1.0;
    }
    auto b = model.bias();
    std::fill(b.begin(), b.end(), 0.0);
}

std::uint32_t HashedBagEncoder::bucket(std::string_view token) const noexcept
{
    const std::uint64_t h = splitmix64(fnv1a64(token) ^ shape_.hash_seed);
    return static_cast<std::uint32_t>(h % shape_.hash_dim);
}

std::vector<std::uint32_t> HashedBagEncoder::buckets(std::span<const std::string> tokens) const
{
    std::vector<std::uint32_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        out.push_back(bucket(t));
    }
    return out;
}

void HashedBagEncoder::forward(std::span<const std::uint32_t> buckets, ForwardCache& cache) const
{
    const std::size_t d = shape_.output_dim;
    cache.buckets.assign(buckets.begin(), buckets.end());
    cache.pooled.assign(d, 0.0);
    cache.pre.assign(d, 0.0);
    cache.out.assign(d, 0.0);
    cache.norm = 0.0;
    if (buckets.empty()) {
        return;
    }
    for (std::uint32_t b : buckets) {
        const double* r = table_.data() + static_cast<std::size_t>(b) * d;
        for (std::size_t j = 0; j < d; ++j) {
            cache.pooled[j] += r[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(buckets.size());
    for (double& v : cache.pooled) {
        v *= inv;
    }
    for (std::size_t i = 0; i < d; ++i) {
        const double* w = projection_.data() + i * d;
        double acc = bias_[i];
        for (std::size_t j = 0; j < d; ++j) {
            acc += w[j] * cache.pooled[j];
        }
        cache.pre[i] = acc;
    }
    if (shape_.normalize) {
        double sq = 0.0;
        for (double v : cache.pre) {
            sq += v * v;
        }
        cache.norm = std::sqrt(sq);
        if (cache.norm > 0.0) {
            for (std::size_t i = 0; i < d; ++i) {
                cache.out[i] = cache.pre[i] / cache.norm;
            }
            return;
        }
    }
    cache.out = cache.pre;
}

EmbeddingVector HashedBagEncoder::encode_buckets(std::span<const std::uint32_t> buckets) const
{
    ForwardCache cache;
    forward(buckets, cache);
    return std::move(cache.out);
}

EmbeddingVector HashedBagEncoder::encode(const Sentence& sentence) const
{
    return encode_buckets(buckets(sentence.tokens));
}

bool HashedBagEncoder::all_finite() const
{
    auto finite = [](const std::vector<double>& v) {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    };
    return finite(table_) && finite(projection_) && finite(bias_);
}

std::vector<EmbeddedRecord> embed_dataset(const Encoder& encoder, const Dataset& dataset)
{
    std::vector<EmbeddedRecord> out(dataset.size());
    parallel_for(dataset.size(), [&](std::size_t i) {
        const Sentence s = prepare_sentence(dataset[i], encoder.tokenizer());
        out[i] = {dataset[i].id, encoder.encode(s)};
    });
    return out;
}

namespace {

constexpr char kModelMagic[8] = {'E', 'M', 'B', 'R', 'M', 'O', 'D', 'L'};
constexpr char kVecMagic[8] = {'E', 'M', 'B', 'R', 'V', 'E', 'C', 'S'};

template <typename T>
void put_le(std::string& out, T value)
{
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes, bytes + sizeof(T));
    }
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

void put_doubles(std::string& out, std::span<const double> values)
{
    for (double v : values) {
        put_le(out, v);
    }
}

class Reader {
  public:
    Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        unsigned char buf[sizeof(T)];
        std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(buf, buf + sizeof(T));
        }
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, buf, sizeof(T));
        return value;
    }

    std::string_view take(std::size_t n)
    {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void get_doubles(std::span<double> out)
    {
        need(out.size() * sizeof(double));
        for (double& v : out) {
            v = get<double>();
        }
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) {
            throw ValidationError(what_ + " is truncated");
        }
    }

    std::string_view bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const HashedBagEncoder& model)
{
    const auto& s = model.shape();
    std::string out;
    out.reserve(48 + 8 * (model.table().size() + model.projection().size() + model.bias().size()));
    out.append(kModelMagic, sizeof kModelMagic);
    put_le<std::uint32_t>(out, kModelFormatVersion);
    put_le<std::uint64_t>(out, s.hash_dim);
    put_le<std::uint64_t>(out, s.output_dim);
    put_le<std::uint64_t>(out, s.hash_seed);
    put_le<std::uint8_t>(out, s.normalize ? 1 : 0);
    put_le<std::uint8_t>(out, s.tokenizer == TokenizerMode::char2gram ? 1 : 0);
    put_le<std::uint16_t>(out, 0);
    put_doubles(out, model.table());
    put_doubles(out, model.projection());
    put_doubles(out, model.bias());
    return out;
}

HashedBagEncoder deserialize_model(std::string_view bytes)
{
    Reader r(bytes, "model file");
    if (r.take(sizeof kModelMagic) != std::string_view(kModelMagic, sizeof kModelMagic)) {
        throw ValidationError("model file has a bad magic number");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kModelFormatVersion) {
        throw ValidationError("model file version " + std::to_string(version)
                              + " is not supported (expected "
                              + std::to_string(kModelFormatVersion) + ")");
    }
    EncoderShape shape;
    shape.hash_dim = r.get<std::uint64_t>();
    shape.output_dim = r.get<std::uint64_t>();
    shape.hash_seed = r.get<std::uint64_t>();
    shape.normalize = r.get<std::uint8_t>() != 0;
    shape.tokenizer = r.get<std::uint8_t>() != 0 ? TokenizerMode::char2gram : TokenizerMode::whitespace;
    r.get<std::uint16_t>();
    const std::size_t d = shape.output_dim;
    if (shape.hash_dim == 0 || d == 0 || shape.hash_dim > (r.remaining() / 8) / d) {
        throw ValidationError("model file is truncated");
    }
    HashedBagEncoder model(shape);
    r.get_doubles(model.table());
    r.get_doubles(model.projection());
    r.get_doubles(model.bias());
    if (r.remaining() != 0) {
        throw ValidationError("model file has trailing bytes");
    }
    return model;
}

void save_model(const std::filesystem::path& path, const HashedBagEncoder& model)
{
    write_text_file(path, serialize_model(model));
}

HashedBagEncoder load_model(const std::filesystem::path& path)
{
    return deserialize_model(read_text_file(path));
}

std::string serialize_embeddings(const std::vector<EmbeddedRecord>& embeddings)
{
    const std::size_t d = embeddings.empty() ? 0 : embeddings.front().second.size();
    std::string out(kVecMagic, sizeof kVecMagic);
    put_le<std::uint32_t>(out, kEmbeddingFormatVersion);
    put_le<std::uint64_t>(out, embeddings.size());
    put_le<std::uint64_t>(out, d);
    for (const auto& [id, vec] : embeddings) {
        if (vec.size() != d) {
            throw ValidationError("embedding " + id + " has inconsistent dimension");
        }
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out += id;
        put_doubles(out, vec);
    }
    return out;
}

std::vector<EmbeddedRecord> deserialize_embeddings(std::string_view bytes)
{
    Reader r(bytes, "embedding file");
    if (r.take(sizeof kVecMagic) != std::string_view(kVecMagic, sizeof kVecMagic)) {
        throw ValidationError("embedding file has a bad magic number");
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kEmbeddingFormatVersion) {
        throw ValidationError("embedding file version " + std::to_string(version)
                              + " is not supported");
    }
    const auto count = r.get<std::uint64_t>();
    const auto d = r.get<std::uint64_t>();
    std::vector<EmbeddedRecord> out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = r.get<std::uint32_t>();
        std::string id(r.take(len));
        EmbeddingVector vec(d);
        r.get_doubles(vec);
        out.emplace_back(std::move(id), std::move(vec));
    }
    if (r.remaining() != 0) {
        throw ValidationError("embedding file has trailing bytes");
    }
    return out;
}

}  // namespace emberish
