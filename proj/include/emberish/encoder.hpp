#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emberish/embedding.hpp"
#include "emberish/prepare.hpp"
#include "emberish/record.hpp"

namespace emberish {

/// Maps a prepared sentence to a fixed-length embedding. Implementations
/// must be pure: encode() is called concurrently.
class Encoder {
  public:
    virtual ~Encoder() = default;
    virtual std::size_t output_dim() const = 0;
    virtual TokenizerMode tokenizer() const = 0;
    virtual EmbeddingVector encode(const Sentence& sentence) const = 0;
};

struct EncoderShape {
    std::size_t hash_dim = 1u << 16;
    std::size_t output_dim = 200;
    bool normalize = true;
    TokenizerMode tokenizer = TokenizerMode::whitespace;
    std::uint64_t hash_seed = 0;

    bool operator==(const EncoderShape&) const = default;
};

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardCache {
    std::vector<std::uint32_t> buckets;
    std::vector<double> pooled;  ///< mean of the bucket rows
    std::vector<double> pre;     ///< projection output before normalisation
    EmbeddingVector out;
    double norm = 0.0;           ///< ||pre||, set when normalising
};

/// Hashed bag-of-tokens encoder:
///
///   pooled = mean_t table[hash(t) mod H]
///   y      = W pooled + b
///   x      = y / ||y||   (when normalize is set)
///
/// An empty token list maps to the zero vector and is not normalised.
class HashedBagEncoder final : public Encoder {
  public:
    explicit HashedBagEncoder(EncoderShape shape);

    /// Table ~ N(0, 1); W and b ~ U(-1/sqrt(d), 1/sqrt(d)).
    static HashedBagEncoder random(EncoderShape shape, std::uint64_t init_seed);

    const EncoderShape& shape() const noexcept { return shape_; }
    std::size_t hash_dim() const noexcept { return shape_.hash_dim; }
    std::size_t output_dim() const noexcept override { return shape_.output_dim; }
    TokenizerMode tokenizer() const noexcept override { return shape_.tokenizer; }

    std::span<double> table() noexcept { return table_; }
    std::span<const double> table() const noexcept { return table_; }
    std::span<double> row(std::size_t bucket) noexcept
    {
        return std::span<double>(table_).subspan(bucket * shape_.output_dim, shape_.output_dim);
    }
    std::span<const double> row(std::size_t bucket) const noexcept
    {
        return std::span<const double>(table_).subspan(bucket * shape_.output_dim, shape_.output_dim);
    }
    /// Row-major d x d, projection()[out * d + in].
    std::span<double> projection() noexcept { return projection_; }
    std::span<const double> projection() const noexcept { return projection_; }
    std::span<double> bias() noexcept { return bias_; }
    std::span<const double> bias() const noexcept { return bias_; }

    std::uint32_t bucket(std::string_view token) const noexcept;
    std::vector<std::uint32_t> buckets(std::span<const std::string> tokens) const;

    EmbeddingVector encode(const Sentence& sentence) const override;
    EmbeddingVector encode_buckets(std::span<const std::uint32_t> buckets) const;
    void forward(std::span<const std::uint32_t> buckets, ForwardCache& cache) const;

    bool all_finite() const;

    bool operator==(const HashedBagEncoder& o) const
    {
        return shape_ == o.shape_ && table_ == o.table_ && projection_ == o.projection_ && bias_ == o.bias_;
    }

  private:
    EncoderShape shape_;
    std::vector<double> table_;
    std::vector<double> projection_;
    std::vector<double> bias_;
};

/// Sets the projection to the identity and the bias to zero.
void set_identity_projection(HashedBagEncoder& model);

/// One embedding per record in dataset order.
std::vector<EmbeddedRecord> embed_dataset(const Encoder& encoder, const Dataset& dataset);

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

/// Binary model: 8-byte magic "EMBRMODL", u32 version, u64 H, u64 d,
/// u64 hash seed, u8 normalize, u8 tokenizer, u16 reserved, then the table
/// (H x d), projection (d x d) and bias (d) as little-endian f64, row-major.
std::string serialize_model(const HashedBagEncoder& model);
HashedBagEncoder deserialize_model(std::string_view bytes);
void save_model(const std::filesystem::path& path, const HashedBagEncoder& model);
HashedBagEncoder load_model(const std::filesystem::path& path);

/// Embedding cache: magic "EMBRVECS", u32 version, u64 count, u64 d, then per
/// entry u32 id length, id bytes, d little-endian f64.
std::string serialize_embeddings(const std::vector<EmbeddedRecord>& embeddings);
std::vector<EmbeddedRecord> deserialize_embeddings(std::string_view bytes);

}  // namespace emberish
