#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsdb {

struct Chunk;

struct EmbeddingVector {
  std::vector<double> components;

  std::size_t dim() const { return components.size(); }
  bool is_zero() const;
  bool operator==(const EmbeddingVector&) const = default;
};

enum class EmbedderKind { hashing_default, external_service };

std::string_view embedder_kind_name(EmbedderKind kind) noexcept;
std::optional<EmbedderKind> parse_embedder_kind(std::string_view name) noexcept;

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::hashing_default;
  std::size_t dim = 256;
  std::string endpoint;  // external_service only
  std::string api_key;
  int timeout_ms = 10000;

  bool same_space(const EmbedderSpec& other) const {
    return kind == other.kind && dim == other.dim && endpoint == other.endpoint;
  }
};

/// Bucket a token hashes to under the default embedder (FNV-1a 64 mod dim).
std::size_t hash_bucket(std::string_view token, std::size_t dim);

/// hashing_default: tokens hashed into `dim` buckets, term-frequency counts,
/// L2-normalized (empty text gives the zero vector).
/// external_service: POST {"text", "dim"} to the endpoint, expects {"vector": [...]}.
/// Throws EmbedderUnavailable or DimensionMismatch.
EmbeddingVector embed_text(std::string_view text, const EmbedderSpec& spec);

class Embedder {
 public:
  explicit Embedder(EmbedderSpec spec) : spec_(std::move(spec)) {}
  EmbeddingVector embed(std::string_view text) const { return embed_text(text, spec_); }
  const EmbedderSpec& spec() const { return spec_; }

 private:
  EmbedderSpec spec_;
};

struct Neighbor {
  std::string chunk_id;
  double distance = 0.0;
};

double l2_distance(std::span<const double> a, std::span<const double> b);

/// 1 / (1 + distance): maps [0, inf) onto (0, 1], strictly decreasing.
double similarity(double distance);

/// Search interface; exactness is the contract of every implementation here.
class VectorIndex {
 public:
  virtual ~VectorIndex() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t size() const = 0;
  /// k smallest L2 distances, ascending, ties by chunk id ascending.
  virtual std::vector<Neighbor> knn(const EmbeddingVector& query, std::size_t k) const = 0;
  virtual std::optional<double> distance_to(std::string_view chunk_id,
                                            const EmbeddingVector& query) const = 0;
};

/// Exhaustive L2 scan over every stored vector.
class FlatL2Index final : public VectorIndex {
 public:
  static constexpr int kFormatVersion = 1;

  explicit FlatL2Index(EmbedderSpec spec = {});

  /// Throws DimensionMismatch or DuplicateChunkId.
  void add(std::string chunk_id, EmbeddingVector vector);

  std::size_t dim() const override { return spec_.dim; }
  std::size_t size() const override { return ids_.size(); }
  std::vector<Neighbor> knn(const EmbeddingVector& query, std::size_t k) const override;
  std::optional<double> distance_to(std::string_view chunk_id,
                                    const EmbeddingVector& query) const override;

  const EmbedderSpec& spec() const { return spec_; }
  const std::vector<std::string>& ids() const { return ids_; }

  void save(std::ostream& out) const;
  static FlatL2Index load(std::istream& in);

 private:
  EmbedderSpec spec_;
  std::vector<std::string> ids_;
  std::vector<double> data_;  // row-major, ids_.size() x dim
  std::map<std::string, std::size_t, std::less<>> row_of_;
};

/// Embeds every chunk text with `embedder`.
FlatL2Index build_vector_index(std::span<const Chunk> chunks, const Embedder& embedder);

} // namespace lsdb
