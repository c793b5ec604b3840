#include "lsdb/vecindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "lsdb/docmodel.hpp"
#include "lsdb/error.hpp"
#include "lsdb/lexindex.hpp"
#include "lsdb/llm.hpp"

namespace lsdb {

bool EmbeddingVector::is_zero() const {
  return std::all_of(components.begin(), components.end(), [](double v) { return v == 0.0; });
}

std::string_view embedder_kind_name(EmbedderKind kind) noexcept {
  return kind == EmbedderKind::hashing_default ? "hashing_default" : "external_service";
}

std::optional<EmbedderKind> parse_embedder_kind(std::string_view name) noexcept {
  if (name == "hashing_default") return EmbedderKind::hashing_default;
  if (name == "external_service") return EmbedderKind::external_service;
  return std::nullopt;
}

std::size_t hash_bucket(std::string_view token, std::size_t dim) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h % dim);
}

EmbeddingVector embed_text(std::string_view text, const EmbedderSpec& spec) {
  if (spec.dim == 0) throw Error(ErrorCode::DimensionMismatch, "embedding dimension must be positive");
  EmbeddingVector v;
  if (spec.kind == EmbedderKind::hashing_default) {
    v.components.assign(spec.dim, 0.0);
    for (const auto& tok : tokenize(text)) v.components[hash_bucket(tok, spec.dim)] += 1.0;
    double norm = 0.0;
    for (double c : v.components) norm += c * c;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& c : v.components) c /= norm;
    }
    return v;
  }

  if (spec.endpoint.empty()) throw Error(ErrorCode::EmbedderUnavailable, "external embedder has no endpoint");
  nlohmann::json body = {{"text", std::string(text)}, {"dim", spec.dim}};
  std::string reply;
  try {
    reply = http::post_json(spec.endpoint, body.dump(), spec.api_key, spec.timeout_ms);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::EmbedderUnavailable, e.what());
  }
  try {
    auto j = nlohmann::json::parse(reply);
    v.components = j.at("vector").get<std::vector<double>>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::EmbedderUnavailable, std::string("bad embedder reply: ") + e.what());
  }
  if (v.dim() != spec.dim) {
    throw Error(ErrorCode::DimensionMismatch, "embedder returned " + std::to_string(v.dim()) +
                                                  " components, expected " + std::to_string(spec.dim));
  }
  return v;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "vectors differ in dimension");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double similarity(double distance) { return 1.0 / (1.0 + distance); }

FlatL2Index::FlatL2Index(EmbedderSpec spec) : spec_(std::move(spec)) {
  if (spec_.dim == 0) throw Error(ErrorCode::DimensionMismatch, "index dimension must be positive");
}

void FlatL2Index::add(std::string chunk_id, EmbeddingVector vector) {
  if (vector.dim() != spec_.dim) {
    throw Error(ErrorCode::DimensionMismatch, "vector for " + chunk_id + " has dimension " +
                                                  std::to_string(vector.dim()) + ", index has " +
                                                  std::to_string(spec_.dim));
  }
  if (row_of_.count(chunk_id)) throw Error(ErrorCode::DuplicateChunkId, "duplicate chunk id " + chunk_id);
  row_of_.emplace(chunk_id, ids_.size());
  ids_.push_back(std::move(chunk_id));
  data_.insert(data_.end(), vector.components.begin(), vector.components.end());
}

std::vector<Neighbor> FlatL2Index::knn(const EmbeddingVector& query, std::size_t k) const {
  if (query.dim() != spec_.dim) {
    throw Error(ErrorCode::DimensionMismatch, "query has dimension " + std::to_string(query.dim()) +
                                                  ", index has " + std::to_string(spec_.dim));
  }
  std::vector<Neighbor> all;
  all.reserve(ids_.size());
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    std::span<const double> row(data_.data() + r * spec_.dim, spec_.dim);
    all.push_back(Neighbor{ids_[r], l2_distance(row, query.components)});
  }
  auto less = [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.chunk_id < b.chunk_id;
  };
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
  all.resize(k);
  return all;
}

std::optional<double> FlatL2Index::distance_to(std::string_view chunk_id, const EmbeddingVector& query) const {
  auto it = row_of_.find(chunk_id);
  if (it == row_of_.end()) return std::nullopt;
  if (query.dim() != spec_.dim) throw Error(ErrorCode::DimensionMismatch, "query dimension mismatch");
  std::span<const double> row(data_.data() + it->second * spec_.dim, spec_.dim);
  return l2_distance(row, query.components);
}

// Text format: header line, spec line, then one "V <id> <c0> <c1> ..." line
// per vector with components printed at full precision.
void FlatL2Index::save(std::ostream& out) const {
  nlohmann::json spec = {{"kind", embedder_kind_name(spec_.kind)},
                         {"dim", spec_.dim},
                         {"endpoint", spec_.endpoint}};
  out << "lsdb-semantic " << kFormatVersion << "\n";
  out << "spec " << spec.dump() << "\n";
  out << "count " << ids_.size() << "\n";
  char buf[32];
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    out << "V " << ids_[r];
    for (std::size_t c = 0; c < spec_.dim; ++c) {
      std::snprintf(buf, sizeof buf, " %.17g", data_[r * spec_.dim + c]);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::StorageFailure, "failed writing semantic index");
}

FlatL2Index FlatL2Index::load(std::istream& in) {
  auto fail = [](const std::string& why) { return Error(ErrorCode::StorageFailure, "semantic index: " + why); };
  std::string line;
  if (!std::getline(in, line)) throw fail("empty file");
  {
    std::istringstream hs(line);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != "lsdb-semantic") throw fail("bad header");
    if (version != kFormatVersion) throw fail("unsupported format version " + std::to_string(version));
  }
  if (!std::getline(in, line) || line.rfind("spec ", 0) != 0) throw fail("missing spec line");
  EmbedderSpec spec;
  try {
    auto j = nlohmann::json::parse(line.substr(5));
    auto kind = parse_embedder_kind(j.at("kind").get<std::string>());
    if (!kind) throw fail("unknown embedder kind");
    spec.kind = *kind;
    spec.dim = j.at("dim").get<std::size_t>();
    spec.endpoint = j.value("endpoint", "");
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw fail(e.what());
  }
  if (!std::getline(in, line) || line.rfind("count ", 0) != 0) throw fail("missing count line");
  const std::size_t count = std::stoul(line.substr(6));
  FlatL2Index index(spec);
  for (std::size_t r = 0; r < count; ++r) {
    if (!std::getline(in, line)) throw fail("truncated");
    std::istringstream ls(line);
    std::string tag;
    std::string id;
    ls >> tag >> id;
    if (tag != "V" || id.empty()) throw fail("bad vector line");
    EmbeddingVector v;
    v.components.reserve(spec.dim);
    std::string num;
    while (ls >> num) v.components.push_back(std::strtod(num.c_str(), nullptr));
    index.add(std::move(id), std::move(v));
  }
  return index;
}

FlatL2Index build_vector_index(std::span<const Chunk> chunks, const Embedder& embedder) {
  FlatL2Index index(embedder.spec());
  for (const auto& c : chunks) index.add(c.chunk_id, embedder.embed(c.text));
  return index;
}

} // namespace lsdb
