#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "lsdb/docmodel.hpp"
#include "lsdb/extraction.hpp"

namespace lsdb {

/// Every record family of a store, in canonical order.
struct StoreRecords {
  std::vector<Article> articles;  // by article_id
  std::vector<Chunk> chunks;      // by article_id, then module order, then section order
  std::vector<Entity> entities;   // grouped like chunks
  std::vector<KGNode> nodes;
  std::vector<KGEdge> edges;
};

struct IndexState {
  bool stale = true;
  int format_version = 0;
  std::string file;
};

struct StoreManifest {
  static constexpr int kVersion = 1;

  int version = kVersion;
  std::size_t article_count = 0;
  std::size_t chunk_count = 0;
  std::size_t entity_count = 0;
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::map<std::string, IndexState> indexes;  // "lexical", "semantic", "relational"
  std::map<std::string, std::string> checksums;  // record file -> sha256
};

struct Histogram {
  std::size_t bin_width = 1;
  std::vector<std::size_t> counts;  // counts[i] covers [i*w, (i+1)*w)
};

struct CategoryTotals {
  std::size_t tokens = 0;
  std::size_t sentences = 0;
  std::size_t quantities = 0;
};

struct CorpusStats {
  std::size_t documents = 0;
  std::map<Category, CategoryTotals> per_category;
  CategoryTotals total;
  Histogram token_histogram;
  Histogram sentence_histogram;
  Histogram quantity_histogram;
};

struct HistogramBins {
  std::size_t tokens = 50;
  std::size_t sentences = 10;
  std::size_t quantities = 5;
};

CorpusStats compute_corpus_stats(const StoreRecords& records, const HistogramBins& bins = {});

/// Checks references, counters and ids over a record set.
ValidationReport check_integrity(const StoreRecords& records);

inline constexpr std::string_view kIndexLexical = "lexical";
inline constexpr std::string_view kIndexSemantic = "semantic";
inline constexpr std::string_view kIndexRelational = "relational";

/// Directory-backed store: manifest.json plus one JSONL file per record family.
/// Writers are serialized and publish a complete new snapshot; readers get an
/// immutable snapshot and never observe a partial write.
class Store {
 public:
  /// Opens (creating if needed) the store under `dir`.
  static Store open(const std::filesystem::path& dir);

  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;
  ~Store();

  const std::filesystem::path& dir() const;

  /// Validates, chunks, extracts baseline entities (unless `entities` are
  /// supplied, which are then flagged external) and replaces every record for
  /// the article. Throws SchemaInvalid or StorageFailure.
  std::string upsert_article(const Article& article,
                             const std::optional<std::vector<Entity>>& entities = std::nullopt);

  bool remove_article(std::string_view article_id);

  /// Throws UnknownArticle.
  Article get_article(std::string_view article_id) const;
  bool has_article(std::string_view article_id) const;
  std::vector<Chunk> get_chunks(std::string_view article_id,
                                std::optional<Category> category = std::nullopt) const;

  std::shared_ptr<const StoreRecords> snapshot() const;
  StoreManifest manifest() const;

  ValidationReport integrity_check() const;
  CorpusStats corpus_stats(const HistogramBins& bins = {}) const;

  /// Records a rebuilt index file and clears its staleness flag.
  void mark_index_built(std::string_view index, int format_version, std::string file);
  bool any_index_stale() const;

 private:
  struct State;
  explicit Store(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

/// Exclusive advisory lock file held by a long-running server; writers refuse
/// to run while it exists.
class StoreLock {
 public:
  explicit StoreLock(const std::filesystem::path& store_dir);  // throws StoreLocked
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;
  ~StoreLock();

  static bool held(const std::filesystem::path& store_dir);
  static std::filesystem::path path_for(const std::filesystem::path& store_dir);

 private:
  std::filesystem::path path_;
};

} // namespace lsdb
