#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lsdb/evalharness.hpp"
#include "lsdb/experience.hpp"
#include "lsdb/fusion.hpp"
#include "lsdb/json_io.hpp"
#include "lsdb/lexindex.hpp"
#include "lsdb/ragkit.hpp"
#include "lsdb/store.hpp"
#include "lsdb/valindex.hpp"
#include "lsdb/vecindex.hpp"

namespace lsdb {

/// Single configuration surface. Precedence: flags > environment > file > defaults.
struct AppConfig {
  std::filesystem::path store = "lsdb_store";
  Weights weights;
  Bm25Params bm25;
  EmbedderSpec embedder;
  GeneratorSpec generator;
  std::size_t pool_size = 100;
  std::size_t cap = 3;
  double tau = 0.5;
  std::size_t budget = kDefaultContextBudget;
  ReviewMode review_mode = ReviewMode::auto_accept;
  std::size_t batch_size = 20;
  std::size_t max_iterations = 10;
  std::size_t distill_chunks = 200;
  std::size_t hit_depth = kDefaultHitDepth;
  bool parallel = false;
  bool rewrite = false;  // rewrite queries through the generator provider
  std::string prompt_template;  // path; empty = built-in

  /// Throws InvalidConfig naming the offending key.
  void validate() const;
};

/// Environment variable names.
inline constexpr const char* kEnvConfigPath = "LSDB_CONFIG";
inline constexpr const char* kEnvProviderEndpoint = "LSDB_PROVIDER_ENDPOINT";
inline constexpr const char* kEnvProviderKey = "LSDB_PROVIDER_KEY";
inline constexpr const char* kEnvProviderModel = "LSDB_PROVIDER_MODEL";
inline constexpr const char* kEnvEmbedderEndpoint = "LSDB_EMBEDDER_ENDPOINT";
inline constexpr const char* kEnvEmbedderKey = "LSDB_EMBEDDER_KEY";

/// Applies a JSON config object over `config`. Throws InvalidConfig.
void apply_config_json(AppConfig& config, const Json& j);
AppConfig load_config_file(const std::filesystem::path& path, AppConfig base = {});
void apply_environment(AppConfig& config);

inline constexpr const char* kLexicalIndexFile = "lexical.idx";
inline constexpr const char* kSemanticIndexFile = "semantic.idx";

/// Builds and persists all three indexes, clearing staleness flags.
struct IndexBuildSummary {
  std::size_t chunks = 0;
  std::size_t terms = 0;
  std::size_t vectors = 0;
  std::size_t attributes = 0;
};
IndexBuildSummary build_indexes(Store& store, const EmbedderSpec& embedder);

/// A store snapshot with its indexes loaded, ready for concurrent queries.
class Engine {
 public:
  /// Loads the persisted indexes. A stale or missing index is remembered and
  /// reported as StaleIndex by query().
  Engine(std::shared_ptr<const StoreRecords> records, StoreManifest manifest,
         const std::filesystem::path& store_dir, AppConfig config);

  static Engine open(const AppConfig& config);

  const AppConfig& config() const { return config_; }
  bool stale() const { return stale_; }
  const std::string& stale_reason() const { return stale_reason_; }
  const StoreRecords& records() const { return *records_; }
  const Chunk* chunk(std::string_view chunk_id) const;

  /// Preprocesses `text`, applies `filter` (condition grammar) as hard filters
  /// and retrieves. Throws StaleIndex, EmptyQuery, InvalidArgument.
  RetrievalResult query(const std::string& text, const std::string& filter = {},
                        const std::optional<Weights>& weights = std::nullopt) const;
  CompositeQuery preprocess_query(const std::string& text) const;

  /// JSON payloads shared by the CLI (--format json) and HTTP server.
  Json query_payload(const std::string& text, const std::string& filter = {}) const;
  Json ask_payload(const std::string& text, const std::string& filter = {}) const;

 private:
  std::shared_ptr<const StoreRecords> records_;
  AppConfig config_;
  Embedder embedder_;
  InvertedIndex lexical_;
  FlatL2Index semantic_;
  ValueIndex relational_;
  std::map<std::string, const Chunk*, std::less<>> chunk_by_id_;
  bool stale_ = true;
  std::string stale_reason_;

  struct Run {
    CompositeQuery query;
    std::vector<Condition> filters;
    RetrievalResult result;
  };
  Run run(const std::string& text, const std::string& filter, const std::optional<Weights>& weights) const;
};

/// Canonical serialization of payloads: 2-space indent plus trailing newline.
std::string dump_payload(const Json& payload);

} // namespace lsdb
