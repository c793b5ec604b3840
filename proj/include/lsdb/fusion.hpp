#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lsdb/docmodel.hpp"
#include "lsdb/lexindex.hpp"
#include "lsdb/querykit.hpp"
#include "lsdb/valindex.hpp"
#include "lsdb/vecindex.hpp"

namespace lsdb {

struct Weights {
  double semantic = 0.6;
  double lexical = 0.3;
  double relational = 0.1;

  /// Throws InvalidWeights unless each weight >= 0 and they sum to 1 within 1e-9.
  void validate() const;
  bool operator==(const Weights&) const = default;
};

struct AxisScores {
  double semantic = 0.0;
  double lexical = 0.0;
  double relational = 0.0;

  bool operator==(const AxisScores&) const = default;
};

struct ScoredChunk {
  std::string chunk_id;
  std::string article_id;
  Category category = Category::Preparation;
  AxisScores raw;
  AxisScores normalized;
  double fused = 0.0;
};

using ScoreMap = std::map<std::string, double, std::less<>>;

struct AxisMaps {
  ScoreMap semantic;
  ScoreMap lexical;
  ScoreMap relational;
};

/// Read-only view over the three built indexes.
struct SearchIndexes {
  const InvertedIndex* lexical = nullptr;
  const VectorIndex* semantic = nullptr;
  const ValueIndex* relational = nullptr;
  bool stale = false;
};

struct RetrievalOptions {
  Weights weights;
  Bm25Params bm25;
  std::size_t pool_size = 100;
  std::size_t cap = 3;
  double tau = 0.5;
  // Hard filters: only chunks satisfying every filter stay in the pool.
  std::vector<Condition> filters;
  // Evaluate the three axes on separate threads.
  bool parallel = false;
};

/// Raw per-axis scores over the candidate pool: the union of each axis's top
/// `pool_size` plus every chunk matching a condition. Every pooled chunk gets
/// its exact score on all three axes. Throws StaleIndex.
AxisMaps axis_scores(const CompositeQuery& query, const SearchIndexes& indexes,
                     std::size_t pool_size, const Bm25Params& bm25 = {}, bool parallel = false,
                     std::span<const Condition> extra_conditions = {});

/// Min-max normalization in [0, 1]. A constant axis maps to all 1 when the
/// common value is positive, else all 0.
ScoreMap normalize_scores(const ScoreMap& raw);

/// Weighted sum per chunk, descending fused score then chunk id.
/// `raw` is optional and only copied into the output for provenance.
std::vector<ScoredChunk> fuse(const AxisMaps& normalized, const Weights& weights,
                              const AxisMaps* raw = nullptr);

struct RankedArticle {
  std::string article_id;
  double score = 0.0;      // max fused chunk score
  double score_sum = 0.0;  // tie-break
  std::vector<ScoredChunk> chunks;  // fused order
};

/// Article score = max chunk score; ties by sum of chunk scores (desc), then id.
std::vector<RankedArticle> rank_articles(const std::vector<ScoredChunk>& ranked);

/// Module categories a query asks for through its keywords.
std::set<Category> preferred_categories(const std::vector<std::string>& keywords);

struct ArticleResult {
  std::string article_id;
  std::size_t rank = 0;  // 1-based
  double score = 0.0;
  std::vector<ScoredChunk> selected;
};

struct RetrievalResult {
  std::string query;
  std::vector<ArticleResult> articles;
  std::vector<ScoredChunk> ranked_chunks;  // full fused pool
  double top_fused = 0.0;
  Weights weights;
  std::size_t pool_size = 0;
  std::vector<std::string> diagnostics;
};

/// Keeps chunks with fused >= tau * (global top fused), at most `cap` per
/// article, preferred categories first. Articles left with no chunk are dropped.
RetrievalResult content_filter(const std::vector<RankedArticle>& ranked, const CompositeQuery& query,
                               std::size_t cap = 3, double tau = 0.5);

/// Whole composite retrieval: axes, hard filters, normalize, fuse, rank, filter.
RetrievalResult retrieve(const CompositeQuery& query, const SearchIndexes& indexes,
                         const RetrievalOptions& options);

} // namespace lsdb
