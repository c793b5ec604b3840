#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lsdb/docmodel.hpp"
#include "lsdb/extraction.hpp"
#include "lsdb/fusion.hpp"

namespace lsdb {

enum class QueryCategory { data_retrieval, recommendation, informational, integrative_summary, open_ended };

std::string_view query_category_name(QueryCategory c) noexcept;  // "data-retrieval", ...
std::optional<QueryCategory> parse_query_category(std::string_view name) noexcept;

struct EvalQuery {
  std::string id;
  std::string query;
  QueryCategory category = QueryCategory::data_retrieval;
  std::vector<std::string> gold_articles;
  std::vector<std::string> gold_chunks;
  std::string filter;
};

/// One EvalQuery per JSONL line: {"id", "query", "category", "gold_articles",
/// "gold_chunks", "filter"}. Throws InvalidArgument naming the bad line.
std::vector<EvalQuery> parse_query_set(std::string_view jsonl);

enum class HitLabel { first_hit, substitute, failed };

std::string_view hit_label_name(HitLabel label) noexcept;
std::optional<HitLabel> parse_hit_label(std::string_view name) noexcept;

inline constexpr std::size_t kDefaultHitDepth = 10;

/// Article-level: first_hit if a gold article is rank 1, substitute if one is
/// within ranks 2..N, failed otherwise.
HitLabel classify_hits(const std::vector<std::string>& ranked_articles,
                       const std::vector<std::string>& gold, std::size_t n = kDefaultHitDepth);
HitLabel classify_hits(const RetrievalResult& result, const std::vector<std::string>& gold,
                       std::size_t n = kDefaultHitDepth);

struct HitRates {
  double first_hit = 0.0;
  double substitute = 0.0;
  double failed = 0.0;
  std::size_t queries = 0;
};

struct HitReport {
  std::vector<std::pair<std::string, HitLabel>> labels;  // (query id, label)
  HitRates rates;
};

HitRates aggregate_hits(const std::vector<HitLabel>& labels);

/// For each N, how many gold chunks appear among the top-N fused chunks.
std::vector<std::size_t> substantive_matches(const RetrievalResult& result,
                                             const std::set<std::string>& gold_chunks,
                                             const std::vector<std::size_t>& n_list);

struct PrecisionRecall {
  double precision = 1.0;
  double recall = 1.0;
};

/// Quantities of the section bodies and evidence of an article.
std::vector<Quantity> article_quantities(const Article& article);

PrecisionRecall extraction_pr(std::string_view source_text, const Article& structured,
                              double rel_tol = 1e-9);
PrecisionRecall extraction_pr(std::string_view source_text, std::string_view structured_text,
                              double rel_tol = 1e-9);

/// Runs one query under the given weights.
using RetrievalRunner = std::function<RetrievalResult(const EvalQuery& query, const Weights& weights)>;

struct EvalRun {
  HitReport hits;
  std::vector<std::size_t> substantive_n;
  std::vector<std::size_t> substantive_counts;  // summed over queries
};

EvalRun evaluate(const std::vector<EvalQuery>& queries, const RetrievalRunner& runner,
                 const Weights& weights, std::size_t hit_depth = kDefaultHitDepth,
                 const std::vector<std::size_t>& n_list = {1, 5, 10, 20, 50, 100});

struct SweepRow {
  Weights weights;
  HitRates rates;
  std::vector<std::size_t> substantive_counts;
};

std::vector<SweepRow> weight_sweep(const std::vector<EvalQuery>& queries,
                                   const std::vector<Weights>& grid, const RetrievalRunner& runner,
                                   std::size_t hit_depth = kDefaultHitDepth,
                                   const std::vector<std::size_t>& n_list = {1, 5, 10, 20, 50, 100});

/// CSV: w_semantic,w_lexical,w_relational,first_hit,substitute,failed,queries,match@N...
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::vector<std::size_t>& n_list);

} // namespace lsdb
