#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lsdb/lexicon.hpp"
#include "lsdb/llm.hpp"
#include "lsdb/valindex.hpp"
#include "lsdb/vecindex.hpp"

namespace lsdb {

struct CompositeQuery {
  std::string raw;
  std::string cleaned;
  std::string rewritten;
  std::string residual;
  std::vector<std::string> keywords;
  std::vector<Condition> conditions;
  EmbeddingVector embedding;
  std::vector<std::string> warnings;
};

/// Trims, collapses whitespace runs and drops control characters. Case is
/// preserved. Throws EmptyQuery when nothing is left.
std::string clean_query(std::string_view raw);

struct ConditionParse {
  std::vector<Condition> conditions;
  std::string residual;
};

/// Recognizes `<attribute> [< | <= | = | >= | >] <number> [unit]` and
/// `<attribute> between <a> [unit] and <b> [unit]`, where the attribute is a
/// phrase from `synonyms`. Matched spans are removed from the residual;
/// unparseable fragments stay in it.
ConditionParse parse_conditions(std::string_view cleaned,
                                const AttributeSynonyms& synonyms = default_attribute_lexicon());

/// Tokens of the residual minus stopwords, de-duplicated in first-seen order.
std::vector<std::string> extract_keywords(std::string_view residual,
                                          const StopwordSet& stopwords = default_stopwords());

class Rewriter {
 public:
  virtual ~Rewriter() = default;
  /// Throws RewriterUnavailable on backend failure.
  virtual std::string rewrite(std::string_view cleaned) = 0;
};

class IdentityRewriter final : public Rewriter {
 public:
  std::string rewrite(std::string_view cleaned) override { return std::string(cleaned); }
};

class LlmRewriter final : public Rewriter {
 public:
  explicit LlmRewriter(std::shared_ptr<LlmProvider> provider) : provider_(std::move(provider)) {}
  std::string rewrite(std::string_view cleaned) override;

 private:
  std::shared_ptr<LlmProvider> provider_;
};

struct QueryResources {
  const AttributeSynonyms* synonyms = &default_attribute_lexicon();
  const StopwordSet* stopwords = &default_stopwords();
};

/// clean -> rewrite -> parse_conditions -> extract_keywords -> embed(rewritten).
/// A failing rewriter falls back to the cleaned text and records a warning.
CompositeQuery preprocess(std::string_view raw, Rewriter& rewriter, const Embedder& embedder,
                          const QueryResources& resources = {});

/// Parses a filter expression (the condition grammar with no free text, e.g.
/// "thickness<100nm speed=500rpm"). Throws InvalidArgument if any text is left.
std::vector<Condition> parse_filter(std::string_view filter,
                                    const AttributeSynonyms& synonyms = default_attribute_lexicon());

} // namespace lsdb
