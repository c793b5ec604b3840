#include "lsdb/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>

#include "lsdb/error.hpp"

namespace lsdb {

void Weights::validate() const {
  for (double w : {semantic, lexical, relational}) {
    if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::InvalidWeights, "weights must be finite and >= 0");
  }
  if (std::fabs(semantic + lexical + relational - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidWeights, "weights must sum to 1");
  }
}

namespace {

struct TopLists {
  std::vector<std::string> semantic;
  std::vector<std::string> lexical;
};

std::vector<std::string> lexical_top(const InvertedIndex* index, const std::vector<std::string>& terms,
                                     std::size_t k, const Bm25Params& bm25) {
  std::vector<std::string> ids;
  if (index == nullptr || terms.empty()) return ids;
  for (auto& hit : index->search(terms, k, bm25)) ids.push_back(std::move(hit.chunk_id));
  return ids;
}

std::vector<std::string> semantic_top(const VectorIndex* index, const EmbeddingVector& q, std::size_t k) {
  std::vector<std::string> ids;
  if (index == nullptr || index->size() == 0 || q.dim() != index->dim()) return ids;
  for (auto& n : index->knn(q, k)) ids.push_back(std::move(n.chunk_id));
  return ids;
}

} // namespace

AxisMaps axis_scores(const CompositeQuery& query, const SearchIndexes& indexes, std::size_t pool_size,
                     const Bm25Params& bm25, bool parallel, std::span<const Condition> extra_conditions) {
  if (indexes.stale) throw Error(ErrorCode::StaleIndex, "indexes are stale; rebuild them first");
  if (indexes.semantic && indexes.semantic->size() > 0 && query.embedding.dim() != indexes.semantic->dim()) {
    throw Error(ErrorCode::DimensionMismatch, "query embedding dimension differs from the semantic index");
  }

  std::vector<Condition> conditions(query.conditions.begin(), query.conditions.end());
  conditions.insert(conditions.end(), extra_conditions.begin(), extra_conditions.end());

  TopLists top;
  std::vector<std::set<std::string>> matches(conditions.size());
  auto run_relational = [&]() {
    if (indexes.relational == nullptr) return;
    for (std::size_t i = 0; i < conditions.size(); ++i) matches[i] = indexes.relational->match(conditions[i]);
  };
  if (parallel) {
    auto sem = std::async(std::launch::async, [&] { return semantic_top(indexes.semantic, query.embedding, pool_size); });
    auto lex = std::async(std::launch::async, [&] { return lexical_top(indexes.lexical, query.keywords, pool_size, bm25); });
    auto rel = std::async(std::launch::async, run_relational);
    top.semantic = sem.get();
    top.lexical = lex.get();
    rel.get();
  } else {
    top.semantic = semantic_top(indexes.semantic, query.embedding, pool_size);
    top.lexical = lexical_top(indexes.lexical, query.keywords, pool_size, bm25);
    run_relational();
  }

  std::set<std::string> pool(top.semantic.begin(), top.semantic.end());
  pool.insert(top.lexical.begin(), top.lexical.end());
  for (const auto& m : matches) pool.insert(m.begin(), m.end());

  AxisMaps out;
  for (const auto& id : pool) {
    double sem = 0.0;
    if (indexes.semantic) {
      if (auto d = indexes.semantic->distance_to(id, query.embedding)) sem = similarity(*d);
    }
    double lex = 0.0;
    if (indexes.lexical && !query.keywords.empty()) lex = indexes.lexical->score(id, query.keywords, bm25);
    double rel = 0.0;
    if (!conditions.empty()) {
      std::size_t hit = 0;
      for (const auto& m : matches) hit += m.count(id);
      rel = static_cast<double>(hit) / static_cast<double>(conditions.size());
    }
    out.semantic.emplace(id, sem);
    out.lexical.emplace(id, lex);
    out.relational.emplace(id, rel);
  }
  return out;
}

ScoreMap normalize_scores(const ScoreMap& raw) {
  ScoreMap out;
  if (raw.empty()) return out;
  auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end(),
                                            [](const auto& a, const auto& b) { return a.second < b.second; });
  const double lo = lo_it->second;
  const double hi = hi_it->second;
  for (const auto& [id, v] : raw) {
    if (hi == lo) {
      out.emplace(id, lo > 0.0 ? 1.0 : 0.0);
    } else {
      out.emplace(id, (v - lo) / (hi - lo));
    }
  }
  return out;
}

std::vector<ScoredChunk> fuse(const AxisMaps& normalized, const Weights& weights, const AxisMaps* raw) {
  weights.validate();
  std::set<std::string> ids;
  for (const ScoreMap* m : {&normalized.semantic, &normalized.lexical, &normalized.relational}) {
    for (const auto& [id, v] : *m) ids.insert(id);
  }
  auto get = [](const ScoreMap& m, const std::string& id) {
    auto it = m.find(id);
    return it == m.end() ? 0.0 : it->second;
  };
  std::vector<ScoredChunk> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    ScoredChunk c;
    c.chunk_id = id;
    if (auto key = parse_chunk_id(id)) {
      c.article_id = key->article_id;
      c.category = key->category;
    } else {
      c.article_id = id.substr(0, id.find('#'));
    }
    c.normalized = {get(normalized.semantic, id), get(normalized.lexical, id), get(normalized.relational, id)};
    if (raw) c.raw = {get(raw->semantic, id), get(raw->lexical, id), get(raw->relational, id)};
    c.fused = weights.semantic * c.normalized.semantic + weights.lexical * c.normalized.lexical +
              weights.relational * c.normalized.relational;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
    if (a.fused != b.fused) return a.fused > b.fused;
    return a.chunk_id < b.chunk_id;
  });
  return out;
}

std::vector<RankedArticle> rank_articles(const std::vector<ScoredChunk>& ranked) {
  std::map<std::string, RankedArticle> by_id;
  for (const auto& c : ranked) {
    auto& a = by_id[c.article_id];
    if (a.chunks.empty()) {
      a.article_id = c.article_id;
      a.score = c.fused;
    }
    a.score = std::max(a.score, c.fused);
    a.score_sum += c.fused;
    a.chunks.push_back(c);
  }
  std::vector<RankedArticle> out;
  out.reserve(by_id.size());
  for (auto& [id, a] : by_id) out.push_back(std::move(a));
  std::sort(out.begin(), out.end(), [](const RankedArticle& a, const RankedArticle& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.score_sum != b.score_sum) return a.score_sum > b.score_sum;
    return a.article_id < b.article_id;
  });
  return out;
}

std::set<Category> preferred_categories(const std::vector<std::string>& keywords) {
  static const std::map<std::string, Category> table = {
      {"fabricate", Category::Preparation},        {"synthesis", Category::Preparation},
      {"preparation", Category::Preparation},      {"milling", Category::Preparation},
      {"measure", Category::Characterization},     {"characterization", Category::Characterization},
      {"conductivity", Category::Characterization}, {"mechanism", Category::Mechanism},
      {"why", Category::Mechanism},                {"model", Category::Modeling},
      {"simulation", Category::Modeling},          {"theory", Category::Modeling},
  };
  std::set<Category> out;
  for (const auto& k : keywords) {
    auto it = table.find(k);
    if (it != table.end()) out.insert(it->second);
  }
  return out;
}

RetrievalResult content_filter(const std::vector<RankedArticle>& ranked, const CompositeQuery& query,
                               std::size_t cap, double tau) {
  if (cap < 1) throw Error(ErrorCode::InvalidArgument, "cap must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tau must be in (0, 1]");
  RetrievalResult result;
  result.query = query.rewritten.empty() ? query.cleaned : query.rewritten;
  for (const auto& a : ranked) result.top_fused = std::max(result.top_fused, a.score);
  const double threshold = tau * result.top_fused;

  // The preference table reads every token of the query, including words the
  // stopword list removes ("why").
  std::vector<std::string> words = tokenize(result.query);
  words.insert(words.end(), query.keywords.begin(), query.keywords.end());
  const auto preferred = preferred_categories(words);

  for (const auto& a : ranked) {
    std::vector<ScoredChunk> passing;
    for (const auto& c : a.chunks) {
      if (c.fused >= threshold) passing.push_back(c);
    }
    std::stable_sort(passing.begin(), passing.end(), [&](const ScoredChunk& x, const ScoredChunk& y) {
      const bool px = preferred.count(x.category) > 0;
      const bool py = preferred.count(y.category) > 0;
      if (px != py) return px;
      if (x.fused != y.fused) return x.fused > y.fused;
      return x.chunk_id < y.chunk_id;
    });
    if (passing.size() > cap) passing.resize(cap);
    if (passing.empty()) continue;
    ArticleResult r;
    r.article_id = a.article_id;
    r.rank = result.articles.size() + 1;
    r.score = a.score;
    r.selected = std::move(passing);
    result.articles.push_back(std::move(r));
  }
  return result;
}

RetrievalResult retrieve(const CompositeQuery& query, const SearchIndexes& indexes,
                         const RetrievalOptions& options) {
  options.weights.validate();
  options.bm25.validate();
  if (options.pool_size < 1) throw Error(ErrorCode::InvalidArgument, "pool_size must be >= 1");

  AxisMaps raw = axis_scores(query, indexes, options.pool_size, options.bm25, options.parallel, options.filters);
  std::vector<std::string> diagnostics = query.warnings;
  auto note_unknown = [&](const Condition& c) {
    if (indexes.relational && !indexes.relational->has_attribute(c.attribute)) {
      diagnostics.push_back("no indexed values for attribute '" + c.attribute + "'; condition matches nothing");
    }
  };
  for (const auto& c : query.conditions) note_unknown(c);
  for (const auto& c : options.filters) note_unknown(c);

  if (!options.filters.empty()) {
    std::set<std::string> keep;
    for (const auto& [id, v] : raw.semantic) keep.insert(id);
    for (const auto& f : options.filters) {
      const auto m = indexes.relational ? indexes.relational->match(f) : std::set<std::string>{};
      std::set<std::string> next;
      std::set_intersection(keep.begin(), keep.end(), m.begin(), m.end(), std::inserter(next, next.end()));
      keep = std::move(next);
    }
    for (ScoreMap* m : {&raw.semantic, &raw.lexical, &raw.relational}) {
      for (auto it = m->begin(); it != m->end();) {
        it = keep.count(it->first) ? std::next(it) : m->erase(it);
      }
    }
  }

  AxisMaps norm{normalize_scores(raw.semantic), normalize_scores(raw.lexical), normalize_scores(raw.relational)};
  auto fused = fuse(norm, options.weights, &raw);
  auto articles = rank_articles(fused);
  RetrievalResult result = content_filter(articles, query, options.cap, options.tau);
  result.ranked_chunks = std::move(fused);
  result.weights = options.weights;
  result.pool_size = options.pool_size;
  result.diagnostics = std::move(diagnostics);
  return result;
}

} // namespace lsdb
