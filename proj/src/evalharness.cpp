#include "lsdb/evalharness.hpp"

#include <algorithm>

#include "json.hpp"
#include "lsdb/error.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

std::string_view query_category_name(QueryCategory c) noexcept {
  switch (c) {
    case QueryCategory::data_retrieval: return "data-retrieval";
    case QueryCategory::recommendation: return "recommendation";
    case QueryCategory::informational: return "informational";
    case QueryCategory::integrative_summary: return "integrative-summary";
    case QueryCategory::open_ended: return "open-ended";
  }
  return "data-retrieval";
}

std::optional<QueryCategory> parse_query_category(std::string_view name) noexcept {
  for (auto c : {QueryCategory::data_retrieval, QueryCategory::recommendation, QueryCategory::informational,
                 QueryCategory::integrative_summary, QueryCategory::open_ended}) {
    if (name == query_category_name(c)) return c;
  }
  return std::nullopt;
}

std::vector<EvalQuery> parse_query_set(std::string_view jsonl) {
  std::vector<EvalQuery> out;
  const auto lines = text::split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const std::string where = "query set line " + std::to_string(i + 1);
    EvalQuery q;
    try {
      auto j = nlohmann::json::parse(lines[i]);
      q.id = j.at("id").get<std::string>();
      q.query = j.at("query").get<std::string>();
      const std::string cat = j.value("category", "data-retrieval");
      auto parsed = parse_query_category(cat);
      if (!parsed) throw Error(ErrorCode::InvalidArgument, where + ": unknown category '" + cat + "'");
      q.category = *parsed;
      q.gold_articles = j.at("gold_articles").get<std::vector<std::string>>();
      q.gold_chunks = j.value("gold_chunks", std::vector<std::string>{});
      q.filter = j.value("filter", "");
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::InvalidArgument, where + ": " + e.what());
    }
    if (q.gold_articles.empty()) throw Error(ErrorCode::InvalidArgument, where + ": no gold articles");
    out.push_back(std::move(q));
  }
  return out;
}

std::string_view hit_label_name(HitLabel label) noexcept {
  switch (label) {
    case HitLabel::first_hit: return "first_hit";
    case HitLabel::substitute: return "substitute";
    case HitLabel::failed: return "failed";
  }
  return "failed";
}

std::optional<HitLabel> parse_hit_label(std::string_view name) noexcept {
  for (auto l : {HitLabel::first_hit, HitLabel::substitute, HitLabel::failed}) {
    if (name == hit_label_name(l)) return l;
  }
  return std::nullopt;
}

HitLabel classify_hits(const std::vector<std::string>& ranked, const std::vector<std::string>& gold, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "hit depth must be >= 1");
  auto is_gold = [&](const std::string& id) { return std::find(gold.begin(), gold.end(), id) != gold.end(); };
  if (!ranked.empty() && is_gold(ranked.front())) return HitLabel::first_hit;
  for (std::size_t r = 1; r < std::min(n, ranked.size()); ++r) {
    if (is_gold(ranked[r])) return HitLabel::substitute;
  }
  return HitLabel::failed;
}

HitLabel classify_hits(const RetrievalResult& result, const std::vector<std::string>& gold, std::size_t n) {
  std::vector<std::string> ranked;
  for (const auto& a : result.articles) ranked.push_back(a.article_id);
  return classify_hits(ranked, gold, n);
}

HitRates aggregate_hits(const std::vector<HitLabel>& labels) {
  HitRates r;
  r.queries = labels.size();
  if (labels.empty()) return r;
  const double n = static_cast<double>(labels.size());
  r.first_hit = static_cast<double>(std::count(labels.begin(), labels.end(), HitLabel::first_hit)) / n;
  r.substitute = static_cast<double>(std::count(labels.begin(), labels.end(), HitLabel::substitute)) / n;
  r.failed = static_cast<double>(std::count(labels.begin(), labels.end(), HitLabel::failed)) / n;
  return r;
}

std::vector<std::size_t> substantive_matches(const RetrievalResult& result, const std::set<std::string>& gold_chunks,
                                             const std::vector<std::size_t>& n_list) {
  if (!std::is_sorted(n_list.begin(), n_list.end())) {
    throw Error(ErrorCode::InvalidArgument, "N list must be ascending");
  }
  std::vector<std::size_t> out;
  for (std::size_t n : n_list) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < std::min(n, result.ranked_chunks.size()); ++i) {
      count += gold_chunks.count(result.ranked_chunks[i].chunk_id);
    }
    out.push_back(count);
  }
  return out;
}

std::vector<Quantity> article_quantities(const Article& article) {
  std::vector<Quantity> out;
  for (const auto& m : article.modules) {
    for (const auto& s : m.sections) {
      for (auto& q : extract_quantities(s.body)) out.push_back(std::move(q));
      for (const auto& ev : s.evidence) {
        for (auto& q : extract_quantities(ev)) out.push_back(std::move(q));
      }
    }
  }
  return out;
}

namespace {

// Structured article text counts only its content; anything else is raw text.
std::vector<Quantity> text_quantities(std::string_view t) {
  auto checked = check_article_text(t);
  if (checked.article && checked.report.ok()) return article_quantities(*checked.article);
  return extract_quantities(t);
}

PrecisionRecall to_pr(const MatchReport& m) { return PrecisionRecall{m.precision, m.recall}; }

} // namespace

PrecisionRecall extraction_pr(std::string_view source_text, const Article& structured, double rel_tol) {
  return to_pr(compare_quantity_sets(text_quantities(source_text), article_quantities(structured), rel_tol));
}

PrecisionRecall extraction_pr(std::string_view source_text, std::string_view structured_text, double rel_tol) {
  return to_pr(compare_quantity_sets(text_quantities(source_text), text_quantities(structured_text), rel_tol));
}

EvalRun evaluate(const std::vector<EvalQuery>& queries, const RetrievalRunner& runner, const Weights& weights,
                 std::size_t hit_depth, const std::vector<std::size_t>& n_list) {
  weights.validate();
  EvalRun run;
  run.substantive_n = n_list;
  run.substantive_counts.assign(n_list.size(), 0);
  std::vector<HitLabel> labels;
  for (const auto& q : queries) {
    const RetrievalResult result = runner(q, weights);
    const HitLabel label = classify_hits(result, q.gold_articles, hit_depth);
    labels.push_back(label);
    run.hits.labels.emplace_back(q.id, label);
    const std::set<std::string> gold(q.gold_chunks.begin(), q.gold_chunks.end());
    const auto counts = substantive_matches(result, gold, n_list);
    for (std::size_t i = 0; i < counts.size(); ++i) run.substantive_counts[i] += counts[i];
  }
  run.hits.rates = aggregate_hits(labels);
  return run;
}

std::vector<SweepRow> weight_sweep(const std::vector<EvalQuery>& queries, const std::vector<Weights>& grid,
                                   const RetrievalRunner& runner, std::size_t hit_depth,
                                   const std::vector<std::size_t>& n_list) {
  for (const auto& w : grid) w.validate();
  std::vector<SweepRow> rows;
  for (const auto& w : grid) {
    EvalRun run = evaluate(queries, runner, w, hit_depth, n_list);
    rows.push_back(SweepRow{w, run.hits.rates, std::move(run.substantive_counts)});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::vector<std::size_t>& n_list) {
  std::string out = "w_semantic,w_lexical,w_relational,first_hit,substitute,failed,queries";
  for (std::size_t n : n_list) out += ",match@" + std::to_string(n);
  out += "\n";
  for (const auto& r : rows) {
    out += text::format_number(r.weights.semantic) + "," + text::format_number(r.weights.lexical) + "," +
           text::format_number(r.weights.relational) + "," + text::format_number(r.rates.first_hit) + "," +
           text::format_number(r.rates.substitute) + "," + text::format_number(r.rates.failed) + "," +
           std::to_string(r.rates.queries);
    for (std::size_t c : r.substantive_counts) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

} // namespace lsdb
