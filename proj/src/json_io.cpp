#include "lsdb/json_io.hpp"

#include "lsdb/error.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

namespace {

template <typename T>
void opt_to(Json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> opt_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

Category category_from(const Json& j) {
  const auto name = j.get<std::string>();
  auto c = parse_category(name);
  if (!c) throw Error(ErrorCode::StorageFailure, "unknown category '" + name + "'");
  return *c;
}

Json axis_json(const AxisScores& a) {
  return Json{{"semantic", a.semantic}, {"lexical", a.lexical}, {"relational", a.relational}};
}

Json histogram_json(const Histogram& h) { return Json{{"bin_width", h.bin_width}, {"counts", h.counts}}; }

Json totals_json(const CategoryTotals& t) {
  return Json{{"tokens", t.tokens}, {"sentences", t.sentences}, {"quantities", t.quantities}};
}

} // namespace

void to_json(Json& j, const ArticleMeta& m) {
  j = Json{{"article_id", m.article_id}, {"title", m.title},     {"abstract", m.abstract},
           {"authors", m.authors},       {"journal", m.journal}, {"extra", m.extra}};
  opt_to(j, "year", m.year);
  opt_to(j, "doi", m.doi);
}

void from_json(const Json& j, ArticleMeta& m) {
  m.article_id = j.at("article_id").get<std::string>();
  m.title = j.value("title", "");
  m.abstract = j.value("abstract", "");
  m.authors = j.value("authors", std::vector<std::string>{});
  m.journal = j.value("journal", "");
  m.year = opt_from<int>(j, "year");
  m.doi = opt_from<std::string>(j, "doi");
  m.extra = j.value("extra", std::map<std::string, std::string>{});
}

void to_json(Json& j, const SectionUnit& s) {
  j = Json{{"heading", s.heading}, {"body", s.body}, {"evidence", s.evidence}, {"order", s.order}};
}

void from_json(const Json& j, SectionUnit& s) {
  s.heading = j.at("heading").get<std::string>();
  s.body = j.value("body", "");
  s.evidence = j.value("evidence", std::vector<std::string>{});
  s.order = j.at("order").get<int>();
}

void to_json(Json& j, const ModuleBlock& m) {
  j = Json{{"label", m.label}, {"sections", m.sections}};
  j["category"] = m.category ? Json(std::string(category_name(*m.category))) : Json(nullptr);
}

void from_json(const Json& j, ModuleBlock& m) {
  m.label = j.at("label").get<std::string>();
  m.category = j.contains("category") && !j.at("category").is_null()
                   ? std::optional<Category>(category_from(j.at("category")))
                   : std::nullopt;
  m.sections = j.value("sections", std::vector<SectionUnit>{});
}

void to_json(Json& j, const Article& a) { j = Json{{"meta", a.meta}, {"modules", a.modules}}; }

void from_json(const Json& j, Article& a) {
  a.meta = j.at("meta").get<ArticleMeta>();
  a.modules = j.value("modules", std::vector<ModuleBlock>{});
}

void to_json(Json& j, const Chunk& c) {
  j = Json{{"chunk_id", c.chunk_id},
           {"article_id", c.article_id},
           {"category", std::string(category_name(c.category))},
           {"heading", c.heading},
           {"text", c.text},
           {"token_count", c.token_count},
           {"sentence_count", c.sentence_count},
           {"quantity_count", c.quantity_count}};
}

void from_json(const Json& j, Chunk& c) {
  c.chunk_id = j.at("chunk_id").get<std::string>();
  c.article_id = j.at("article_id").get<std::string>();
  c.category = category_from(j.at("category"));
  c.heading = j.value("heading", "");
  c.text = j.at("text").get<std::string>();
  c.token_count = j.at("token_count").get<std::size_t>();
  c.sentence_count = j.at("sentence_count").get<std::size_t>();
  c.quantity_count = j.at("quantity_count").get<std::size_t>();
}

void to_json(Json& j, const Quantity& q) {
  j = Json{{"value", q.value},
           {"unit", q.unit},
           {"canonical_value", q.canonical_value},
           {"canonical_unit", q.canonical_unit},
           {"dimension", std::string(dimension_name(q.dimension))},
           {"approx", q.approx},
           {"span", {q.span.start, q.span.end}}};
  opt_to(j, "chunk_id", q.chunk_id);
}

void from_json(const Json& j, Quantity& q) {
  q.value = j.at("value").get<double>();
  q.unit = j.value("unit", "");
  q.canonical_value = j.at("canonical_value").get<double>();
  q.canonical_unit = j.value("canonical_unit", "");
  q.dimension = parse_dimension(j.value("dimension", "unknown")).value_or(Dimension::unknown);
  q.approx = j.value("approx", false);
  if (j.contains("span")) q.span = Span{j["span"].at(0).get<std::size_t>(), j["span"].at(1).get<std::size_t>()};
  q.chunk_id = opt_from<std::string>(j, "chunk_id");
}

void to_json(Json& j, const Entity& e) {
  j = Json{{"entity_id", e.entity_id},
           {"type", e.type},
           {"name", e.name},
           {"canonical_unit", e.canonical_unit},
           {"dimension", std::string(dimension_name(e.dimension))},
           {"chunk_id", e.chunk_id},
           {"span", {e.span.start, e.span.end}},
           {"provenance", e.provenance}};
  opt_to(j, "value", e.value);
  opt_to(j, "unit", e.unit);
  opt_to(j, "canonical_value", e.canonical_value);
}

void from_json(const Json& j, Entity& e) {
  e.entity_id = j.at("entity_id").get<std::string>();
  e.type = j.at("type").get<std::string>();
  e.name = j.at("name").get<std::string>();
  e.value = opt_from<double>(j, "value");
  e.unit = opt_from<std::string>(j, "unit");
  e.canonical_value = opt_from<double>(j, "canonical_value");
  e.canonical_unit = j.value("canonical_unit", "");
  e.dimension = parse_dimension(j.value("dimension", "unknown")).value_or(Dimension::unknown);
  e.chunk_id = j.at("chunk_id").get<std::string>();
  if (j.contains("span")) e.span = Span{j["span"].at(0).get<std::size_t>(), j["span"].at(1).get<std::size_t>()};
  e.provenance = j.value("provenance", "baseline");
}

void to_json(Json& j, const KGNode& n) {
  j = Json{{"node_id", n.node_id}, {"type", n.type}, {"content", n.content}, {"ref", n.ref}};
  opt_to(j, "value", n.value);
}

void from_json(const Json& j, KGNode& n) {
  n.node_id = j.at("node_id").get<std::int64_t>();
  n.type = j.at("type").get<std::string>();
  n.content = j.value("content", "");
  n.value = opt_from<double>(j, "value");
  n.ref = j.value("ref", "");
}

void to_json(Json& j, const KGEdge& e) {
  j = Json{{"source", e.source}, {"target", e.target}, {"relation", e.relation}};
}

void from_json(const Json& j, KGEdge& e) {
  e.source = j.at("source").get<std::int64_t>();
  e.target = j.at("target").get<std::int64_t>();
  e.relation = j.at("relation").get<std::string>();
}

void to_json(Json& j, const Issue& i) {
  j = Json{{"location", i.location}, {"code", i.code}, {"message", i.message}};
}

void to_json(Json& j, const ValidationReport& r) {
  j = Json{{"ok", r.ok()}, {"errors", r.errors}, {"warnings", r.warnings}};
}

void to_json(Json& j, const StoreManifest& m) {
  j = Json{{"version", m.version},
           {"counts",
            {{"articles", m.article_count},
             {"chunks", m.chunk_count},
             {"entities", m.entity_count},
             {"kg_nodes", m.node_count},
             {"kg_edges", m.edge_count}}},
           {"checksums", m.checksums}};
  j["indexes"] = Json::object();
  for (const auto& [name, s] : m.indexes) {
    j["indexes"][name] = Json{{"stale", s.stale}, {"format_version", s.format_version}, {"file", s.file}};
  }
}

void from_json(const Json& j, StoreManifest& m) {
  m.version = j.at("version").get<int>();
  const auto& c = j.at("counts");
  m.article_count = c.at("articles").get<std::size_t>();
  m.chunk_count = c.at("chunks").get<std::size_t>();
  m.entity_count = c.at("entities").get<std::size_t>();
  m.node_count = c.at("kg_nodes").get<std::size_t>();
  m.edge_count = c.at("kg_edges").get<std::size_t>();
  m.checksums = j.value("checksums", std::map<std::string, std::string>{});
  m.indexes.clear();
  if (j.contains("indexes")) {
    for (const auto& [name, s] : j.at("indexes").items()) {
      m.indexes[name] = IndexState{s.at("stale").get<bool>(), s.value("format_version", 0), s.value("file", "")};
    }
  }
}

void to_json(Json& j, const CorpusStats& s) {
  j = Json{{"documents", s.documents},
           {"total", totals_json(s.total)},
           {"histograms",
            {{"tokens", histogram_json(s.token_histogram)},
             {"sentences", histogram_json(s.sentence_histogram)},
             {"quantities", histogram_json(s.quantity_histogram)}}}};
  j["per_category"] = Json::object();
  for (Category c : kCategoryOrder) {
    auto it = s.per_category.find(c);
    j["per_category"][std::string(category_name(c))] =
        totals_json(it == s.per_category.end() ? CategoryTotals{} : it->second);
  }
}

void to_json(Json& j, const Condition& c) {
  j = Json{{"attribute", c.attribute},
           {"comparator", std::string(comparator_name(c.comparator))},
           {"value", c.value},
           {"unit", c.unit},
           {"canonical_lo", c.canonical_lo},
           {"canonical_hi", c.canonical_hi},
           {"canonical_unit", c.canonical_unit},
           {"dimension", std::string(dimension_name(c.dimension))},
           {"text", c.text}};
  opt_to(j, "value_hi", c.value_hi);
}

void to_json(Json& j, const Weights& w) {
  j = Json{{"semantic", w.semantic}, {"lexical", w.lexical}, {"relational", w.relational}};
}

void to_json(Json& j, const ScoredChunk& c) {
  j = Json{{"chunk_id", c.chunk_id},
           {"article_id", c.article_id},
           {"category", std::string(category_name(c.category))},
           {"raw", axis_json(c.raw)},
           {"normalized", axis_json(c.normalized)},
           {"fused", c.fused}};
}

void to_json(Json& j, const RetrievalResult& r) {
  Json articles = Json::array();
  for (const auto& a : r.articles) {
    articles.push_back(Json{{"article_id", a.article_id}, {"rank", a.rank}, {"score", a.score}, {"selected", a.selected}});
  }
  j = Json{{"query", r.query},
           {"weights", r.weights},
           {"pool_size", r.pool_size},
           {"top_fused", r.top_fused},
           {"articles", articles},
           {"ranked_chunks", r.ranked_chunks},
           {"diagnostics", r.diagnostics}};
}

void to_json(Json& j, const ContextPackage& c) {
  Json entries = Json::array();
  for (const auto& e : c.entries) {
    entries.push_back(Json{{"citation", e.citation},
                           {"chunk_id", e.chunk_id},
                           {"article_id", e.article_id},
                           {"category", std::string(category_name(e.category))},
                           {"tokens", e.tokens}});
  }
  j = Json{{"entries", entries}, {"tokens_used", c.tokens_used}, {"budget", c.budget}};
}

void to_json(Json& j, const GroundingReport& g) {
  Json grounded = Json::array();
  for (const auto& q : g.grounded) grounded.push_back(Json{{"quantity", q.quantity}, {"source", q.source}});
  Json derived = Json::array();
  for (const auto& d : g.derived) {
    derived.push_back(Json{{"quantity", d.quantity}, {"formula", d.formula}, {"a", d.a}, {"b", d.b}, {"expected", d.expected}});
  }
  j = Json{{"grounded", grounded}, {"derived", derived}, {"ungrounded", g.ungrounded}, {"ratio", g.ratio}};
}

void to_json(Json& j, const QualityReport& q) {
  j = Json{{"grounding_ratio", q.grounding_ratio}, {"entity_coverage", q.entity_coverage}, {"ungrounded", q.ungrounded}};
}

void from_json(const Json& j, QualityReport& q) {
  q.grounding_ratio = j.at("grounding_ratio").get<double>();
  q.entity_coverage = j.at("entity_coverage").get<double>();
  q.ungrounded = j.value("ungrounded", std::vector<Quantity>{});
}

void to_json(Json& j, const ReviewDecision& d) {
  j = Json{{"kind", std::string(review_kind_name(d.kind))}, {"edited_text", d.edited_text}, {"note", d.note}};
}

void from_json(const Json& j, ReviewDecision& d) {
  const auto kind = j.at("kind").get<std::string>();
  auto k = parse_review_kind(kind);
  if (!k) throw Error(ErrorCode::InvalidArgument, "unknown review kind '" + kind + "'");
  d.kind = *k;
  d.edited_text = j.value("edited_text", "");
  d.note = j.value("note", "");
}

void to_json(Json& j, const IterationRecord& r) {
  j = Json{{"iteration", r.iteration},
           {"batch_chunk_ids", r.batch_chunk_ids},
           {"draft_digest", r.draft_digest},
           {"quality", r.quality},
           {"decision", r.decision},
           {"timestamp", r.timestamp},
           {"version_after", r.version_after},
           {"doc_digest_after", r.doc_digest_after}};
}

void from_json(const Json& j, IterationRecord& r) {
  r.iteration = j.at("iteration").get<std::size_t>();
  r.batch_chunk_ids = j.at("batch_chunk_ids").get<std::vector<std::string>>();
  r.draft_digest = j.at("draft_digest").get<std::string>();
  r.quality = j.at("quality").get<QualityReport>();
  r.decision = j.at("decision").get<ReviewDecision>();
  r.timestamp = j.value("timestamp", "");
  r.version_after = j.at("version_after").get<std::size_t>();
  r.doc_digest_after = j.value("doc_digest_after", "");
}

void to_json(Json& j, const HitRates& r) {
  j = Json{{"first_hit", r.first_hit}, {"substitute", r.substitute}, {"failed", r.failed}, {"queries", r.queries}};
}

void to_json(Json& j, const HitReport& r) {
  Json labels = Json::array();
  for (const auto& [id, label] : r.labels) labels.push_back(Json{{"id", id}, {"label", std::string(hit_label_name(label))}});
  j = Json{{"labels", labels}, {"rates", r.rates}};
}

void to_json(Json& j, const SweepRow& r) {
  j = Json{{"weights", r.weights}, {"rates", r.rates}, {"substantive_counts", r.substantive_counts}};
}

std::string corpus_stats_csv(const CorpusStats& stats) {
  std::string out = "category,tokens,sentences,quantities\n";
  auto row = [&](std::string_view name, const CategoryTotals& t) {
    out += std::string(name) + "," + std::to_string(t.tokens) + "," + std::to_string(t.sentences) + "," +
           std::to_string(t.quantities) + "\n";
  };
  for (Category c : kCategoryOrder) {
    auto it = stats.per_category.find(c);
    row(category_name(c), it == stats.per_category.end() ? CategoryTotals{} : it->second);
  }
  row("total", stats.total);
  return out;
}

} // namespace lsdb
