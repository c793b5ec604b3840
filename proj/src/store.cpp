#include "lsdb/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "lsdb/error.hpp"
#include "lsdb/json_io.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kArticles = "articles.jsonl";
constexpr const char* kChunks = "chunks.jsonl";
constexpr const char* kEntities = "entities.jsonl";
constexpr const char* kNodes = "kg_nodes.jsonl";
constexpr const char* kEdges = "kg_edges.jsonl";

std::string article_of(std::string_view chunk_id) { return std::string(chunk_id.substr(0, chunk_id.find('#'))); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::StorageFailure, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::StorageFailure, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot replace " + p.string() + ": " + ec.message());
}

template <typename T>
std::string to_jsonl(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) {
    out += Json(item).dump();
    out += '\n';
  }
  return out;
}

template <typename T>
std::vector<T> from_jsonl(const std::string& content, const std::string& file) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (auto line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(Json::parse(line).get<T>());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::StorageFailure, file + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

StoreManifest fresh_manifest() {
  StoreManifest m;
  for (auto name : {kIndexLexical, kIndexSemantic, kIndexRelational}) m.indexes[std::string(name)] = IndexState{};
  return m;
}

} // namespace

struct Store::State {
  fs::path dir;
  mutable std::shared_mutex mu;  // guards records and manifest
  std::mutex write_mu;           // serializes writers
  std::shared_ptr<const StoreRecords> records = std::make_shared<StoreRecords>();
  StoreManifest manifest = fresh_manifest();

  void check_writable() const {
    if (StoreLock::held(dir)) {
      throw Error(ErrorCode::StoreLocked, "store " + dir.string() + " is held by a running server");
    }
  }

  // Writes every record file, then the manifest with their checksums.
  void persist(const StoreRecords& r, StoreManifest& m) const {
    const std::vector<std::pair<const char*, std::string>> files = {
        {kArticles, to_jsonl(r.articles)}, {kChunks, to_jsonl(r.chunks)}, {kEntities, to_jsonl(r.entities)},
        {kNodes, to_jsonl(r.nodes)},       {kEdges, to_jsonl(r.edges)}};
    for (const auto& [name, content] : files) {
      write_atomic(dir / name, content);
      m.checksums[name] = text::sha256_hex(content);
    }
    m.article_count = r.articles.size();
    m.chunk_count = r.chunks.size();
    m.entity_count = r.entities.size();
    m.node_count = r.nodes.size();
    m.edge_count = r.edges.size();
    write_manifest(m);
  }

  void write_manifest(const StoreManifest& m) const { write_atomic(dir / kManifest, Json(m).dump(2) + "\n"); }

  void publish(std::shared_ptr<const StoreRecords> r, StoreManifest m) {
    std::unique_lock lock(mu);
    records = std::move(r);
    manifest = std::move(m);
  }
};

Store::Store(std::unique_ptr<State> state) : state_(std::move(state)) {}
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

Store Store::open(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create store directory " + dir.string() + ": " + ec.message());
  auto state = std::make_unique<State>();
  state->dir = dir;
  const fs::path manifest_path = dir / kManifest;
  if (!fs::exists(manifest_path)) return Store(std::move(state));

  StoreManifest m;
  try {
    m = Json::parse(read_file(manifest_path)).get<StoreManifest>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::StorageFailure, "bad manifest: " + std::string(e.what()));
  }
  if (m.version != StoreManifest::kVersion) {
    throw Error(ErrorCode::StorageFailure, "unsupported store version " + std::to_string(m.version));
  }
  for (auto name : {kIndexLexical, kIndexSemantic, kIndexRelational}) {
    m.indexes.try_emplace(std::string(name), IndexState{});
  }
  auto load = [&](const char* name) {
    const fs::path p = dir / name;
    const std::string content = fs::exists(p) ? read_file(p) : std::string();
    auto it = m.checksums.find(name);
    if (it != m.checksums.end() && it->second != text::sha256_hex(content)) {
      throw Error(ErrorCode::StorageFailure, std::string(name) + " does not match the manifest checksum");
    }
    return content;
  };
  auto records = std::make_shared<StoreRecords>();
  records->articles = from_jsonl<Article>(load(kArticles), kArticles);
  records->chunks = from_jsonl<Chunk>(load(kChunks), kChunks);
  records->entities = from_jsonl<Entity>(load(kEntities), kEntities);
  records->nodes = from_jsonl<KGNode>(load(kNodes), kNodes);
  records->edges = from_jsonl<KGEdge>(load(kEdges), kEdges);
  state->records = std::move(records);
  state->manifest = std::move(m);
  return Store(std::move(state));
}

const fs::path& Store::dir() const { return state_->dir; }

namespace {

// Rebuilds `base` with `article_id`'s records replaced by the given ones
// (or dropped when `article` is null), then regenerates the graph.
StoreRecords rebuild(const StoreRecords& base, std::string_view article_id, const Article* article,
                     const std::vector<Chunk>* chunks, const std::vector<Entity>* entities) {
  StoreRecords next;
  std::map<std::string, const Article*, std::less<>> articles;
  for (const auto& a : base.articles) articles.emplace(a.meta.article_id, &a);
  articles.erase(std::string(article_id));
  if (article) articles.emplace(article->meta.article_id, article);

  std::map<std::string, std::vector<const Chunk*>, std::less<>> chunks_of;
  std::map<std::string, std::vector<const Entity*>, std::less<>> entities_of;
  for (const auto& c : base.chunks) {
    if (c.article_id != article_id) chunks_of[c.article_id].push_back(&c);
  }
  for (const auto& e : base.entities) {
    const auto owner = article_of(e.chunk_id);
    if (owner != article_id) entities_of[owner].push_back(&e);
  }
  if (article) {
    for (const auto& c : *chunks) chunks_of[std::string(article_id)].push_back(&c);
    for (const auto& e : *entities) entities_of[std::string(article_id)].push_back(&e);
  }
  for (const auto& [id, a] : articles) {
    next.articles.push_back(*a);
    for (const Chunk* c : chunks_of[id]) next.chunks.push_back(*c);
    for (const Entity* e : entities_of[id]) next.entities.push_back(*e);
  }
  KnowledgeGraph g = build_graph(next.chunks, next.entities);
  next.nodes = std::move(g.nodes);
  next.edges = std::move(g.edges);
  return next;
}

void mark_all_stale(StoreManifest& m) {
  for (auto& [name, s] : m.indexes) s.stale = true;
}

} // namespace

std::string Store::upsert_article(const Article& article, const std::optional<std::vector<Entity>>& supplied) {
  const ValidationReport report = validate_schema(article);
  if (!report.ok()) {
    std::string msg = "article " + article.meta.article_id + " is invalid:";
    for (const auto& e : report.errors) msg += " [" + e.location + "] " + e.code + ": " + e.message + ";";
    throw Error(ErrorCode::SchemaInvalid, msg);
  }
  const std::string& id = article.meta.article_id;
  std::vector<Chunk> chunks = chunk_article(article);
  std::vector<Entity> entities;
  if (supplied) {
    std::set<std::string> known;
    for (const auto& c : chunks) known.insert(c.chunk_id);
    for (Entity e : *supplied) {
      if (!known.count(e.chunk_id)) {
        throw Error(ErrorCode::DanglingEntity, "entity " + e.entity_id + " references unknown chunk " + e.chunk_id);
      }
      e.provenance = "external";
      entities.push_back(std::move(e));
    }
  } else {
    BaselineExtractor extractor;
    for (const auto& c : chunks) {
      for (auto& e : extractor.extract(c)) entities.push_back(std::move(e));
    }
  }

  std::lock_guard write_lock(state_->write_mu);
  state_->check_writable();
  auto base = snapshot();
  auto next = std::make_shared<StoreRecords>(rebuild(*base, id, &article, &chunks, &entities));
  StoreManifest m = manifest();
  mark_all_stale(m);
  state_->persist(*next, m);
  state_->publish(std::move(next), std::move(m));
  return id;
}

bool Store::remove_article(std::string_view article_id) {
  std::lock_guard write_lock(state_->write_mu);
  state_->check_writable();
  auto base = snapshot();
  const bool present = std::any_of(base->articles.begin(), base->articles.end(),
                                   [&](const Article& a) { return a.meta.article_id == article_id; });
  if (!present) return false;
  auto next = std::make_shared<StoreRecords>(rebuild(*base, article_id, nullptr, nullptr, nullptr));
  StoreManifest m = manifest();
  mark_all_stale(m);
  state_->persist(*next, m);
  state_->publish(std::move(next), std::move(m));
  return true;
}

std::shared_ptr<const StoreRecords> Store::snapshot() const {
  std::shared_lock lock(state_->mu);
  return state_->records;
}

StoreManifest Store::manifest() const {
  std::shared_lock lock(state_->mu);
  return state_->manifest;
}

Article Store::get_article(std::string_view article_id) const {
  auto r = snapshot();
  for (const auto& a : r->articles) {
    if (a.meta.article_id == article_id) return a;
  }
  throw Error(ErrorCode::UnknownArticle, "unknown article " + std::string(article_id));
}

bool Store::has_article(std::string_view article_id) const {
  auto r = snapshot();
  return std::any_of(r->articles.begin(), r->articles.end(),
                     [&](const Article& a) { return a.meta.article_id == article_id; });
}

std::vector<Chunk> Store::get_chunks(std::string_view article_id, std::optional<Category> category) const {
  auto r = snapshot();
  if (!std::any_of(r->articles.begin(), r->articles.end(),
                   [&](const Article& a) { return a.meta.article_id == article_id; })) {
    throw Error(ErrorCode::UnknownArticle, "unknown article " + std::string(article_id));
  }
  std::vector<Chunk> out;
  for (const auto& c : r->chunks) {
    if (c.article_id == article_id && (!category || c.category == *category)) out.push_back(c);
  }
  return out;
}

ValidationReport Store::integrity_check() const {
  auto r = snapshot();
  ValidationReport report = check_integrity(*r);
  const StoreManifest m = manifest();
  auto count = [&](const char* what, std::size_t stated, std::size_t actual) {
    if (stated != actual) {
      report.error("manifest", "CountMismatch",
                   std::string(what) + " count " + std::to_string(stated) + " != " + std::to_string(actual));
    }
  };
  if (fs::exists(state_->dir / kManifest)) {
    count("article", m.article_count, r->articles.size());
    count("chunk", m.chunk_count, r->chunks.size());
    count("entity", m.entity_count, r->entities.size());
    count("node", m.node_count, r->nodes.size());
    count("edge", m.edge_count, r->edges.size());
  }
  return report;
}

CorpusStats Store::corpus_stats(const HistogramBins& bins) const { return compute_corpus_stats(*snapshot(), bins); }

void Store::mark_index_built(std::string_view index, int format_version, std::string file) {
  std::lock_guard write_lock(state_->write_mu);
  state_->check_writable();
  StoreManifest m = manifest();
  m.indexes[std::string(index)] = IndexState{false, format_version, std::move(file)};
  if (!fs::exists(state_->dir / kManifest)) {
    state_->persist(*snapshot(), m);
  } else {
    state_->write_manifest(m);
  }
  std::unique_lock lock(state_->mu);
  state_->manifest = std::move(m);
}

bool Store::any_index_stale() const {
  const StoreManifest m = manifest();
  return std::any_of(m.indexes.begin(), m.indexes.end(), [](const auto& kv) { return kv.second.stale; });
}

CorpusStats compute_corpus_stats(const StoreRecords& records, const HistogramBins& bins) {
  if (bins.tokens == 0 || bins.sentences == 0 || bins.quantities == 0) {
    throw Error(ErrorCode::InvalidArgument, "histogram bin widths must be positive");
  }
  CorpusStats s;
  s.documents = records.articles.size();
  s.token_histogram.bin_width = bins.tokens;
  s.sentence_histogram.bin_width = bins.sentences;
  s.quantity_histogram.bin_width = bins.quantities;
  for (Category c : kCategoryOrder) s.per_category[c] = CategoryTotals{};

  std::map<std::string, CategoryTotals, std::less<>> per_doc;
  for (const auto& a : records.articles) per_doc[a.meta.article_id];
  for (const auto& c : records.chunks) {
    auto& cat = s.per_category[c.category];
    cat.tokens += c.token_count;
    cat.sentences += c.sentence_count;
    cat.quantities += c.quantity_count;
    auto it = per_doc.find(c.article_id);
    if (it != per_doc.end()) {
      it->second.tokens += c.token_count;
      it->second.sentences += c.sentence_count;
      it->second.quantities += c.quantity_count;
    }
  }
  for (const auto& [c, t] : s.per_category) {
    s.total.tokens += t.tokens;
    s.total.sentences += t.sentences;
    s.total.quantities += t.quantities;
  }
  auto bump = [](Histogram& h, std::size_t value) {
    const std::size_t bin = value / h.bin_width;
    if (h.counts.size() <= bin) h.counts.resize(bin + 1, 0);
    ++h.counts[bin];
  };
  for (const auto& [id, t] : per_doc) {
    bump(s.token_histogram, t.tokens);
    bump(s.sentence_histogram, t.sentences);
    bump(s.quantity_histogram, t.quantities);
  }
  return s;
}

ValidationReport check_integrity(const StoreRecords& r) {
  ValidationReport report;
  std::set<std::string> articles;
  for (const auto& a : r.articles) {
    const std::string& id = a.meta.article_id;
    if (!valid_article_id(id)) report.error("article " + id, "InvalidArticleId", "article id is not valid");
    if (!articles.insert(id).second) report.error("article " + id, "DuplicateArticle", "article id repeats");
  }

  std::set<std::string> chunks;
  for (const auto& c : r.chunks) {
    const std::string where = "chunk " + c.chunk_id;
    if (!chunks.insert(c.chunk_id).second) report.error(where, "DuplicateChunk", "chunk id repeats");
    auto key = parse_chunk_id(c.chunk_id);
    if (!key) {
      report.error(where, "InvalidChunkId", "chunk id does not parse");
    } else if (key->article_id != c.article_id || key->category != c.category) {
      report.error(where, "ChunkIdMismatch", "chunk id disagrees with its article or category");
    }
    if (!articles.count(c.article_id)) report.error(where, "DanglingChunk", "article " + c.article_id + " is missing");
    Chunk recounted = c;
    recount_chunk(recounted);
    if (recounted.token_count != c.token_count || recounted.sentence_count != c.sentence_count ||
        recounted.quantity_count != c.quantity_count) {
      report.error(where, "CountMismatch", "stored counters differ from the chunk text");
    }
  }

  std::set<std::string> entities;
  for (const auto& e : r.entities) {
    const std::string where = "entity " + e.entity_id;
    if (!entities.insert(e.entity_id).second) report.error(where, "DuplicateEntity", "entity id repeats");
    if (!chunks.count(e.chunk_id)) {
      report.error(where, "DanglingEntity", "entity " + e.entity_id + " references missing chunk " + e.chunk_id);
    }
  }

  std::set<std::int64_t> nodes;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const auto& n = r.nodes[i];
    const std::string where = "node " + std::to_string(n.node_id);
    if (n.node_id != static_cast<std::int64_t>(i)) report.error(where, "SparseNodeId", "node ids are not dense");
    if (!nodes.insert(n.node_id).second) report.error(where, "DuplicateNode", "node id repeats");
    const bool resolves = n.type == "chunk" ? chunks.count(n.ref) > 0 : entities.count(n.ref) > 0;
    if (!resolves) report.error(where, "DanglingNode", "node references missing record " + n.ref);
  }
  for (std::size_t i = 0; i < r.edges.size(); ++i) {
    const auto& e = r.edges[i];
    const std::string where = "edge " + std::to_string(i);
    if (!nodes.count(e.source) || !nodes.count(e.target)) {
      report.error(where, "DanglingEdge", "edge endpoint does not exist");
    }
    if (e.source == e.target) report.error(where, "SelfLoop", "edge connects a node to itself");
  }
  return report;
}

StoreLock::StoreLock(const fs::path& store_dir) : path_(path_for(store_dir)) {
  std::error_code ec;
  fs::create_directories(store_dir, ec);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw Error(ErrorCode::StoreLocked, "store is locked: " + path_.string());
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

StoreLock::~StoreLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

bool StoreLock::held(const fs::path& store_dir) { return fs::exists(path_for(store_dir)); }

fs::path StoreLock::path_for(const fs::path& store_dir) { return store_dir / "lsdb.lock"; }

} // namespace lsdb
