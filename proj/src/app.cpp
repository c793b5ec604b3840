#include "lsdb/app.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lsdb/assets.hpp"
#include "lsdb/error.hpp"
#include "lsdb/querykit.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

namespace fs = std::filesystem;

void AppConfig::validate() const {
  auto bad = [](const std::string& key, const std::string& why) {
    throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': " + why);
  };
  try {
    weights.validate();
  } catch (const Error& e) {
    bad("weights", e.what());
  }
  try {
    bm25.validate();
  } catch (const Error& e) {
    bad("bm25", e.what());
  }
  if (store.empty()) bad("store", "must not be empty");
  if (embedder.dim == 0) bad("embedder.dim", "must be >= 1");
  if (embedder.kind == EmbedderKind::external_service && embedder.endpoint.empty()) {
    bad("embedder.endpoint", "required for external_service");
  }
  if (generator.kind == GeneratorKind::external_service && generator.provider.endpoint.empty()) {
    bad("generator.endpoint", "required for external_service");
  }
  if (pool_size < 1) bad("pool_size", "must be >= 1");
  if (cap < 1) bad("cap", "must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) bad("tau", "must be in (0, 1]");
  if (budget < 1) bad("budget", "must be >= 1");
  if (batch_size < 1) bad("batch_size", "must be >= 1");
  if (max_iterations < 1) bad("max_iterations", "must be >= 1");
  if (distill_chunks < 1) bad("distill_chunks", "must be >= 1");
  if (hit_depth < 1) bad("hit_depth", "must be >= 1");
  if (embedder.timeout_ms < 1) bad("embedder.timeout_ms", "must be >= 1");
  if (generator.provider.timeout_ms < 1) bad("generator.timeout_ms", "must be >= 1");
}

void apply_config_json(AppConfig& c, const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  std::string key;
  auto sub = [&](const Json& obj, const std::string& prefix, auto&& fn) {
    if (!obj.is_object()) throw Error(ErrorCode::InvalidConfig, "config key '" + prefix + "': must be an object");
    for (const auto& [k, v] : obj.items()) {
      key = prefix + "." + k;
      fn(k, v);
    }
  };
  auto unknown = [&]() { throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'"); };
  try {
    for (const auto& [k, v] : j.items()) {
      key = k;
      if (k == "store") {
        c.store = v.get<std::string>();
      } else if (k == "weights") {
        sub(v, k, [&](const std::string& n, const Json& x) {
          if (n == "semantic") c.weights.semantic = x.get<double>();
          else if (n == "lexical") c.weights.lexical = x.get<double>();
          else if (n == "relational") c.weights.relational = x.get<double>();
          else unknown();
        });
      } else if (k == "bm25") {
        sub(v, k, [&](const std::string& n, const Json& x) {
          if (n == "k1") c.bm25.k1 = x.get<double>();
          else if (n == "b") c.bm25.b = x.get<double>();
          else unknown();
        });
      } else if (k == "embedder") {
        sub(v, k, [&](const std::string& n, const Json& x) {
          if (n == "kind") {
            auto kind = parse_embedder_kind(x.get<std::string>());
            if (!kind) throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': unknown embedder kind");
            c.embedder.kind = *kind;
          } else if (n == "dim") {
            c.embedder.dim = x.get<std::size_t>();
          } else if (n == "endpoint") {
            c.embedder.endpoint = x.get<std::string>();
          } else if (n == "api_key") {
            c.embedder.api_key = x.get<std::string>();
          } else if (n == "timeout_ms") {
            c.embedder.timeout_ms = x.get<int>();
          } else {
            unknown();
          }
        });
      } else if (k == "generator") {
        sub(v, k, [&](const std::string& n, const Json& x) {
          if (n == "kind") {
            auto kind = parse_generator_kind(x.get<std::string>());
            if (!kind) throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': unknown generator kind");
            c.generator.kind = *kind;
          } else if (n == "endpoint") {
            c.generator.provider.endpoint = x.get<std::string>();
          } else if (n == "model") {
            c.generator.provider.model = x.get<std::string>();
          } else if (n == "api_key") {
            c.generator.provider.api_key = x.get<std::string>();
          } else if (n == "timeout_ms") {
            c.generator.provider.timeout_ms = x.get<int>();
          } else {
            unknown();
          }
        });
      } else if (k == "pool_size") {
        c.pool_size = v.get<std::size_t>();
      } else if (k == "cap") {
        c.cap = v.get<std::size_t>();
      } else if (k == "tau") {
        c.tau = v.get<double>();
      } else if (k == "budget") {
        c.budget = v.get<std::size_t>();
      } else if (k == "review_mode") {
        const auto mode = v.get<std::string>();
        if (mode == "auto_accept") c.review_mode = ReviewMode::auto_accept;
        else if (mode == "interactive") c.review_mode = ReviewMode::interactive;
        else throw Error(ErrorCode::InvalidConfig, "config key 'review_mode': unknown mode '" + mode + "'");
      } else if (k == "batch_size") {
        c.batch_size = v.get<std::size_t>();
      } else if (k == "max_iterations") {
        c.max_iterations = v.get<std::size_t>();
      } else if (k == "distill_chunks") {
        c.distill_chunks = v.get<std::size_t>();
      } else if (k == "hit_depth") {
        c.hit_depth = v.get<std::size_t>();
      } else if (k == "parallel") {
        c.parallel = v.get<bool>();
      } else if (k == "rewrite") {
        c.rewrite = v.get<bool>();
      } else if (k == "prompt_template") {
        c.prompt_template = v.get<std::string>();
      } else {
        unknown();
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': " + e.what());
  }
}

AppConfig load_config_file(const fs::path& path, AppConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config file " + path.string() + " is not JSON: " + e.what());
  }
  apply_config_json(base, j);
  return base;
}

void apply_environment(AppConfig& c) {
  auto env = [](const char* name) -> const char* {
    const char* v = std::getenv(name);
    return v != nullptr && *v != '\0' ? v : nullptr;
  };
  if (auto v = env(kEnvProviderEndpoint)) c.generator.provider.endpoint = v;
  if (auto v = env(kEnvProviderKey)) c.generator.provider.api_key = v;
  if (auto v = env(kEnvProviderModel)) c.generator.provider.model = v;
  if (auto v = env(kEnvEmbedderEndpoint)) c.embedder.endpoint = v;
  if (auto v = env(kEnvEmbedderKey)) c.embedder.api_key = v;
}

namespace {

void write_index_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot replace " + path.string() + ": " + ec.message());
}

} // namespace

IndexBuildSummary build_indexes(Store& store, const EmbedderSpec& embedder) {
  if (StoreLock::held(store.dir())) {
    throw Error(ErrorCode::StoreLocked, "store " + store.dir().string() + " is held by a running server");
  }
  auto records = store.snapshot();
  IndexBuildSummary summary;
  summary.chunks = records->chunks.size();

  const InvertedIndex lexical = InvertedIndex::build(records->chunks);
  summary.terms = lexical.terms().size();
  std::ostringstream lex_out;
  lexical.save(lex_out);
  write_index_file(store.dir() / kLexicalIndexFile, lex_out.str());

  const FlatL2Index semantic = build_vector_index(records->chunks, Embedder(embedder));
  summary.vectors = semantic.size();
  std::ostringstream sem_out;
  semantic.save(sem_out);
  write_index_file(store.dir() / kSemanticIndexFile, sem_out.str());

  std::set<std::string> known;
  for (const auto& c : records->chunks) known.insert(c.chunk_id);
  summary.attributes = ValueIndex::build(records->entities, &known).attribute_count();

  store.mark_index_built(kIndexLexical, InvertedIndex::kFormatVersion, kLexicalIndexFile);
  store.mark_index_built(kIndexSemantic, FlatL2Index::kFormatVersion, kSemanticIndexFile);
  store.mark_index_built(kIndexRelational, 1, "");
  return summary;
}

Engine::Engine(std::shared_ptr<const StoreRecords> records, StoreManifest manifest, const fs::path& store_dir,
               AppConfig config)
    : records_(std::move(records)), config_(std::move(config)), embedder_(config_.embedder),
      semantic_(config_.embedder) {
  config_.validate();
  for (const auto& c : records_->chunks) chunk_by_id_.emplace(c.chunk_id, &c);
  std::set<std::string> known;
  for (const auto& c : records_->chunks) known.insert(c.chunk_id);
  relational_ = ValueIndex::build(records_->entities, &known);

  for (const auto& [name, state] : manifest.indexes) {
    if (state.stale) {
      stale_reason_ = "index '" + name + "' is stale; run 'index build'";
      return;
    }
  }
  try {
    std::ifstream lex_in(store_dir / kLexicalIndexFile);
    if (!lex_in) throw Error(ErrorCode::StaleIndex, "lexical index file is missing");
    lexical_ = InvertedIndex::load(lex_in);
    std::ifstream sem_in(store_dir / kSemanticIndexFile);
    if (!sem_in) throw Error(ErrorCode::StaleIndex, "semantic index file is missing");
    semantic_ = FlatL2Index::load(sem_in);
  } catch (const Error& e) {
    stale_reason_ = e.what();
    return;
  }
  if (!semantic_.spec().same_space(config_.embedder)) {
    stale_reason_ = "semantic index was built with a different embedder; run 'index build'";
    return;
  }
  if (lexical_.doc_count() != records_->chunks.size() || semantic_.size() != records_->chunks.size()) {
    stale_reason_ = "index sizes differ from the chunk count; run 'index build'";
    return;
  }
  stale_ = false;
}

Engine Engine::open(const AppConfig& config) {
  Store store = Store::open(config.store);
  return Engine(store.snapshot(), store.manifest(), store.dir(), config);
}

const Chunk* Engine::chunk(std::string_view chunk_id) const {
  auto it = chunk_by_id_.find(chunk_id);
  return it == chunk_by_id_.end() ? nullptr : it->second;
}

CompositeQuery Engine::preprocess_query(const std::string& text) const {
  if (config_.rewrite) {
    LlmRewriter rewriter(make_provider(config_.generator));
    return preprocess(text, rewriter, embedder_);
  }
  IdentityRewriter rewriter;
  return preprocess(text, rewriter, embedder_);
}

Engine::Run Engine::run(const std::string& text, const std::string& filter,
                        const std::optional<Weights>& weights) const {
  if (stale_) throw Error(ErrorCode::StaleIndex, stale_reason_);
  Run r;
  r.query = preprocess_query(text);
  if (!text::trim(filter).empty()) r.filters = parse_filter(filter);
  RetrievalOptions options;
  options.weights = weights.value_or(config_.weights);
  options.bm25 = config_.bm25;
  options.pool_size = config_.pool_size;
  options.cap = config_.cap;
  options.tau = config_.tau;
  options.filters = r.filters;
  options.parallel = config_.parallel;
  r.result = retrieve(r.query, SearchIndexes{&lexical_, &semantic_, &relational_, false}, options);
  return r;
}

RetrievalResult Engine::query(const std::string& text, const std::string& filter,
                              const std::optional<Weights>& weights) const {
  return run(text, filter, weights).result;
}

namespace {

Json composite_json(const CompositeQuery& q, const std::vector<Condition>& filters) {
  return Json{{"raw", q.raw},           {"cleaned", q.cleaned},       {"rewritten", q.rewritten},
              {"residual", q.residual}, {"keywords", q.keywords},     {"conditions", q.conditions},
              {"filters", filters},     {"warnings", q.warnings}};
}

} // namespace

Json Engine::query_payload(const std::string& text, const std::string& filter) const {
  Run r = run(text, filter, std::nullopt);
  return Json{{"query", composite_json(r.query, r.filters)}, {"result", r.result}};
}

Json Engine::ask_payload(const std::string& text, const std::string& filter) const {
  Run r = run(text, filter, std::nullopt);
  const ContextPackage ctx =
      assemble_context(r.result, [this](std::string_view id) { return chunk(id); }, config_.budget);
  const std::string tmpl = assets::load_or_builtin(config_.prompt_template, "generation_prompt.txt");
  const std::string prompt = build_prompt(r.query, ctx, tmpl);
  const std::string answer = generate(prompt, config_.generator);
  const GroundingReport grounding = verify_grounding(answer, ctx, 1e-6, r.query.cleaned);
  return Json{{"query", composite_json(r.query, r.filters)},
              {"articles", Json(r.result)["articles"]},
              {"context", ctx},
              {"prompt_sha256", text::sha256_hex(prompt)},
              {"answer", answer},
              {"grounding", grounding}};
}

std::string dump_payload(const Json& payload) { return payload.dump(2) + "\n"; }

} // namespace lsdb
