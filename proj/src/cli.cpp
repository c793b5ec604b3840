#include "lsdb/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "lsdb/app.hpp"
#include "lsdb/error.hpp"
#include "lsdb/server.hpp"
#include "lsdb/text.hpp"

namespace lsdb::cli {

namespace fs = std::filesystem;

namespace {

enum class Format { text, json, csv };

struct Flags {
  std::string store;
  std::string config;
  std::string format = "text";
  std::optional<double> w_sem, w_lex, w_rel;
  std::optional<std::size_t> pool, cap, budget;
  std::optional<double> tau;
  bool parallel = false;
  bool rewrite = false;
  std::string prompt_template;
};

// Exit-code carrier for usage problems detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_double(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string quantity_label(const Quantity& q) {
  std::string s = (q.approx ? "~" : "") + text::format_number(q.value);
  if (!q.unit.empty()) s += " " + q.unit;
  return s;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path.string());
}

AppConfig resolve_config(const Flags& f) {
  AppConfig c;
  std::string config_path = f.config;
  if (config_path.empty()) {
    if (const char* env = std::getenv(kEnvConfigPath); env != nullptr && *env != '\0') config_path = env;
  }
  if (!config_path.empty()) c = load_config_file(config_path, c);
  apply_environment(c);
  if (!f.store.empty()) c.store = f.store;
  if (f.w_sem || f.w_lex || f.w_rel) {
    if (!(f.w_sem && f.w_lex && f.w_rel)) {
      throw Error(ErrorCode::InvalidConfig, "config key 'weights': --w-sem, --w-lex and --w-rel go together");
    }
    c.weights = Weights{*f.w_sem, *f.w_lex, *f.w_rel};
  }
  if (f.pool) c.pool_size = *f.pool;
  if (f.cap) c.cap = *f.cap;
  if (f.tau) c.tau = *f.tau;
  if (f.budget) c.budget = *f.budget;
  if (f.parallel) c.parallel = true;
  if (f.rewrite) c.rewrite = true;
  if (!f.prompt_template.empty()) c.prompt_template = f.prompt_template;
  c.validate();
  return c;
}

Format parse_format(const std::string& s) {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  return Format::text;
}

std::vector<fs::path> article_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".md") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw UsageError("no such file or directory: " + in);
    }
  }
  return files;
}

int cmd_ingest(const AppConfig& config, const std::vector<std::string>& inputs, Format format, std::ostream& out,
               std::ostream& err) {
  const auto files = article_files(inputs);
  Store store = Store::open(config.store);
  Json ok = Json::array();
  Json failed = Json::array();
  for (const auto& file : files) {
    try {
      const Article article = parse_article(read_file(file));
      const std::string id = store.upsert_article(article);
      ok.push_back(Json{{"file", file.string()}, {"article_id", id}});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::StoreLocked || e.code() == ErrorCode::StorageFailure) throw;
      failed.push_back(Json{{"file", file.string()}, {"error", to_string(e.code())}, {"message", e.what()}});
    }
  }
  if (format == Format::json) {
    out << dump_payload(Json{{"ingested", ok}, {"failed", failed}});
  } else {
    for (const auto& o : ok) out << "ingested " << o["article_id"].get<std::string>() << " from " << o["file"].get<std::string>() << "\n";
    out << ok.size() << " ingested, " << failed.size() << " failed\n";
  }
  for (const auto& f : failed) err << f.dump() << "\n";
  return failed.empty() ? 0 : 1;
}

int cmd_index_build(const AppConfig& config, Format format, std::ostream& out) {
  Store store = Store::open(config.store);
  const IndexBuildSummary s = build_indexes(store, config.embedder);
  if (format == Format::json) {
    out << dump_payload(Json{{"chunks", s.chunks}, {"terms", s.terms}, {"vectors", s.vectors}, {"attributes", s.attributes}});
  } else {
    out << "indexed " << s.chunks << " chunks: " << s.terms << " terms, " << s.vectors << " vectors, "
        << s.attributes << " attributes\n";
  }
  return 0;
}

void print_result_text(const RetrievalResult& r, std::ostream& out) {
  for (const auto& d : r.diagnostics) out << "note: " << d << "\n";
  if (r.articles.empty()) {
    out << "no results\n";
    return;
  }
  for (const auto& a : r.articles) {
    out << a.rank << ". " << a.article_id << "  " << fmt_double(a.score) << "\n";
    for (const auto& c : a.selected) {
      out << "   " << c.chunk_id << "  fused " << fmt_double(c.fused) << "  (sem " << fmt_double(c.normalized.semantic, 3)
          << ", lex " << fmt_double(c.normalized.lexical, 3) << ", rel " << fmt_double(c.normalized.relational, 3)
          << ")\n";
    }
  }
}

int cmd_query(const AppConfig& config, const std::string& q, const std::string& filter, Format format,
              std::ostream& out) {
  const Engine engine = Engine::open(config);
  if (format == Format::json) {
    out << dump_payload(engine.query_payload(q, filter));
  } else {
    print_result_text(engine.query(q, filter), out);
  }
  return 0;
}

int cmd_ask(const AppConfig& config, const std::string& q, const std::string& filter, Format format,
            std::ostream& out) {
  const Engine engine = Engine::open(config);
  const Json payload = engine.ask_payload(q, filter);
  if (format == Format::json) {
    out << dump_payload(payload);
    return 0;
  }
  out << payload["answer"].get<std::string>();
  if (!payload["answer"].get<std::string>().ends_with('\n')) out << "\n";
  const auto& g = payload["grounding"];
  out << "\ngrounding ratio: " << fmt_double(g["ratio"].get<double>(), 4) << "\n";
  for (const auto& u : g["ungrounded"]) out << "ungrounded: " << quantity_label(u.get<Quantity>()) << "\n";
  for (const auto& e : payload.at("context").at("entries")) {
    out << e.at("citation").get<std::string>() << " " << e.at("chunk_id").get<std::string>() << "\n";
  }
  return 0;
}

struct DistillFlags {
  std::string objective;
  std::string out_path;
  std::string audit_path;
  bool interactive = false;
  std::optional<std::size_t> batch_size, max_iterations, chunks;
};

std::vector<std::string> audit_lines(const ExperienceDoc& doc) {
  std::vector<std::string> lines;
  for (const auto& r : doc.audit_trail) lines.push_back(Json(r).dump());
  return lines;
}

ReviewDecision prompt_review(const Draft& draft, const QualityReport& q, std::ostream& out) {
  out << render_experience(draft.content) << "\n";
  out << "grounding ratio " << fmt_double(q.grounding_ratio, 4) << ", entity coverage "
      << fmt_double(q.entity_coverage, 4) << "\n";
  for (const auto& u : q.ungrounded) out << "ungrounded: " << quantity_label(u) << "\n";
  for (;;) {
    out << "review [accept | reject | edit <file>]: " << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) return ReviewDecision{ReviewKind::reject, {}, "end of input"};
    const std::string cmd(text::trim(line));
    if (cmd == "accept") return ReviewDecision{ReviewKind::accept, {}, {}};
    if (cmd == "reject") return ReviewDecision{ReviewKind::reject, {}, {}};
    if (cmd.starts_with("edit ")) {
      try {
        return ReviewDecision{ReviewKind::edit, read_file(std::string(text::trim(cmd.substr(5)))), {}};
      } catch (const Error& e) {
        out << e.what() << "\n";
      }
    }
  }
}

int cmd_distill(const AppConfig& config, const DistillFlags& d, Format format, std::ostream& out) {
  const Engine engine = Engine::open(config);
  LoopConfig loop;
  loop.batch_size = d.batch_size.value_or(config.batch_size);
  loop.max_iterations = d.max_iterations.value_or(config.max_iterations);
  loop.review_mode = d.interactive ? ReviewMode::interactive : config.review_mode;
  if (loop.review_mode == ReviewMode::interactive) {
    loop.reviewer = [&out](const ExperienceDoc&, const Draft& draft, const QualityReport& q) {
      return prompt_review(draft, q, out);
    };
  }
  std::shared_ptr<LlmProvider> provider;
  if (config.generator.kind == GeneratorKind::external_service) {
    provider = make_provider(config.generator);
    loop.provider = provider.get();
  }
  const std::size_t limit = d.chunks.value_or(config.distill_chunks);
  const ChunkRetriever retriever = [&](std::string_view objective) {
    std::vector<Chunk> chunks;
    for (const auto& sc : engine.query(std::string(objective)).ranked_chunks) {
      if (chunks.size() >= limit) break;
      if (const Chunk* c = engine.chunk(sc.chunk_id)) chunks.push_back(*c);
    }
    return chunks;
  };
  const ExperienceDoc doc = run_loop(d.objective, retriever, loop);
  const std::string guide = render_experience(doc);
  std::string audit;
  for (const auto& line : audit_lines(doc)) audit += line + "\n";
  if (!d.out_path.empty()) {
    write_file(d.out_path, guide);
    write_file(d.audit_path.empty() ? d.out_path + ".audit.jsonl" : d.audit_path, audit);
  } else if (!d.audit_path.empty()) {
    write_file(d.audit_path, audit);
  }
  if (format == Format::json) {
    Json trail = Json::array();
    for (const auto& r : doc.audit_trail) trail.push_back(Json(r));
    out << dump_payload(Json{{"objective", doc.objective},
                             {"version", doc.version},
                             {"digest", doc.digest()},
                             {"guide", guide},
                             {"audit_trail", trail}});
  } else if (d.out_path.empty()) {
    out << guide;
  } else {
    out << "wrote " << d.out_path << " (version " << doc.version << ", " << doc.audit_trail.size()
        << " iterations, digest " << doc.digest() << ")\n";
  }
  return 0;
}

int cmd_replay(const AppConfig& config, const std::string& objective, const std::string& audit_path, Format format,
               std::ostream& out) {
  std::vector<IterationRecord> trail;
  std::size_t line_no = 0;
  const std::string audit = read_file(audit_path);
  for (const auto line : text::split_lines(audit)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      trail.push_back(Json::parse(line).get<IterationRecord>());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::InvalidArgument, audit_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  Store store = Store::open(config.store);
  const auto records = store.snapshot();
  std::map<std::string, const Chunk*, std::less<>> by_id;
  for (const auto& c : records->chunks) by_id.emplace(c.chunk_id, &c);
  const auto lookup = [&](std::string_view id) -> const Chunk* {
    auto it = by_id.find(id);
    return it == by_id.end() ? nullptr : it->second;
  };
  const ExperienceDoc doc = replay(objective, trail, lookup);
  if (format == Format::json) {
    out << dump_payload(Json{{"version", doc.version}, {"digest", doc.digest()}, {"guide", render_experience(doc)}});
  } else {
    out << render_experience(doc);
  }
  return 0;
}

std::vector<Weights> sweep_grid(double step) {
  std::vector<Weights> grid;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const int k = n - i - j;
      grid.push_back(Weights{i / static_cast<double>(n), j / static_cast<double>(n), k / static_cast<double>(n)});
    }
  }
  return grid;
}

int cmd_eval(const AppConfig& config, const std::string& queries_path, std::optional<double> sweep_step,
             Format format, std::ostream& out) {
  const auto queries = parse_query_set(read_file(queries_path));
  const Engine engine = Engine::open(config);
  const RetrievalRunner runner = [&](const EvalQuery& q, const Weights& w) {
    return engine.query(q.query, q.filter, w);
  };
  const std::vector<std::size_t> n_list{1, 5, 10, 20, 50, 100};
  if (sweep_step) {
    if (!(*sweep_step > 0.0 && *sweep_step <= 1.0)) throw UsageError("--sweep step must be in (0, 1]");
    const auto rows = weight_sweep(queries, sweep_grid(*sweep_step), runner, config.hit_depth, n_list);
    if (format == Format::json) {
      out << dump_payload(Json(rows));
    } else {
      out << sweep_csv(rows, n_list);
    }
    return 0;
  }
  const EvalRun run = evaluate(queries, runner, config.weights, config.hit_depth, n_list);
  if (format == Format::json) {
    Json payload = Json(run.hits);
    Json matches = Json::object();
    for (std::size_t i = 0; i < run.substantive_n.size(); ++i) {
      matches[std::to_string(run.substantive_n[i])] = run.substantive_counts[i];
    }
    payload["substantive_matches"] = matches;
    out << dump_payload(payload);
  } else if (format == Format::csv) {
    out << "id,label\n";
    for (const auto& [id, label] : run.hits.labels) out << id << "," << hit_label_name(label) << "\n";
  } else {
    for (const auto& [id, label] : run.hits.labels) out << id << "  " << hit_label_name(label) << "\n";
    const auto& r = run.hits.rates;
    out << "first-hit " << fmt_double(r.first_hit, 4) << "  substitute " << fmt_double(r.substitute, 4)
        << "  failed " << fmt_double(r.failed, 4) << "  (" << r.queries << " queries)\n";
    for (std::size_t i = 0; i < run.substantive_n.size(); ++i) {
      out << "matches@" << run.substantive_n[i] << " " << run.substantive_counts[i] << "\n";
    }
  }
  return 0;
}

int cmd_stats(const AppConfig& config, Format format, std::ostream& out) {
  Store store = Store::open(config.store);
  const CorpusStats s = store.corpus_stats();
  if (format == Format::json) {
    out << dump_payload(Json(s));
  } else if (format == Format::csv) {
    out << corpus_stats_csv(s);
  } else {
    out << "documents " << s.documents << "\n";
    for (const auto& [cat, t] : s.per_category) {
      out << category_name(cat) << ": " << t.tokens << " tokens, " << t.sentences << " sentences, " << t.quantities
          << " quantities\n";
    }
    out << "total: " << s.total.tokens << " tokens, " << s.total.sentences << " sentences, " << s.total.quantities
        << " quantities\n";
  }
  return 0;
}

int cmd_validate(const std::vector<std::string>& inputs, Format format, std::ostream& out) {
  bool all_ok = true;
  Json results = Json::array();
  for (const auto& file : article_files(inputs)) {
    const CheckedArticle checked = check_article_text(read_file(file));
    all_ok = all_ok && checked.report.ok();
    results.push_back(Json{{"file", file.string()}, {"report", checked.report}});
    if (format != Format::json) {
      out << file.string() << ": " << (checked.report.ok() ? "ok" : "invalid") << "\n";
      for (const auto& e : checked.report.errors) out << "  error " << e.code << " at " << e.location << ": " << e.message << "\n";
      for (const auto& w : checked.report.warnings) out << "  warning " << w.code << " at " << w.location << ": " << w.message << "\n";
    }
  }
  if (format == Format::json) out << dump_payload(results);
  return all_ok ? 0 : 1;
}

int cmd_serve(const AppConfig& config, const std::string& host, int port, std::ostream& out) {
  StoreLock lock(config.store);
  auto engine = std::make_shared<const Engine>(Engine::open(config));
  if (engine->stale()) throw Error(ErrorCode::StaleIndex, engine->stale_reason());
  ApiServer server(engine);
  const int bound = server.bind(host, port);
  out << "listening on " << host << ":" << bound << std::endl;
  server.listen();
  return 0;
}

void print_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << Json{{"error", code}, {"message", message}}.dump() << "\n";
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lsdb: lightly structured document database for materials literature"};
  app.name(args.empty() ? "lsdb" : args.front());
  app.require_subcommand(1);

  Flags f;
  app.add_option("--store", f.store, "Store directory");
  app.add_option("--config", f.config, "JSON config file (default: $LSDB_CONFIG)");
  app.add_option("--format", f.format, "Output format")->check(CLI::IsMember({"text", "json", "csv"}));
  app.add_option("--w-sem", f.w_sem, "Semantic fusion weight");
  app.add_option("--w-lex", f.w_lex, "Lexical fusion weight");
  app.add_option("--w-rel", f.w_rel, "Relational fusion weight");
  app.add_option("--pool", f.pool, "Candidate pool size per axis");
  app.add_option("--cap", f.cap, "Chunks kept per article");
  app.add_option("--tau", f.tau, "Relative score threshold");
  app.add_option("--budget", f.budget, "Context token budget");
  app.add_flag("--parallel", f.parallel, "Evaluate retrieval axes concurrently");
  app.add_flag("--rewrite", f.rewrite, "Rewrite queries through the generator provider");
  app.add_option("--prompt-template", f.prompt_template, "Generation prompt template file");
  app.fallthrough();

  std::vector<std::string> inputs;
  auto* ingest = app.add_subcommand("ingest", "Parse, validate and store article files");
  ingest->add_option("paths", inputs, "Article files or directories")->required();

  auto* index = app.add_subcommand("index", "Index maintenance");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "Build all three indexes");

  std::string q, filter;
  auto* query = app.add_subcommand("query", "Composite retrieval");
  query->add_option("query", q, "Query text")->required();
  query->add_option("--filter", filter, "Hard filter in the condition grammar");

  auto* ask = app.add_subcommand("ask", "Retrieval-augmented answer with grounding check");
  ask->add_option("query", q, "Question")->required();
  ask->add_option("--filter", filter, "Hard filter in the condition grammar");

  DistillFlags d;
  auto* distill = app.add_subcommand("distill", "Experience distillation loop");
  distill->add_option("--objective", d.objective, "Distillation objective")->required();
  distill->add_option("--out", d.out_path, "Guide output file");
  distill->add_option("--audit", d.audit_path, "Audit JSONL output file");
  distill->add_flag("--interactive", d.interactive, "Review each draft on the terminal");
  distill->add_option("--batch-size", d.batch_size, "Chunks per iteration");
  distill->add_option("--max-iterations", d.max_iterations, "Iteration limit");
  distill->add_option("--chunks", d.chunks, "Retrieved chunks to distill");

  std::string objective, audit_path;
  auto* replay_cmd = app.add_subcommand("replay", "Rebuild a guide from its audit trail");
  replay_cmd->add_option("--objective", objective, "Distillation objective")->required();
  replay_cmd->add_option("--audit", audit_path, "Audit JSONL file")->required();

  std::string queries_path;
  std::optional<double> sweep_step;
  auto* eval = app.add_subcommand("eval", "Hit-rate evaluation over a query set");
  eval->add_option("--queries", queries_path, "Query set JSONL")->required();
  eval->add_option("--sweep", sweep_step, "Run a fusion-weight sweep with this grid step");

  auto* stats = app.add_subcommand("stats", "Corpus statistics");

  std::vector<std::string> validate_inputs;
  auto* validate = app.add_subcommand("validate", "Check article files against the schema");
  validate->add_option("paths", validate_inputs, "Article files or directories")->required();

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP API");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "Usage", e.what());
    return 2;
  }

  const Format format = parse_format(f.format);
  try {
    if (*validate) return cmd_validate(validate_inputs, format, out);
    const AppConfig config = resolve_config(f);
    if (*ingest) return cmd_ingest(config, inputs, format, out, err);
    if (*index && *index_build) return cmd_index_build(config, format, out);
    if (*query) return cmd_query(config, q, filter, format, out);
    if (*ask) return cmd_ask(config, q, filter, format, out);
    if (*distill) return cmd_distill(config, d, format, out);
    if (*replay_cmd) return cmd_replay(config, objective, audit_path, format, out);
    if (*eval) return cmd_eval(config, queries_path, sweep_step, format, out);
    if (*stats) return cmd_stats(config, format, out);
    if (*serve) return cmd_serve(config, host, port, out);
  } catch (const UsageError& e) {
    print_error(err, "Usage", e.what());
    return 2;
  } catch (const Error& e) {
    print_error(err, to_string(e.code()), e.what());
    return e.code() == ErrorCode::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    print_error(err, "Internal", e.what());
    return 1;
  }
  print_error(err, "Usage", "no command given");
  return 2;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

} // namespace lsdb::cli
