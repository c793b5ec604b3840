#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "lsdb/app.hpp"
#include "lsdb/cli.hpp"
#include "lsdb/server.hpp"
#include "test_util.hpp"

using namespace lsdb;
using fixture::TempDir;
using nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome lsdb_run(std::vector<std::string> args) {
  args.insert(args.begin(), "lsdb");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string store_flag(const TempDir& dir) { return (dir / "store").string(); }

void ingest_fixture(const TempDir& dir) {
  const auto r = lsdb_run({"--store", store_flag(dir), "ingest", (fixture::dir() / "articles").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto b = lsdb_run({"--store", store_flag(dir), "index", "build"});
  ASSERT_EQ(b.code, 0) << b.err;
}

std::set<std::string> articles_of(const std::string& payload) {
  std::set<std::string> ids;
  const json j = json::parse(payload);
  for (const auto& a : j["result"]["articles"]) ids.insert(a["article_id"].get<std::string>());
  for (const auto& c : j["result"]["ranked_chunks"]) ids.insert(c["article_id"].get<std::string>());
  return ids;
}

const std::set<std::string> kThin = {"bnns-01", "bnns-02", "bnns-04", "bnns-06", "bnns-08", "bnns-10", "bnns-13"};

class Server {
 public:
  explicit Server(std::shared_ptr<const Engine> engine) : api_(std::move(engine)) {
    port_ = api_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { api_.listen(); });
  }
  ~Server() {
    api_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(30, 0);
    return c;
  }

 private:
  ApiServer api_;
  int port_ = 0;
  std::thread thread_;
};

std::shared_ptr<const Engine> open_engine(const TempDir& dir) {
  AppConfig config;
  config.store = dir / "store";
  return std::make_shared<const Engine>(Engine::open(config));
}

} // namespace

TEST(Cli, FilteredQueryIsDeterministic) {
  TempDir dir;
  ingest_fixture(dir);
  const std::vector<std::string> args = {"--store", store_flag(dir), "--format", "json", "query",
                                         "ball milling exfoliation", "--filter", "thickness<100nm"};
  const auto first = lsdb_run(args);
  ASSERT_EQ(first.code, 0) << first.err;
  const auto ids = articles_of(first.out);
  EXPECT_FALSE(ids.empty());
  for (const auto& id : ids) EXPECT_TRUE(kThin.count(id)) << id;

  EXPECT_EQ(lsdb_run(args).out, first.out);
  auto parallel = args;
  parallel.insert(parallel.begin(), "--parallel");
  const auto p = lsdb_run(parallel);
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(p.out, first.out);
}

TEST(Cli, TextQueryListsRankedArticles) {
  TempDir dir;
  ingest_fixture(dir);
  const auto r = lsdb_run({"--store", store_flag(dir), "query", "thermal conductivity of BNNS"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("1. bnns-", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("fused"), std::string::npos);
}

TEST(Cli, StatsOnEmptyStore) {
  TempDir dir;
  const auto r = lsdb_run({"--store", store_flag(dir), "--format", "csv", "stats"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "category,tokens,sentences,quantities\n"
            "Preparation,0,0,0\nCharacterization,0,0,0\nMechanism,0,0,0\nModeling,0,0,0\nTables,0,0,0\n"
            "total,0,0,0\n");
}

TEST(Cli, StatsCountsIngestedDocuments) {
  TempDir dir;
  ingest_fixture(dir);
  const auto r = lsdb_run({"--store", store_flag(dir), "--format", "json", "stats"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["documents"].get<int>(), 15);
}

TEST(Cli, AskWithMockGeneratorIsGrounded) {
  TempDir dir;
  ingest_fixture(dir);
  const auto r = lsdb_run({"--store", store_flag(dir), "ask", "What thickness do ball-milled BNNS reach?"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("grounding ratio: 1.0000\n"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("ungrounded:"), std::string::npos);
  EXPECT_NE(r.out.find("[Ref 1] "), std::string::npos);

  const auto j = lsdb_run({"--store", store_flag(dir), "--format", "json", "ask", "BNNS thickness < 100 nm"});
  ASSERT_EQ(j.code, 0) << j.err;
  const json payload = json::parse(j.out);
  EXPECT_DOUBLE_EQ(payload["grounding"]["ratio"].get<double>(), 1.0);
  EXPECT_EQ(payload["prompt_sha256"].get<std::string>().size(), 64u);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(lsdb_run({}).code, 2);
  EXPECT_EQ(lsdb_run({"frobnicate"}).code, 2);
  EXPECT_EQ(lsdb_run({"--format", "yaml", "stats"}).code, 2);
  EXPECT_EQ(lsdb_run({"--store", store_flag(dir), "query"}).code, 2);
  EXPECT_EQ(lsdb_run({"--store", store_flag(dir), "ingest", (dir / "missing.md").string()}).code, 2);
  const auto partial = lsdb_run({"--store", store_flag(dir), "--w-sem", "0.5", "stats"});
  EXPECT_EQ(partial.code, 2);
  EXPECT_NE(partial.err.find("InvalidConfig"), std::string::npos);
  EXPECT_EQ(lsdb_run({"--store", store_flag(dir), "--w-sem", "0.5", "--w-lex", "0.5", "--w-rel", "0.5", "stats"}).code,
            2);
  EXPECT_EQ(lsdb_run({"--help"}).code, 0);
}

TEST(Cli, IngestFailureIsReportedPerFile) {
  TempDir dir;
  fixture::write_text(dir / "broken.md", "# No metadata\n\nJust text.\n");
  const auto r = lsdb_run({"--store", store_flag(dir), "--format", "json", "ingest", (dir / "broken.md").string(),
                           (fixture::dir() / "articles" / "bnns-01.md").string()});
  EXPECT_EQ(r.code, 1);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["ingested"].size(), 1u);
  ASSERT_EQ(j["failed"].size(), 1u);
  EXPECT_FALSE(j["failed"][0]["error"].get<std::string>().empty());
  EXPECT_NE(r.err.find("broken.md"), std::string::npos);
}

TEST(Cli, ValidateReportsSchemaErrors) {
  TempDir dir;
  fixture::write_text(dir / "broken.md", "# No metadata\n\nJust text.\n");
  EXPECT_EQ(lsdb_run({"validate", (fixture::dir() / "articles").string()}).code, 0);
  const auto r = lsdb_run({"validate", (dir / "broken.md").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("invalid"), std::string::npos);
}

TEST(Cli, QueryBeforeIndexBuildIsStale) {
  TempDir dir;
  ingest_fixture(dir);
  ASSERT_EQ(lsdb_run({"--store", store_flag(dir), "ingest", (fixture::dir() / "experience" / "trial-1.md").string()})
                .code,
            0);
  const auto r = lsdb_run({"--store", store_flag(dir), "query", "ball milling"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("StaleIndex"), std::string::npos) << r.err;
  ASSERT_EQ(lsdb_run({"--store", store_flag(dir), "index", "build"}).code, 0);
  EXPECT_EQ(lsdb_run({"--store", store_flag(dir), "query", "ball milling"}).code, 0);
}

TEST(Cli, EvalOverFixtureQueries) {
  TempDir dir;
  ingest_fixture(dir);
  const std::string queries = (fixture::dir() / "eval" / "queries.jsonl").string();
  const auto csv = lsdb_run({"--store", store_flag(dir), "--format", "csv", "eval", "--queries", queries});
  ASSERT_EQ(csv.code, 0) << csv.err;
  EXPECT_EQ(csv.out.rfind("id,label\n", 0), 0u);
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 13);

  const auto j = lsdb_run({"--store", store_flag(dir), "--format", "json", "eval", "--queries", queries});
  ASSERT_EQ(j.code, 0) << j.err;
  const json payload = json::parse(j.out);
  EXPECT_EQ(payload["rates"]["queries"].get<int>(), 12);
  EXPECT_TRUE(payload["substantive_matches"].contains("100"));

  const auto sweep = lsdb_run({"--store", store_flag(dir), "eval", "--queries", queries, "--sweep", "0.5"});
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  // Step 0.5 gives six weight triples plus the header.
  EXPECT_EQ(std::count(sweep.out.begin(), sweep.out.end(), '\n'), 7);
  EXPECT_EQ(lsdb_run({"--store", store_flag(dir), "eval", "--queries", queries, "--sweep", "0"}).code, 2);
}

TEST(Cli, DistillThenReplayReproducesTheGuide) {
  TempDir dir;
  const auto exp = fixture::dir() / "experience";
  ASSERT_EQ(lsdb_run({"--store", store_flag(dir), "ingest", (exp / "trial-1.md").string(), (exp / "trial-2.md").string(),
                      (exp / "trial-3.md").string()})
                .code,
            0);
  ASSERT_EQ(lsdb_run({"--store", store_flag(dir), "index", "build"}).code, 0);
  const std::string objective = "exfoliate BNNS by ball milling below 50 nm";
  const auto d = lsdb_run({"--store", store_flag(dir), "--format", "json", "distill", "--objective", objective,
                           "--batch-size", "3", "--out", (dir / "guide.md").string(), "--audit",
                           (dir / "audit.jsonl").string()});
  ASSERT_EQ(d.code, 0) << d.err;
  const json dj = json::parse(d.out);
  EXPECT_EQ(fixture::read_text(dir / "guide.md"), dj["guide"].get<std::string>());

  const auto r = lsdb_run({"--store", store_flag(dir), "--format", "json", "replay", "--objective", objective,
                           "--audit", (dir / "audit.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rj = json::parse(r.out);
  EXPECT_EQ(rj["digest"], dj["digest"]);
  EXPECT_EQ(rj["version"], dj["version"]);
  EXPECT_EQ(rj["guide"], dj["guide"]);

  fixture::write_text(dir / "bad.jsonl", "{not json\n");
  EXPECT_EQ(lsdb_run({"--store", store_flag(dir), "replay", "--objective", objective, "--audit",
                      (dir / "bad.jsonl").string()})
                .code,
            1);
}

TEST(Http, QueryMatchesCliByteForByte) {
  TempDir dir;
  ingest_fixture(dir);
  const std::string text = "ball milling exfoliation";
  const std::string filter = "thickness<100nm";
  const auto cli_out = lsdb_run({"--store", store_flag(dir), "--format", "json", "query", text, "--filter", filter});
  ASSERT_EQ(cli_out.code, 0) << cli_out.err;
  const auto cli_plain = lsdb_run({"--store", store_flag(dir), "--format", "json", "query", text});

  Server server(open_engine(dir));
  auto client = server.client();
  const auto res = client.Post("/query", json{{"query", text}, {"filter", filter}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, cli_out.out);
  const auto plain = client.Post("/query", json{{"query", text}}.dump(), "application/json");
  ASSERT_TRUE(plain);
  EXPECT_EQ(plain->body, cli_plain.out);

  const auto ask_cli = lsdb_run({"--store", store_flag(dir), "--format", "json", "ask", text});
  const auto ask = client.Post("/ask", json{{"query", text}}.dump(), "application/json");
  ASSERT_TRUE(ask);
  EXPECT_EQ(ask->status, 200);
  EXPECT_EQ(ask->body, ask_cli.out);
}

TEST(Http, ArticlesStatsAndErrors) {
  TempDir dir;
  ingest_fixture(dir);
  Server server(open_engine(dir));
  auto client = server.client();

  const auto article = client.Get("/articles/bnns-03");
  ASSERT_TRUE(article);
  EXPECT_EQ(article->status, 200);
  EXPECT_EQ(json::parse(article->body)["meta"]["article_id"], "bnns-03");

  const auto missing = client.Get("/articles/bnns-99");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body)["error"], "UnknownArticle");

  const auto stats = client.Get("/stats");
  ASSERT_TRUE(stats);
  EXPECT_EQ(stats->status, 200);
  EXPECT_EQ(json::parse(stats->body)["documents"].get<int>(), 15);

  for (const std::string body : {"{not json", "[1,2]", R"({"query": 3})", R"({"query": "x", "filter": 1})"}) {
    const auto bad = client.Post("/query", body, "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400) << body;
  }
  const auto empty = client.Post("/query", R"({"query": "   "})", "application/json");
  ASSERT_TRUE(empty);
  EXPECT_EQ(empty->status, 400);
  EXPECT_EQ(json::parse(empty->body)["error"], "EmptyQuery");

  const auto route = client.Get("/nowhere");
  ASSERT_TRUE(route);
  EXPECT_EQ(route->status, 404);
}

TEST(Http, StaleIndexIsConflict) {
  TempDir dir;
  ASSERT_EQ(lsdb_run({"--store", store_flag(dir), "ingest", (fixture::dir() / "articles").string()}).code, 0);
  Server server(open_engine(dir));
  auto client = server.client();
  const auto res = client.Post("/query", R"({"query": "ball milling"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(json::parse(res->body)["error"], "StaleIndex");
}
