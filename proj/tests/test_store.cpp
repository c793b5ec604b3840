#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>

#include "lsdb/error.hpp"
#include "lsdb/store.hpp"
#include "lsdb/text.hpp"
#include "test_util.hpp"

using namespace lsdb;

namespace {

ErrorCode error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvalidArgument;
}

std::vector<std::pair<std::string, std::string>> issue_keys(const std::vector<Issue>& issues) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& i : issues) out.emplace_back(i.location, i.code);
  std::sort(out.begin(), out.end());
  return out;
}

// Reference checker for the reference-level faults injected below, written as
// plain linear scans.
std::vector<std::pair<std::string, std::string>> reference_check(const StoreRecords& r) {
  std::vector<std::pair<std::string, std::string>> out;
  auto has_article = [&](const std::string& id) {
    for (const auto& a : r.articles) {
      if (a.meta.article_id == id) return true;
    }
    return false;
  };
  auto has_chunk = [&](const std::string& id) {
    for (const auto& c : r.chunks) {
      if (c.chunk_id == id) return true;
    }
    return false;
  };
  auto has_entity = [&](const std::string& id) {
    for (const auto& e : r.entities) {
      if (e.entity_id == id) return true;
    }
    return false;
  };
  for (const auto& c : r.chunks) {
    if (!has_article(c.article_id)) out.emplace_back("chunk " + c.chunk_id, "DanglingChunk");
  }
  for (std::size_t i = 0; i < r.entities.size(); ++i) {
    const auto& e = r.entities[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (r.entities[j].entity_id == e.entity_id) {
        out.emplace_back("entity " + e.entity_id, "DuplicateEntity");
        break;
      }
    }
    if (!has_chunk(e.chunk_id)) out.emplace_back("entity " + e.entity_id, "DanglingEntity");
  }
  for (const auto& n : r.nodes) {
    const bool ok = n.type == "chunk" ? has_chunk(n.ref) : has_entity(n.ref);
    if (!ok) out.emplace_back("node " + std::to_string(n.node_id), "DanglingNode");
  }
  const auto node_count = static_cast<std::int64_t>(r.nodes.size());
  for (std::size_t i = 0; i < r.edges.size(); ++i) {
    const auto& e = r.edges[i];
    if (e.source < 0 || e.source >= node_count || e.target < 0 || e.target >= node_count) {
      out.emplace_back("edge " + std::to_string(i), "DanglingEdge");
    }
    if (e.source == e.target) out.emplace_back("edge " + std::to_string(i), "SelfLoop");
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t record_count(const StoreRecords& r) {
  return r.articles.size() + r.chunks.size() + r.entities.size() + r.nodes.size() + r.edges.size();
}

} // namespace

TEST(Store, UpsertThenGetRoundTrips) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  const Article a = fixture::article("bnns-01");
  EXPECT_EQ(store.upsert_article(a), "bnns-01");
  EXPECT_EQ(store.get_article("bnns-01"), a);
  EXPECT_TRUE(store.has_article("bnns-01"));
  EXPECT_EQ(error_code_of([&] { store.get_article("nope"); }), ErrorCode::UnknownArticle);
}

TEST(Store, PersistsAcrossOpen) {
  fixture::TempDir dir;
  {
    Store store = Store::open(dir.path());
    store.upsert_article(fixture::article("bnns-02"));
  }
  Store again = Store::open(dir.path());
  EXPECT_EQ(again.get_article("bnns-02"), fixture::article("bnns-02"));
  for (const char* f : {"manifest.json", "articles.jsonl", "chunks.jsonl", "entities.jsonl", "kg_nodes.jsonl",
                        "kg_edges.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
}

TEST(Store, TamperedFileIsRejectedOnOpen) {
  fixture::TempDir dir;
  {
    Store store = Store::open(dir.path());
    store.upsert_article(fixture::article("bnns-02"));
  }
  std::ofstream(dir / "chunks.jsonl", std::ios::app) << "\n";
  EXPECT_EQ(error_code_of([&] { Store::open(dir.path()); }), ErrorCode::StorageFailure);
}

TEST(Store, ReupsertReplacesRecords) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  Article a = fixture::article("bnns-01");
  store.upsert_article(a);
  const auto before = store.get_chunks("bnns-01");
  a.modules.resize(1);
  a.modules[0].sections.resize(1);
  a.modules[0].sections[0].body = "Replaced text with a speed of 700 rpm.";
  store.upsert_article(a);
  const auto after = store.get_chunks("bnns-01");
  ASSERT_EQ(after.size(), 1u);
  EXPECT_NE(after[0].text, before[0].text);
  const auto snap = store.snapshot();
  for (const auto& e : snap->entities) EXPECT_EQ(e.chunk_id, after[0].chunk_id);
  for (const auto& n : snap->nodes) {
    if (n.type == "chunk") EXPECT_EQ(n.ref, after[0].chunk_id);
  }
  EXPECT_TRUE(store.integrity_check().ok());
}

TEST(Store, FixtureCountsMatchHandCount) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  for (const auto& f : fixture::article_files()) store.upsert_article(parse_article(fixture::read_text(f)));
  const StoreManifest m = store.manifest();
  EXPECT_EQ(m.article_count, 15u);
  // 14 articles x (Process, Product, Results, Instrument, Mechanism) plus
  // bnns-15 with Process, Results, Instrument, Mechanism, Theory, Thermal properties.
  EXPECT_EQ(m.chunk_count, 76u);
  const auto snap = store.snapshot();
  EXPECT_EQ(m.entity_count, snap->entities.size());
  EXPECT_EQ(m.node_count, snap->nodes.size());
  EXPECT_EQ(m.edge_count, snap->edges.size());
  EXPECT_TRUE(store.any_index_stale());
  EXPECT_TRUE(store.integrity_check().ok());
}

TEST(Store, SchemaInvalidRejected) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  Article a = parse_article("---\narticle_id: a1\n---\n# Recipe\n## Step\nx\n");
  EXPECT_EQ(error_code_of([&] { store.upsert_article(a); }), ErrorCode::SchemaInvalid);
  EXPECT_FALSE(store.has_article("a1"));
}

TEST(Store, GetChunksFilter) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  store.upsert_article(parse_article(
      "---\narticle_id: a1\n---\n# Characterization\n## Results\nR.\n# Preparation\n## Process\nP.\n## Product\nQ.\n"));
  const auto all = store.get_chunks("a1");
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].chunk_id, "a1#Preparation/0");
  EXPECT_EQ(all[2].chunk_id, "a1#Characterization/0");
  const auto prep = store.get_chunks("a1", Category::Preparation);
  ASSERT_EQ(prep.size(), 2u);
  for (const auto& c : prep) EXPECT_EQ(c.category, Category::Preparation);
  EXPECT_TRUE(store.get_chunks("a1", Category::Modeling).empty());
  EXPECT_EQ(error_code_of([&] { store.get_chunks("zz"); }), ErrorCode::UnknownArticle);
}

TEST(Store, RemoveArticle) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  store.upsert_article(fixture::article("bnns-01"));
  store.upsert_article(fixture::article("bnns-02"));
  EXPECT_TRUE(store.remove_article("bnns-01"));
  EXPECT_FALSE(store.remove_article("bnns-01"));
  const auto snap = store.snapshot();
  for (const auto& c : snap->chunks) EXPECT_EQ(c.article_id, "bnns-02");
  EXPECT_TRUE(store.integrity_check().ok());
}

TEST(Integrity, InjectedDanglingEntityNamed) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  store.upsert_article(fixture::article("bnns-01"));
  StoreRecords r = *store.snapshot();
  EXPECT_TRUE(check_integrity(r).ok());
  ASSERT_FALSE(r.entities.empty());
  r.entities[0].chunk_id = "ghost#Preparation/9";
  const auto report = check_integrity(r);
  ASSERT_EQ(report.errors.size(), 1u);
  EXPECT_EQ(report.errors[0].code, "DanglingEntity");
  EXPECT_NE(report.errors[0].message.find(r.entities[0].entity_id), std::string::npos);
}

TEST(Integrity, RandomizedStoreAgreesWithReference) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  std::mt19937 rng(5);
  for (int i = 0; i < 40; ++i) store.upsert_article(fixture::random_article(rng, "s" + std::to_string(i)));
  const StoreRecords base = *store.snapshot();
  ASSERT_GE(record_count(base), 1000u);
  EXPECT_TRUE(check_integrity(base).ok());
  for (int trial = 0; trial < 50; ++trial) {
    StoreRecords r = base;
    const int faults = 1 + static_cast<int>(rng() % 5);
    for (int f = 0; f < faults; ++f) {
      switch (rng() % 6) {
        case 0:
          r.entities[rng() % r.entities.size()].chunk_id = "ghost#Preparation/" + std::to_string(rng() % 3);
          break;
        case 1:
          r.edges[rng() % r.edges.size()].target = static_cast<std::int64_t>(r.nodes.size() + rng() % 5);
          break;
        case 2: {
          auto& e = r.edges[rng() % r.edges.size()];
          e.target = e.source;
          break;
        }
        case 3:
          r.entities[rng() % r.entities.size()].entity_id = r.entities[rng() % r.entities.size()].entity_id;
          break;
        case 4:
          r.articles.erase(r.articles.begin() + static_cast<std::ptrdiff_t>(rng() % r.articles.size()));
          break;
        default:
          r.chunks.erase(r.chunks.begin() + static_cast<std::ptrdiff_t>(rng() % r.chunks.size()));
          break;
      }
    }
    ASSERT_EQ(issue_keys(check_integrity(r).errors), reference_check(r)) << "trial " << trial;
  }
}

TEST(Stats, EmptyStoreIsZero) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  const CorpusStats s = store.corpus_stats();
  EXPECT_EQ(s.documents, 0u);
  EXPECT_EQ(s.total.tokens, 0u);
  EXPECT_EQ(s.total.sentences, 0u);
  EXPECT_EQ(s.total.quantities, 0u);
}

TEST(Stats, HandCountedTotals) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  // "Process" + 17 + 19 body tokens.
  store.upsert_article(parse_article(
      "---\narticle_id: x1\n---\n# Preparation\n## Process\nHexagonal boron nitride and urea were milled in a "
      "planetary mill at 500 rpm for 20 h. The powder was then washed with water and dried in air at 80 °C for 12 h "
      "before use.\n"));
  // "Results" + 14 body tokens.
  store.upsert_article(parse_article(
      "---\narticle_id: x2\n---\n# Characterization\n## Results\nThe exfoliated sheets had a thickness of 40 nm "
      "after 12 h of milling\n"));
  const CorpusStats s = store.corpus_stats();
  EXPECT_EQ(s.documents, 2u);
  EXPECT_EQ(s.per_category.at(Category::Preparation).tokens, 37u);
  EXPECT_EQ(s.per_category.at(Category::Characterization).tokens, 15u);
  EXPECT_EQ(s.total.tokens, 52u);
  EXPECT_EQ(s.total.quantities, 6u);
}

TEST(Stats, TotalsAndHistogramsConsistentAndOrderInvariant) {
  std::vector<Article> arts;
  for (const auto& f : fixture::article_files()) arts.push_back(parse_article(fixture::read_text(f)));
  CorpusStats first;
  for (int pass = 0; pass < 2; ++pass) {
    fixture::TempDir dir;
    Store store = Store::open(dir.path());
    if (pass == 1) std::reverse(arts.begin(), arts.end());
    for (const auto& a : arts) store.upsert_article(a);
    const CorpusStats s = store.corpus_stats();
    CategoryTotals sum;
    for (const auto& [cat, t] : s.per_category) {
      sum.tokens += t.tokens;
      sum.sentences += t.sentences;
      sum.quantities += t.quantities;
    }
    EXPECT_EQ(sum.tokens, s.total.tokens);
    EXPECT_EQ(sum.sentences, s.total.sentences);
    EXPECT_EQ(sum.quantities, s.total.quantities);
    for (const Histogram* h : {&s.token_histogram, &s.sentence_histogram, &s.quantity_histogram}) {
      std::size_t n = 0;
      for (auto c : h->counts) n += c;
      EXPECT_EQ(n, s.documents);
    }
    if (pass == 0) {
      first = s;
    } else {
      EXPECT_EQ(s.total.tokens, first.total.tokens);
      EXPECT_EQ(s.token_histogram.counts, first.token_histogram.counts);
    }
  }
}

TEST(Store, WritersRefuseWhileLocked) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  {
    StoreLock lock(dir.path());
    EXPECT_TRUE(StoreLock::held(dir.path()));
    EXPECT_EQ(error_code_of([&] { store.upsert_article(fixture::article("bnns-01")); }), ErrorCode::StoreLocked);
    EXPECT_EQ(error_code_of([&] { StoreLock second(dir.path()); }), ErrorCode::StoreLocked);
  }
  EXPECT_FALSE(StoreLock::held(dir.path()));
  EXPECT_NO_THROW(store.upsert_article(fixture::article("bnns-01")));
}

TEST(Store, ReadersNeverSeePartialWrites) {
  fixture::TempDir dir;
  Store store = Store::open(dir.path());
  std::vector<Article> arts;
  for (const auto& f : fixture::article_files()) arts.push_back(parse_article(fixture::read_text(f)));
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!done) {
      const auto snap = store.snapshot();
      if (!check_integrity(*snap).ok()) ++bad;
    }
  });
  for (int round = 0; round < 2; ++round) {
    for (const auto& a : arts) store.upsert_article(a);
  }
  done = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
}
