#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "lsdb/docmodel.hpp"
#include "lsdb/error.hpp"
#include "lsdb/lexindex.hpp"
#include "lsdb/vecindex.hpp"
#include "oracles.hpp"

using namespace lsdb;

namespace {

EmbeddingVector random_unit(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<double> n(0, 1);
  EmbeddingVector v;
  double s = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    v.components.push_back(n(rng));
    s += v.components.back() * v.components.back();
  }
  for (auto& c : v.components) c /= std::sqrt(s);
  return v;
}

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += a.components[i] * b.components[i];
  return s;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvalidArgument;
}

} // namespace

TEST(Embed, DeterministicAndNormalized) {
  const EmbedderSpec spec;
  const auto a = embed_text("Ball milling of BNNS at 500 rpm", spec);
  EXPECT_EQ(a, embed_text("Ball milling of BNNS at 500 rpm", spec));
  EXPECT_EQ(a.dim(), 256u);
  EXPECT_NEAR(dot(a, a), 1.0, 1e-12);
  const auto empty = embed_text("", spec);
  EXPECT_TRUE(empty.is_zero());
  EXPECT_EQ(empty.dim(), 256u);
}

TEST(Embed, DisjointTokensWithoutCollisionsAreOrthogonal) {
  const std::string x = "boron nitride sheets";
  const std::string y = "thermal conductivity epoxy";
  std::set<std::size_t> bx, by;
  for (const auto& t : tokenize(x)) bx.insert(hash_bucket(t, 256));
  for (const auto& t : tokenize(y)) by.insert(hash_bucket(t, 256));
  for (auto b : bx) ASSERT_EQ(by.count(b), 0u) << "fixture words collide; pick others";
  EXPECT_EQ(dot(embed_text(x, {}), embed_text(y, {})), 0.0);
}

TEST(Embed, FixtureVocabularyBucketsMatchFnv) {
  // FNV-1a 64 reference.
  auto fnv = [](const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  };
  for (const char* w : {"bnns", "milling", "500", "rpm", "thickness"}) {
    EXPECT_EQ(hash_bucket(w, 256), fnv(w) % 256) << w;
  }
}

TEST(Similarity, Mapping) {
  EXPECT_EQ(similarity(0.0), 1.0);
  EXPECT_EQ(similarity(1.0), 0.5);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> d(0, 10);
  for (int i = 0; i < 1000; ++i) {
    const double a = d(rng), b = d(rng);
    if (a < b) EXPECT_GT(similarity(a), similarity(b));
    EXPECT_GT(similarity(a), 0.0);
    EXPECT_LE(similarity(a), 1.0);
  }
}

TEST(Knn, EqualsExhaustiveScan) {
  std::mt19937 rng(17);
  const std::size_t dim = 16;
  FlatL2Index idx(EmbedderSpec{EmbedderKind::hashing_default, dim});
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (int i = 0; i < 100; ++i) {
    auto v = random_unit(rng, dim);
    char id[16];
    std::snprintf(id, sizeof id, "v%03d", 99 - i);
    rows.emplace_back(id, v.components);
    idx.add(id, v);
  }
  // Exact duplicates force the id tie-break.
  rows.emplace_back("a-dup", rows[5].second);
  idx.add("a-dup", EmbeddingVector{rows[5].second});
  for (int qn = 0; qn < 20; ++qn) {
    const auto q = qn == 0 ? EmbeddingVector{rows[5].second} : random_unit(rng, dim);
    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}, rows.size(), rows.size() + 10}) {
      const auto got = idx.knn(q, k);
      const auto want = oracle::knn(rows, q.components, k);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].chunk_id, want[i].id);
        EXPECT_NEAR(got[i].distance, want[i].distance, 1e-12);
      }
    }
  }
  const auto exact = idx.knn(EmbeddingVector{rows[5].second}, 2);
  EXPECT_EQ(exact[0].chunk_id, "a-dup");
  EXPECT_EQ(exact[0].distance, 0.0);
  EXPECT_EQ(exact[1].chunk_id, rows[5].first);
}

TEST(Knn, ExactTextRanksFirst) {
  std::vector<Chunk> chunks;
  for (const char* t : {"ball milling of bnns", "sonication in ipa", "thermal conductivity of tpu"}) {
    Chunk c;
    c.chunk_id = std::string("x") + std::to_string(chunks.size()) + "#Preparation/0";
    c.text = t;
    chunks.push_back(c);
  }
  const auto idx = build_vector_index(chunks, Embedder(EmbedderSpec{}));
  const auto r = idx.knn(embed_text("sonication in ipa", {}), 10);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].chunk_id, "x1#Preparation/0");
  EXPECT_NEAR(r[0].distance, 0.0, 1e-12);
  EXPECT_TRUE(FlatL2Index().knn(embed_text("x", {}), 3).empty());
}

TEST(Knn, ErrorsAndPersistence) {
  FlatL2Index idx(EmbedderSpec{EmbedderKind::hashing_default, 4});
  idx.add("a", EmbeddingVector{{1, 0, 0, 0}});
  EXPECT_EQ(code_of([&] { idx.add("a", EmbeddingVector{{0, 1, 0, 0}}); }), ErrorCode::DuplicateChunkId);
  EXPECT_EQ(code_of([&] { idx.add("b", EmbeddingVector{{0, 1}}); }), ErrorCode::DimensionMismatch);
  idx.add("b", EmbeddingVector{{0, 1, 0, 0}});
  std::stringstream buf;
  idx.save(buf);
  const FlatL2Index back = FlatL2Index::load(buf);
  EXPECT_EQ(back.ids(), idx.ids());
  const EmbeddingVector q{{0.3, 0.7, 0.1, 0.2}};
  EXPECT_EQ(back.distance_to("a", q), idx.distance_to("a", q));
  EXPECT_FALSE(back.distance_to("zz", q).has_value());
}

TEST(Embed, ExternalService) {
  httplib::Server server;
  server.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const auto dim = body.at("dim").get<std::size_t>();
    std::vector<double> v(dim, 0.0);
    v[body.at("text").get<std::string>().size() % dim] = 1.0;
    if (body.at("text") == "short") v.resize(2);
    res.set_content(nlohmann::json{{"vector", v}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  EmbedderSpec spec;
  spec.kind = EmbedderKind::external_service;
  spec.dim = 8;
  spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/embed";
  const auto v = embed_text("abc", spec);
  EXPECT_EQ(v.dim(), 8u);
  EXPECT_EQ(v.components[3], 1.0);
  EXPECT_EQ(code_of([&] { embed_text("short", spec); }), ErrorCode::DimensionMismatch);
  spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/missing";
  EXPECT_EQ(code_of([&] { embed_text("abc", spec); }), ErrorCode::EmbedderUnavailable);
  server.stop();
  t.join();
}
