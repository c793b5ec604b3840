#include <gtest/gtest.h>

#include <random>

#include "corpus.hpp"
#include "lsdb/error.hpp"
#include "lsdb/experience.hpp"
#include "lsdb/json_io.hpp"
#include "lsdb/text.hpp"

using namespace lsdb;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::InvalidArgument;
}

const fixture::Corpus& corpus() {
  static const auto c = fixture::fixture_corpus();
  return *c;
}

std::vector<Chunk> first_chunks(std::size_t n) {
  const auto& c = corpus();
  return {c.chunks.begin(), c.chunks.begin() + static_cast<std::ptrdiff_t>(n)};
}

Clock fixed_clock() {
  return [] { return std::string("2026-01-01T00:00:00Z"); };
}

std::function<const Chunk*(std::string_view)> lookup_in(const std::vector<Chunk>& chunks) {
  return [&chunks](std::string_view id) -> const Chunk* {
    for (const auto& c : chunks) {
      if (c.chunk_id == id) return &c;
    }
    return nullptr;
  };
}

std::size_t line_count(const std::string& s) { return s.empty() ? 0 : text::split_lines(s).size(); }

// Recomputation oracle: fraction of distinct guide values (outside References)
// found among the sources' values in the same canonical unit.
double oracle_ratio(const ExperienceDoc& doc, const std::vector<Chunk>& sources) {
  std::set<std::pair<std::string, double>> claims, known;
  for (const auto& s : doc.sections) {
    if (s.title == "References") continue;
    for (const auto& q : extract_quantities(s.body)) claims.insert({q.canonical_unit, q.canonical_value});
  }
  for (const auto& c : sources) {
    for (const auto& q : extract_quantities(text::collapse_whitespace(c.text))) {
      known.insert({q.canonical_unit, q.canonical_value});
    }
  }
  if (claims.empty()) return 1.0;
  std::size_t hit = 0;
  for (const auto& [unit, v] : claims) {
    hit += std::any_of(known.begin(), known.end(), [&](const auto& k) {
      return k.first == unit && std::abs(k.second - v) <= 1e-6 * std::max({std::abs(v), std::abs(k.second), 1.0});
    });
  }
  return static_cast<double>(hit) / static_cast<double>(claims.size());
}

} // namespace

TEST(InitExperience, Templates) {
  const auto doc = init_experience("exfoliate BNNS by ball milling");
  ASSERT_EQ(doc.sections.size(), 6u);
  const std::vector<std::string> titles = {"Scope", "Parameters", "Procedure", "Pitfalls", "Characterization",
                                           "References"};
  for (std::size_t i = 0; i < titles.size(); ++i) {
    EXPECT_EQ(doc.sections[i].title, titles[i]);
    EXPECT_TRUE(doc.sections[i].body.empty());
  }
  EXPECT_EQ(doc.version, 0u);
  EXPECT_TRUE(doc.audit_trail.empty());
  EXPECT_EQ(init_experience("x", {"Parameters", "References"}).sections.size(), 2u);
  EXPECT_EQ(code_of([] { init_experience("  \n "); }), ErrorCode::EmptyObjective);
}

TEST(ExperienceText, RoundTrip) {
  auto doc = init_experience("exfoliate BNNS");
  doc.version = 3;
  doc.section("Parameters")->body = "- Milled at 500 rpm.\n- Dried for 12 h.";
  doc.section("Pitfalls")->body = "Line one\n\nLine three";
  const auto back = parse_experience(render_experience(doc));
  EXPECT_EQ(back.objective, doc.objective);
  EXPECT_EQ(back.version, 3u);
  EXPECT_EQ(back.sections, doc.sections);
  EXPECT_EQ(back.digest(), doc.digest());
  EXPECT_EQ(code_of([] { parse_experience("stray text\n# Scope\n"); }), ErrorCode::InvalidArgument);
}

TEST(Digest, IgnoresVersionAndTrail) {
  auto a = init_experience("objective");
  auto b = a;
  b.version = 7;
  b.audit_trail.resize(2);
  EXPECT_EQ(a.digest(), b.digest());
  b.section("Scope")->body = "x";
  EXPECT_NE(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
}

TEST(IntegrateBatch, MockContract) {
  const auto doc = init_experience("exfoliate BNNS");
  const auto batch = first_chunks(2);
  const Draft d = integrate_batch(doc, batch);
  EXPECT_EQ(line_count(d.content.section("References")->body), 2u);
  EXPECT_NE(d.content.section("References")->body.find(batch[0].chunk_id), std::string::npos);
  EXPECT_EQ(d.base_version, 0u);
  EXPECT_EQ(d.base_digest, doc.digest());
  EXPECT_EQ(d.batch_chunk_ids, (std::vector<std::string>{batch[0].chunk_id, batch[1].chunk_id}));
  EXPECT_EQ(doc.version, 0u);
  EXPECT_EQ(integrate_batch(doc, batch).content.digest(), d.content.digest());
  EXPECT_EQ(code_of([&] { integrate_batch(doc, {}); }), ErrorCode::InvalidArgument);

  // Every value the draft asserts is matched among the batch's values.
  std::vector<Quantity> batch_q;
  for (const auto& c : batch) {
    for (auto& q : extract_quantities(text::collapse_whitespace(c.text))) batch_q.push_back(q);
  }
  const auto claims = guide_quantities(d.content);
  ASSERT_FALSE(claims.empty());
  for (const auto& q : claims) {
    EXPECT_TRUE(std::any_of(batch_q.begin(), batch_q.end(), [&](const Quantity& s) { return quantities_match(q, s, 1e-6); }));
  }
  EXPECT_EQ(quality_check(d.content, batch).grounding_ratio, 1.0);
}

TEST(IntegrateBatch, Provider) {
  const auto doc = init_experience("exfoliate BNNS");
  std::string seen;
  FunctionProvider ok([&](const LlmRequest& r) {
    seen = user_text(r);
    return std::string("# Parameters\n\n- Milled at 500 rpm.\n\n# References\n\n- x");
  });
  const auto d = integrate_batch(doc, first_chunks(1), &ok);
  EXPECT_NE(seen.find("exfoliate BNNS"), std::string::npos);
  EXPECT_NE(seen.find(first_chunks(1)[0].chunk_id), std::string::npos);
  ASSERT_EQ(d.content.sections.size(), 2u);
  EXPECT_EQ(d.content.section("Parameters")->body, "- Milled at 500 rpm.");
  FunctionProvider broken([](const LlmRequest&) -> std::string { throw std::runtime_error("down"); });
  EXPECT_EQ(code_of([&] { integrate_batch(doc, first_chunks(1), &broken); }), ErrorCode::GeneratorUnavailable);
  FunctionProvider garbage([](const LlmRequest&) { return std::string("no headings here"); });
  EXPECT_EQ(code_of([&] { integrate_batch(doc, first_chunks(1), &garbage); }), ErrorCode::GeneratorUnavailable);
}

TEST(QualityCheck, MockInjectedAndEmpty) {
  const auto batch = first_chunks(10);
  const auto d = integrate_batch(init_experience("exfoliate BNNS"), batch);
  auto q = quality_check(d.content, batch);
  EXPECT_EQ(q.grounding_ratio, 1.0);
  EXPECT_TRUE(q.ungrounded.empty());
  EXPECT_GT(q.entity_coverage, 0.0);
  EXPECT_LE(q.entity_coverage, 1.0);

  auto corrupted = d.content;
  corrupted.section("Parameters")->body += "\n- The drum was milled at 650 rpm.";
  q = quality_check(corrupted, batch);
  ASSERT_EQ(q.ungrounded.size(), 1u);
  EXPECT_EQ(q.ungrounded[0].canonical_value, 650);
  EXPECT_EQ(q.ungrounded[0].canonical_unit, "rpm");
  EXPECT_LT(q.grounding_ratio, 1.0);
  EXPECT_NEAR(q.grounding_ratio, oracle_ratio(corrupted, batch), 1e-12);

  q = quality_check(init_experience("empty"), batch);
  EXPECT_EQ(q.grounding_ratio, 1.0);
  EXPECT_EQ(q.entity_coverage, 0.0);
}

TEST(QualityCheck, RatiosStayInRangeUnderRandomCorruption) {
  const auto batch = first_chunks(12);
  const auto base = integrate_batch(init_experience("o"), batch).content;
  std::mt19937 rng(3);
  for (int t = 0; t < 100; ++t) {
    auto doc = base;
    const int n = static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      doc.section("Pitfalls")->body += "\n- Avoid " + std::to_string(1 + rng() % 9000) + " rpm.";
    }
    const auto q = quality_check(doc, batch);
    EXPECT_GE(q.grounding_ratio, 0.0);
    EXPECT_LE(q.grounding_ratio, 1.0);
    EXPECT_GE(q.entity_coverage, 0.0);
    EXPECT_LE(q.entity_coverage, 1.0);
    EXPECT_NEAR(q.grounding_ratio, oracle_ratio(doc, batch), 1e-12);
  }
}

TEST(ApplyReview, AcceptRejectEditStale) {
  const auto doc = init_experience("exfoliate BNNS");
  const auto draft = integrate_batch(doc, first_chunks(2));
  const auto accepted = apply_review(doc, draft, {ReviewKind::accept, "", ""}, {}, fixed_clock());
  EXPECT_EQ(accepted.version, 1u);
  EXPECT_EQ(accepted.digest(), draft.content.digest());
  ASSERT_EQ(accepted.audit_trail.size(), 1u);
  EXPECT_EQ(accepted.audit_trail[0].timestamp, "2026-01-01T00:00:00Z");
  EXPECT_EQ(accepted.audit_trail[0].doc_digest_after, accepted.digest());

  const auto rejected = apply_review(doc, draft, {ReviewKind::reject, "", "too thin"}, {}, fixed_clock());
  EXPECT_EQ(rejected.version, 0u);
  EXPECT_EQ(rejected.digest(), doc.digest());
  EXPECT_EQ(rejected.audit_trail.size(), 1u);

  const std::string edited = "# Parameters\n\n- Mill at 500 rpm for 20 h.\n";
  const auto e = apply_review(doc, draft, {ReviewKind::edit, edited, ""}, {}, fixed_clock());
  EXPECT_EQ(e.version, 1u);
  ASSERT_EQ(e.sections.size(), 1u);
  EXPECT_EQ(e.sections[0].body, "- Mill at 500 rpm for 20 h.");
  EXPECT_EQ(e.objective, doc.objective);
  EXPECT_EQ(code_of([&] { apply_review(doc, draft, {ReviewKind::edit, " ", ""}); }), ErrorCode::InvalidArgument);

  // The same draft cannot be applied to the guide it already advanced.
  EXPECT_EQ(code_of([&] { apply_review(accepted, draft, {ReviewKind::accept, "", ""}); }), ErrorCode::StaleDraft);
  // Audit trail only grows.
  const auto next = apply_review(accepted, integrate_batch(accepted, first_chunks(4)), {ReviewKind::reject, "", ""},
                                 {}, fixed_clock());
  ASSERT_EQ(next.audit_trail.size(), 2u);
  EXPECT_EQ(next.audit_trail[0].draft_digest, accepted.audit_trail[0].draft_digest);
  EXPECT_EQ(next.audit_trail[1].iteration, 2u);
}

TEST(RunLoop, FortyChunksBatchTwenty) {
  const auto chunks = first_chunks(40);
  LoopConfig cfg;
  cfg.batch_size = 20;
  cfg.clock = fixed_clock();
  const auto doc = run_loop("exfoliate BNNS by ball milling", [&](std::string_view) { return chunks; }, cfg);
  ASSERT_EQ(doc.audit_trail.size(), 2u);
  EXPECT_EQ(doc.version, 2u);
  EXPECT_EQ(doc.audit_trail[0].batch_chunk_ids.size(), 20u);
  EXPECT_EQ(doc.audit_trail[1].batch_chunk_ids.front(), chunks[20].chunk_id);
  EXPECT_EQ(line_count(doc.section("References")->body), 40u);

  const auto q = quality_check(doc, chunks);
  EXPECT_EQ(q.grounding_ratio, 1.0);
  EXPECT_EQ(oracle_ratio(doc, chunks), 1.0);
  for (const auto& r : doc.audit_trail) EXPECT_EQ(r.quality.grounding_ratio, 1.0);

  const auto again = run_loop("exfoliate BNNS by ball milling", [&](std::string_view) { return chunks; }, cfg);
  EXPECT_EQ(again.digest(), doc.digest());
  EXPECT_EQ(render_experience(again), render_experience(doc));

  const auto replayed = replay(doc.objective, doc.audit_trail, lookup_in(chunks));
  EXPECT_EQ(replayed.digest(), doc.digest());
  EXPECT_EQ(replayed.digest(), doc.audit_trail.back().doc_digest_after);
  EXPECT_EQ(replayed.version, doc.version);
}

TEST(RunLoop, TerminationRules) {
  const auto chunks = first_chunks(30);
  auto retriever = [&](std::string_view) { return chunks; };
  LoopConfig cfg;
  cfg.batch_size = 10;
  cfg.max_iterations = 1;
  cfg.clock = fixed_clock();
  EXPECT_EQ(run_loop("o", retriever, cfg).audit_trail.size(), 1u);

  // Two consecutive rejects stall the loop.
  cfg.max_iterations = 10;
  cfg.review_mode = ReviewMode::interactive;
  cfg.reviewer = [](const ExperienceDoc&, const Draft&, const QualityReport&) {
    return ReviewDecision{ReviewKind::reject, "", ""};
  };
  auto doc = run_loop("o", retriever, cfg);
  EXPECT_EQ(doc.audit_trail.size(), 2u);
  EXPECT_EQ(doc.version, 0u);

  // A reject between accepts resets the stall guard.
  int calls = 0;
  cfg.reviewer = [&](const ExperienceDoc&, const Draft&, const QualityReport&) {
    return ReviewDecision{++calls == 2 ? ReviewKind::reject : ReviewKind::accept, "", ""};
  };
  doc = run_loop("o", retriever, cfg);
  EXPECT_EQ(doc.audit_trail.size(), 3u);
  EXPECT_EQ(doc.version, 2u);
  std::size_t changed = 0;
  for (const auto& r : doc.audit_trail) changed += r.decision.kind != ReviewKind::reject;
  EXPECT_EQ(doc.version, changed);
  EXPECT_EQ(replay("o", doc.audit_trail, lookup_in(chunks)).digest(), doc.digest());

  cfg.reviewer = nullptr;
  EXPECT_EQ(code_of([&] { run_loop("o", retriever, cfg); }), ErrorCode::InvalidConfig);
  cfg.review_mode = ReviewMode::auto_accept;
  EXPECT_EQ(code_of([&] { run_loop("o", [](std::string_view) { return std::vector<Chunk>{}; }, cfg); }),
            ErrorCode::NoRetrievedChunks);
  EXPECT_EQ(code_of([&] { run_loop(" ", retriever, cfg); }), ErrorCode::EmptyObjective);
}

TEST(RunLoop, EditedGuidesReplay) {
  const auto chunks = first_chunks(20);
  LoopConfig cfg;
  cfg.batch_size = 5;
  cfg.clock = fixed_clock();
  cfg.review_mode = ReviewMode::interactive;
  std::mt19937 rng(9);
  cfg.reviewer = [&](const ExperienceDoc&, const Draft& d, const QualityReport&) {
    switch (rng() % 3) {
      case 0: return ReviewDecision{ReviewKind::accept, "", ""};
      case 1: return ReviewDecision{ReviewKind::reject, "", "no"};
      default: {
        auto content = d.content;
        content.section("Pitfalls")->body += "\n- Keep the jar cool.";
        return ReviewDecision{ReviewKind::edit, render_experience(content), "added pitfall"};
      }
    }
  };
  const auto doc = run_loop("o", [&](std::string_view) { return chunks; }, cfg);
  ASSERT_FALSE(doc.audit_trail.empty());
  // Audit records survive the JSONL wire form.
  std::vector<IterationRecord> wire;
  for (const auto& r : doc.audit_trail) wire.push_back(Json::parse(Json(r).dump()).get<IterationRecord>());
  const auto replayed = replay("o", wire, lookup_in(chunks));
  EXPECT_EQ(replayed.digest(), doc.digest());
  EXPECT_EQ(replayed.version, doc.version);
}

TEST(RunLoop, ReplayDetectsDivergence) {
  const auto chunks = first_chunks(10);
  LoopConfig cfg;
  cfg.batch_size = 5;
  cfg.clock = fixed_clock();
  auto doc = run_loop("o", [&](std::string_view) { return chunks; }, cfg);
  auto trail = doc.audit_trail;
  std::swap(trail[0].batch_chunk_ids, trail[1].batch_chunk_ids);
  EXPECT_EQ(code_of([&] { replay("o", trail, lookup_in(chunks)); }), ErrorCode::StaleDraft);
  trail = doc.audit_trail;
  trail[0].batch_chunk_ids[0] = "missing#Preparation/0";
  EXPECT_EQ(code_of([&] { replay("o", trail, lookup_in(chunks)); }), ErrorCode::InvalidArgument);
}

TEST(ExampleTrail, TrialRecordsReplay) {
  std::vector<Article> trials;
  for (const std::string id : {"trial-1", "trial-2", "trial-3"}) {
    trials.push_back(parse_article(fixture::read_text(fixture::dir() / "experience" / (id + ".md"))));
  }
  const auto c = fixture::make_corpus(trials);
  std::vector<IterationRecord> trail;
  const std::string audit = fixture::read_text(fixture::dir() / "experience" / "example_audit.jsonl");
  for (const auto line : text::split_lines(audit)) {
    if (!text::trim(line).empty()) trail.push_back(Json::parse(line).get<IterationRecord>());
  }
  ASSERT_FALSE(trail.empty());
  const auto guide = parse_experience(fixture::read_text(fixture::dir() / "experience" / "example_guide.md"));
  const auto doc = replay(guide.objective, trail, lookup_in(c->chunks));
  EXPECT_EQ(doc.digest(), trail.back().doc_digest_after);
  EXPECT_EQ(doc.digest(), guide.digest());
  EXPECT_EQ(doc.version, guide.version);
  const std::string params = doc.section("Parameters")->body;
  for (const std::string s : {"~200 nm", "~50 nm", "~40 nm", "500 rpm", "10,000 rpm"}) {
    EXPECT_NE(params.find(s), std::string::npos) << s;
  }
  EXPECT_EQ(quality_check(doc, c->chunks).grounding_ratio, 1.0);
}
