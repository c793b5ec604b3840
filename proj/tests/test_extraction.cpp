#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "lsdb/error.hpp"
#include "lsdb/extraction.hpp"

using namespace lsdb;

namespace {

Chunk make_chunk(const std::string& id, const std::string& text) {
  Chunk c;
  c.chunk_id = id;
  c.article_id = id.substr(0, id.find('#'));
  c.text = text;
  recount_chunk(c);
  return c;
}

std::vector<Entity> parameters(const std::vector<Entity>& all) {
  std::vector<Entity> out;
  for (const auto& e : all) {
    if (e.type == "parameter") out.push_back(e);
  }
  return out;
}

Quantity q(double v, std::string_view unit) { return normalize_quantity(v, unit); }

// Maximum matching size by trying every assignment of source items.
std::size_t brute_max_matching(const std::vector<Quantity>& s, const std::vector<Quantity>& t, double tol) {
  std::vector<bool> used(t.size(), false);
  std::function<std::size_t(std::size_t)> go = [&](std::size_t i) -> std::size_t {
    if (i == s.size()) return 0;
    std::size_t best = go(i + 1);
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (used[j]) continue;
      const bool same = s[i].dimension == t[j].dimension &&
                        std::abs(s[i].canonical_value - t[j].canonical_value) <=
                            tol * std::max({std::abs(s[i].canonical_value), std::abs(t[j].canonical_value), 1.0});
      if (!same) continue;
      used[j] = true;
      best = std::max(best, 1 + go(i + 1));
      used[j] = false;
    }
    return best;
  };
  return go(0);
}

} // namespace

TEST(Quantities, PaperExamples) {
  auto a = extract_quantities("centrifugation at high speed (10,000 rpm)");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].value, 10000);
  EXPECT_EQ(a[0].unit, "rpm");
  EXPECT_EQ(a[0].dimension, Dimension::rotational_speed);

  auto b = extract_quantities("pure TPU at 0.68 W/m·K");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_DOUBLE_EQ(b[0].value, 0.68);
  EXPECT_EQ(b[0].unit, "W/m·K");
  EXPECT_EQ(b[0].dimension, Dimension::thermal_conductivity);

  EXPECT_TRUE(extract_quantities("no numbers here").empty());

  auto c = extract_quantities("~200 nm thickness");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].value, 200);
  EXPECT_EQ(c[0].unit, "nm");
  EXPECT_TRUE(c[0].approx);
}

TEST(Quantities, GrammarForms) {
  auto v = extract_quantities("1.5e3 s, 3:1 ratio, about 12 h and 1,23 x");
  ASSERT_GE(v.size(), 3u);
  EXPECT_DOUBLE_EQ(v[0].value, 1500);
  EXPECT_EQ(v[0].unit, "s");
  EXPECT_EQ(v[1].dimension, Dimension::ratio);
  EXPECT_DOUBLE_EQ(v[1].value, 3.0);
  EXPECT_DOUBLE_EQ(v[2].value, 12);
  EXPECT_TRUE(v[2].approx);
  // "1,23" is not a thousands group.
  for (const auto& x : v) EXPECT_NE(x.value, 123);
}

TEST(Quantities, SpansSortedDisjointAndReExtractable) {
  const std::string text =
      "Milled at 500 rpm for 0.5 h, then 10,000 rpm for 30 min; thickness ~40 nm, 20 wt% and 7.28 W/m·K at 25 °C.";
  const auto qs = extract_quantities(text);
  ASSERT_FALSE(qs.empty());
  std::string joined;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    EXPECT_LT(qs[i].span.start, qs[i].span.end);
    EXPECT_LE(qs[i].span.end, text.size());
    if (i > 0) EXPECT_LE(qs[i - 1].span.end, qs[i].span.start);
    joined += text.substr(qs[i].span.start, qs[i].span.end - qs[i].span.start) + " ; ";
  }
  const auto again = extract_quantities(joined);
  ASSERT_EQ(again.size(), qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) EXPECT_EQ(again[i].value, qs[i].value);
}

TEST(Normalize, TableAndPassthrough) {
  auto a = normalize_quantity(0.1, "µm");
  EXPECT_DOUBLE_EQ(a.canonical_value, 100);
  EXPECT_EQ(a.canonical_unit, "nm");
  auto b = normalize_quantity(0.5, "h");
  EXPECT_DOUBLE_EQ(b.canonical_value, 1800);
  EXPECT_EQ(b.canonical_unit, "s");
  auto c = normalize_quantity(42, "parsec");
  EXPECT_EQ(c.canonical_value, 42);
  EXPECT_EQ(c.canonical_unit, "parsec");
  EXPECT_EQ(c.dimension, Dimension::unknown);
  for (const char* u : {"W/m·K", "W m-1 K-1", "W/mK"}) {
    EXPECT_EQ(normalize_quantity(1, u).dimension, Dimension::thermal_conductivity) << u;
  }
}

TEST(Normalize, Idempotent) {
  for (const auto& [v, u] : std::vector<std::pair<double, std::string>>{
           {0.3, "µm"}, {2, "h"}, {500, "rpm"}, {5, "wt%"}, {300, "K"}, {7.28, "W/m·K"}, {3, "mm"}, {42, "parsec"}}) {
    const Quantity a = normalize_quantity(v, u);
    const Quantity b = normalize_quantity(a.canonical_value, a.canonical_unit);
    EXPECT_DOUBLE_EQ(b.canonical_value, a.canonical_value) << u;
    EXPECT_EQ(b.canonical_unit, a.canonical_unit) << u;
    EXPECT_EQ(b.dimension, a.dimension) << u;
  }
}

TEST(Entities, BaselineExamples) {
  BaselineExtractor ex;
  auto a = parameters(ex.extract(make_chunk("a#Preparation/0", "BNNS thickness of ~40 nm")));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].name, "thickness");
  EXPECT_EQ(a[0].value, 40);
  EXPECT_EQ(a[0].unit, "nm");

  auto b = parameters(ex.extract(make_chunk("a#Preparation/0", "increased milling speed to 500 rpm")));
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].name, "speed");
  EXPECT_EQ(b[0].value, 500);
  EXPECT_EQ(b[0].unit, "rpm");

  EXPECT_TRUE(parameters(ex.extract(make_chunk("a#Preparation/0", "a sample was prepared"))).empty());
}

TEST(Entities, WindowAndMaterials) {
  BaselineExtractor ex;
  // Seven tokens between the keyword end and the number: outside the window.
  auto far = ex.extract(make_chunk("a#Preparation/0", "thickness one two three four five six seven 40 nm"));
  ASSERT_EQ(far.size(), 1u);
  EXPECT_EQ(far[0].type, "quantity");
  EXPECT_EQ(far[0].name, "quantity");
  auto near = parameters(ex.extract(make_chunk("a#Preparation/0", "thickness one two three four five 40 nm")));
  ASSERT_EQ(near.size(), 1u);
  EXPECT_EQ(near[0].name, "thickness");

  auto mats = ex.extract(make_chunk("a#Preparation/0", "Boron nitride nanosheets and urea were milled."));
  std::vector<std::string> names;
  for (const auto& e : mats) {
    EXPECT_EQ(e.type, "material");
    EXPECT_FALSE(e.value.has_value());
    names.push_back(e.name);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"bnns", "urea"}));
}

TEST(Entities, Deterministic) {
  BaselineExtractor ex;
  const Chunk c = make_chunk("a#Preparation/0", "Milled at a speed of 500 rpm for a time of 12 h with a BMR of 20:1.");
  EXPECT_EQ(ex.extract(c), ex.extract(c));
}

TEST(Entities, ExternalExtractor) {
  auto provider = std::make_shared<FunctionProvider>([](const LlmRequest&) {
    return R"([{"type":"parameter","name":"sheet thickness","value":0.04,"unit":"µm"}])";
  });
  LlmEntityExtractor ex(provider, default_attribute_lexicon());
  auto es = ex.extract(make_chunk("a#Preparation/0", "text"));
  ASSERT_EQ(es.size(), 1u);
  EXPECT_EQ(es[0].name, "thickness");
  EXPECT_EQ(es[0].provenance, "external");
  EXPECT_DOUBLE_EQ(*es[0].canonical_value, 40);

  auto broken = std::make_shared<FunctionProvider>([](const LlmRequest&) -> std::string {
    throw Error(ErrorCode::GeneratorUnavailable, "offline");
  });
  LlmEntityExtractor bad(broken, default_attribute_lexicon());
  try {
    bad.extract(make_chunk("a#Preparation/0", "text"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ExtractorUnavailable);
  }
}

TEST(Graph, Examples) {
  const Chunk c = make_chunk("a#Preparation/0", "speed 500 rpm and time 12 h");
  BaselineExtractor ex;
  auto g = build_graph(std::vector<Chunk>{c}, ex.extract(c));
  EXPECT_EQ(g.nodes.size(), 3u);
  EXPECT_EQ(g.edges.size(), 2u);
  for (const auto& e : g.edges) EXPECT_EQ(e.relation, "mentions");

  auto empty = build_graph({}, {});
  EXPECT_TRUE(empty.nodes.empty());
  EXPECT_TRUE(empty.edges.empty());

  const Chunk dup = make_chunk("a#Preparation/0", "speed 500 rpm, then again speed 500 rpm");
  const auto dup_entities = ex.extract(dup);
  ASSERT_EQ(dup_entities.size(), 2u);
  auto g2 = build_graph(std::vector<Chunk>{dup}, dup_entities);
  EXPECT_EQ(g2.nodes.size(), 2u);
  EXPECT_EQ(g2.edges.size(), 1u);
}

TEST(Graph, MaterialEdgesDenseIdsAndDangling) {
  const Chunk c = make_chunk("a#Preparation/0", "BNNS with a thickness of 40 nm");
  BaselineExtractor ex;
  auto g = build_graph(std::vector<Chunk>{c}, ex.extract(c));
  for (std::size_t i = 0; i < g.nodes.size(); ++i) EXPECT_EQ(g.nodes[i].node_id, static_cast<std::int64_t>(i));
  bool has_param_edge = false;
  for (const auto& e : g.edges) {
    EXPECT_NE(e.source, e.target);
    has_param_edge = has_param_edge || e.relation == "has_parameter";
  }
  EXPECT_TRUE(has_param_edge);

  Entity orphan;
  orphan.chunk_id = "missing#Preparation/0";
  orphan.name = "x";
  try {
    build_graph(std::vector<Chunk>{c}, std::vector<Entity>{orphan});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DanglingEntity);
  }
}

TEST(Compare, Examples) {
  const std::vector<Quantity> four = {q(500, "rpm"), q(12, "h"), q(40, "nm"), q(20, "wt%")};
  auto self = compare_quantity_sets(four, four);
  EXPECT_EQ(self.precision, 1.0);
  EXPECT_EQ(self.recall, 1.0);

  const std::vector<Quantity> corrupted = {q(500, "rpm"), q(12, "h"), q(40, "nm"), q(650, "rpm")};
  auto c = compare_quantity_sets(four, corrupted);
  EXPECT_EQ(c.precision, 0.75);
  EXPECT_EQ(c.recall, 0.75);
  EXPECT_EQ(c.unmatched_target, (std::vector<std::size_t>{3}));
  EXPECT_EQ(c.unmatched_source, (std::vector<std::size_t>{3}));

  const std::vector<Quantity> dupes = {q(500, "rpm"), q(500, "rpm"), q(12, "h")};
  const std::vector<Quantity> two = {q(500, "rpm"), q(12, "h")};
  auto d = compare_quantity_sets(dupes, two);
  EXPECT_EQ(d.matched.size(), 2u);
  EXPECT_EQ(d.precision, 1.0);
  EXPECT_DOUBLE_EQ(d.recall, 2.0 / 3.0);
  EXPECT_EQ(brute_max_matching(dupes, two, 1e-9), 2u);

  auto empty = compare_quantity_sets({}, {});
  EXPECT_EQ(empty.precision, 1.0);
  EXPECT_EQ(empty.recall, 1.0);
  EXPECT_THROW(compare_quantity_sets(four, four, -1.0), Error);
}

TEST(Compare, CrossUnitSameCanonical) {
  const std::vector<Quantity> a = {q(0.3, "µm")};
  const std::vector<Quantity> b = {q(300, "nm")};
  EXPECT_EQ(compare_quantity_sets(a, b).matched.size(), 1u);
  const std::vector<Quantity> c = {q(300, "s")};
  EXPECT_TRUE(compare_quantity_sets(a, c).matched.empty());
}

TEST(Compare, MatchesBruteForceAndIsSymmetric) {
  std::mt19937 rng(11);
  const std::vector<std::string> units = {"nm", "µm", "rpm", "h", "min"};
  const std::vector<double> values = {0.5, 1, 2, 30, 60, 500, 1000};
  auto draw = [&](std::size_t n) {
    std::vector<Quantity> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(q(values[rng() % values.size()], units[rng() % units.size()]));
    }
    return out;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = draw(rng() % 7);
    const auto t = draw(rng() % 7);
    const auto st = compare_quantity_sets(s, t, 1e-9);
    const auto ts = compare_quantity_sets(t, s, 1e-9);
    ASSERT_EQ(st.matched.size(), brute_max_matching(s, t, 1e-9));
    EXPECT_EQ(st.precision, ts.recall);
    EXPECT_EQ(st.recall, ts.precision);
    EXPECT_EQ(st.matched.size() + st.unmatched_source.size(), s.size());
    EXPECT_EQ(st.matched.size() + st.unmatched_target.size(), t.size());
    const auto self = compare_quantity_sets(s, s);
    EXPECT_EQ(self.precision, 1.0);
    EXPECT_EQ(self.recall, 1.0);
  }
}
