#include "lsdb/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "json.hpp"
#include "lsdb/error.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

BaselineExtractor::BaselineExtractor()
    : BaselineExtractor(default_attribute_lexicon(), default_material_lexicon(), kDefaultWindow) {}

BaselineExtractor::BaselineExtractor(PhraseLexicon attributes, PhraseLexicon materials, std::size_t window)
    : attributes_(std::move(attributes)), materials_(std::move(materials)), window_(window) {}

namespace {

// Index of the first token starting at or after `offset`.
std::size_t token_at_or_after(const std::vector<Token>& tokens, std::size_t offset) {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), offset,
                             [](const Token& t, std::size_t off) { return t.start < off; });
  return static_cast<std::size_t>(it - tokens.begin());
}

void assign_ids(std::vector<Entity>& entities, const std::string& chunk_id) {
  std::stable_sort(entities.begin(), entities.end(),
                   [](const Entity& a, const Entity& b) { return a.span.start < b.span.start; });
  for (std::size_t i = 0; i < entities.size(); ++i) {
    entities[i].entity_id = chunk_id + "@" + std::to_string(i);
  }
}

} // namespace

std::vector<Entity> BaselineExtractor::extract(const Chunk& chunk) {
  const auto tokens = tokenize_with_offsets(chunk.text);
  const auto quantities = extract_quantities(chunk.text);
  std::vector<Entity> out;

  // Tokens covered by a quantity are not reused as attribute phrases.
  std::size_t barrier = 0;
  for (const auto& q : quantities) {
    const std::size_t qi = token_at_or_after(tokens, q.span.start);
    std::optional<PhraseLexicon::Hit> best;
    // Nearest phrase ending e tokens before the number, e = 0..window.
    for (std::size_t gap = 0; gap <= window_ && gap < qi; ++gap) {
      const std::size_t end = qi - gap;
      if (end <= barrier) break;
      auto hit = attributes_.match_ending_at(tokens, end);
      if (hit && hit->first_token >= barrier) {
        best = hit;
        break;
      }
    }
    Entity e;
    e.type = best ? "parameter" : "quantity";
    e.name = best ? best->name : "quantity";
    e.value = q.value;
    if (!q.unit.empty()) e.unit = q.unit;
    e.canonical_value = q.canonical_value;
    e.canonical_unit = q.canonical_unit;
    e.dimension = q.dimension;
    e.chunk_id = chunk.chunk_id;
    e.span = q.span;
    out.push_back(std::move(e));
    barrier = token_at_or_after(tokens, q.span.end);
  }

  for (std::size_t i = 0; i < tokens.size();) {
    bool inside_quantity = std::any_of(quantities.begin(), quantities.end(), [&](const Quantity& q) {
      return tokens[i].start >= q.span.start && tokens[i].start < q.span.end;
    });
    auto hit = inside_quantity ? std::nullopt : materials_.match_starting_at(tokens, i);
    if (!hit) {
      ++i;
      continue;
    }
    Entity e;
    e.type = "material";
    e.name = hit->name;
    e.dimension = Dimension::unknown;
    e.chunk_id = chunk.chunk_id;
    e.span = Span{tokens[i].start, tokens[i + hit->token_count - 1].end};
    out.push_back(std::move(e));
    i += hit->token_count;
  }

  assign_ids(out, chunk.chunk_id);
  return out;
}

LlmEntityExtractor::LlmEntityExtractor(std::shared_ptr<LlmProvider> provider, PhraseLexicon attributes)
    : provider_(std::move(provider)), attributes_(std::move(attributes)) {}

std::vector<Entity> LlmEntityExtractor::extract(const Chunk& chunk) {
  using nlohmann::json;
  std::string lexicon;
  for (const auto& name : attributes_.names()) lexicon += name + "\n";
  LlmRequest request;
  request.messages.push_back(
      {"system",
       "Extract named entities from the text. Reply with only a JSON array of objects with fields "
       "type (\"parameter\" or \"material\"), name (one of the attribute names below for parameters), "
       "value (number, parameters only), unit (string, parameters only), span ([start, end] byte "
       "offsets, optional).\nAttribute names:\n" +
           lexicon});
  request.messages.push_back({"user", chunk.text});

  std::vector<Entity> out;
  try {
    auto reply = json::parse(provider_->complete(request));
    if (!reply.is_array()) throw std::runtime_error("reply is not a JSON array");
    for (const auto& item : reply) {
      Entity e;
      e.type = item.value("type", "parameter");
      e.name = attributes_.normalize(item.at("name").get<std::string>());
      e.chunk_id = chunk.chunk_id;
      e.provenance = "external";
      if (item.contains("value") && item["value"].is_number()) {
        const double v = item["value"].get<double>();
        const std::string unit = item.value("unit", "");
        Quantity q = normalize_quantity(v, unit);
        e.value = v;
        if (!unit.empty()) e.unit = unit;
        e.canonical_value = q.canonical_value;
        e.canonical_unit = q.canonical_unit;
        e.dimension = q.dimension;
      }
      if (item.contains("span") && item["span"].is_array() && item["span"].size() == 2) {
        e.span = Span{item["span"][0].get<std::size_t>(), item["span"][1].get<std::size_t>()};
        if (e.span.end > chunk.text.size() || e.span.start > e.span.end) e.span = {};
      }
      out.push_back(std::move(e));
    }
  } catch (const Error& err) {
    throw Error(ErrorCode::ExtractorUnavailable, err.what());
  } catch (const std::exception& err) {
    throw Error(ErrorCode::ExtractorUnavailable, std::string("bad extractor reply: ") + err.what());
  }
  assign_ids(out, chunk.chunk_id);
  return out;
}

std::vector<Entity> extract_entities(const Chunk& chunk, EntityExtractor& extractor) {
  return extractor.extract(chunk);
}

KnowledgeGraph build_graph(std::span<const Chunk> chunks, std::span<const Entity> entities) {
  std::map<std::string, std::size_t, std::less<>> chunk_index;
  for (std::size_t i = 0; i < chunks.size(); ++i) chunk_index.emplace(chunks[i].chunk_id, i);

  std::vector<std::vector<const Entity*>> by_chunk(chunks.size());
  for (const auto& e : entities) {
    auto it = chunk_index.find(e.chunk_id);
    if (it == chunk_index.end()) {
      throw Error(ErrorCode::DanglingEntity,
                  "entity " + e.entity_id + " references unknown chunk " + e.chunk_id);
    }
    by_chunk[it->second].push_back(&e);
  }

  KnowledgeGraph g;
  std::int64_t next_id = 0;
  for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
    const std::int64_t chunk_node = next_id++;
    g.nodes.push_back(KGNode{chunk_node, "chunk", chunks[ci].chunk_id, std::nullopt, chunks[ci].chunk_id});

    using Key = std::tuple<std::string, std::string, std::string, std::string>;
    std::map<Key, std::int64_t> seen;
    std::vector<std::int64_t> materials;
    std::vector<std::int64_t> parameters;
    for (const Entity* e : by_chunk[ci]) {
      Key key{e->type, e->name,
              e->canonical_value ? text::format_number(*e->canonical_value) : std::string(),
              e->canonical_unit};
      if (seen.count(key)) continue;
      const std::int64_t id = next_id++;
      seen.emplace(std::move(key), id);
      g.nodes.push_back(KGNode{id, e->type, e->name, e->canonical_value, e->entity_id});
      g.edges.push_back(KGEdge{chunk_node, id, "mentions"});
      if (e->type == "material") materials.push_back(id);
      if (e->type == "parameter") parameters.push_back(id);
    }
    for (auto m : materials) {
      for (auto p : parameters) g.edges.push_back(KGEdge{m, p, "has_parameter"});
    }
  }
  return g;
}

bool quantities_match(const Quantity& a, const Quantity& b, double rel_tol) {
  if (a.dimension != b.dimension) return false;
  if (a.dimension == Dimension::unknown && a.canonical_unit != b.canonical_unit) return false;
  const double scale = std::max({std::fabs(a.canonical_value), std::fabs(b.canonical_value), 1.0});
  return std::fabs(a.canonical_value - b.canonical_value) <= rel_tol * scale;
}

MatchReport compare_quantity_sets(std::span<const Quantity> source, std::span<const Quantity> target,
                                  double rel_tol) {
  if (rel_tol < 0.0) throw Error(ErrorCode::InvalidArgument, "rel_tol must be >= 0");
  std::vector<std::vector<std::size_t>> adj(source.size());
  for (std::size_t s = 0; s < source.size(); ++s) {
    for (std::size_t t = 0; t < target.size(); ++t) {
      if (quantities_match(source[s], target[t], rel_tol)) adj[s].push_back(t);
    }
  }
  // Kuhn's augmenting paths: exact maximum cardinality matching.
  constexpr std::size_t kFree = static_cast<std::size_t>(-1);
  std::vector<std::size_t> match_of_target(target.size(), kFree);
  std::vector<char> visited;
  auto augment = [&](auto&& self, std::size_t s) -> bool {
    for (std::size_t t : adj[s]) {
      if (visited[t]) continue;
      visited[t] = 1;
      if (match_of_target[t] == kFree || self(self, match_of_target[t])) {
        match_of_target[t] = s;
        return true;
      }
    }
    return false;
  };
  for (std::size_t s = 0; s < source.size(); ++s) {
    visited.assign(target.size(), 0);
    augment(augment, s);
  }

  MatchReport r;
  std::vector<char> source_matched(source.size(), 0);
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (match_of_target[t] != kFree) {
      r.matched.emplace_back(match_of_target[t], t);
      source_matched[match_of_target[t]] = 1;
    } else {
      r.unmatched_target.push_back(t);
    }
  }
  std::sort(r.matched.begin(), r.matched.end());
  for (std::size_t s = 0; s < source.size(); ++s) {
    if (!source_matched[s]) r.unmatched_source.push_back(s);
  }
  const double m = static_cast<double>(r.matched.size());
  r.precision = target.empty() ? 1.0 : m / static_cast<double>(target.size());
  r.recall = source.empty() ? 1.0 : m / static_cast<double>(source.size());
  return r;
}

} // namespace lsdb
