#include "lsdb/ragkit.hpp"

#include <algorithm>
#include <cmath>

#include "lsdb/assets.hpp"
#include "lsdb/error.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

ContextPackage assemble_context(const RetrievalResult& result, const ChunkLookup& lookup,
                                std::size_t budget_tokens) {
  if (budget_tokens < 1) throw Error(ErrorCode::InvalidArgument, "context budget must be >= 1");
  ContextPackage ctx;
  ctx.budget = budget_tokens;
  for (const auto& article : result.articles) {
    std::vector<const ScoredChunk*> chunks;
    for (const auto& c : article.selected) chunks.push_back(&c);
    std::stable_sort(chunks.begin(), chunks.end(), [](const ScoredChunk* a, const ScoredChunk* b) {
      return category_rank(a->category) < category_rank(b->category);
    });
    for (const ScoredChunk* sc : chunks) {
      const Chunk* chunk = lookup(sc->chunk_id);
      if (chunk == nullptr) continue;
      if (ctx.tokens_used + chunk->token_count > budget_tokens) continue;
      ContextEntry e;
      e.citation = "[Ref " + std::to_string(ctx.entries.size() + 1) + "]";
      e.chunk_id = chunk->chunk_id;
      e.article_id = chunk->article_id;
      e.category = chunk->category;
      e.text = chunk->text;
      e.tokens = chunk->token_count;
      ctx.tokens_used += e.tokens;
      ctx.citations.emplace(e.citation, e.chunk_id);
      ctx.entries.push_back(std::move(e));
    }
  }
  if (ctx.entries.empty()) {
    throw Error(ErrorCode::EmptyResult, "no retrieved chunk fits the context budget of " +
                                            std::to_string(budget_tokens) + " tokens");
  }
  return ctx;
}

std::string render_context(const ContextPackage& context) {
  std::string out;
  for (const auto& e : context.entries) {
    out += e.citation + " (" + e.chunk_id + ") " + text::collapse_whitespace(e.text) + "\n";
  }
  return out;
}

std::string_view default_generation_template() { return assets::get("generation_prompt.txt"); }

std::string build_prompt(const CompositeQuery& query, const ContextPackage& context,
                         std::string_view tmpl) {
  if (context.entries.empty()) throw Error(ErrorCode::EmptyResult, "cannot build a prompt without context");
  const std::string instructions =
      "Support every statement with the key of the context entry it comes from, written as [Ref i]. "
      "Only use numerical values that appear in the context or follow from them by arithmetic.";
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const std::string_view name = tmpl.substr(open + 2, close - open - 2);
    out.append(tmpl.substr(pos, open - pos));
    if (name == "QUERY") {
      out += query.cleaned;
    } else if (name == "CONTEXT") {
      std::string listing = render_context(context);
      if (!listing.empty()) listing.pop_back();
      out += listing;
    } else if (name == "CITATION_INSTRUCTIONS") {
      out += instructions;
    } else {
      throw Error(ErrorCode::UnknownPlaceholder, "unknown placeholder {{" + std::string(name) + "}}");
    }
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string_view generator_kind_name(GeneratorKind kind) noexcept {
  return kind == GeneratorKind::mock_echo ? "mock_echo" : "external_service";
}

std::optional<GeneratorKind> parse_generator_kind(std::string_view name) noexcept {
  if (name == "mock_echo") return GeneratorKind::mock_echo;
  if (name == "external_service") return GeneratorKind::external_service;
  return std::nullopt;
}

std::string mock_echo_answer(std::string_view prompt) {
  std::string out;
  for (auto line : text::split_lines(prompt)) {
    if (line.rfind("Question:", 0) == 0) {
      out += std::string(text::trim(line)) + "\n";
      continue;
    }
    if (line.rfind("[Ref ", 0) != 0) continue;
    const auto close = line.find(']');
    if (close == std::string_view::npos) continue;
    const std::string_view citation = line.substr(0, close + 1);
    std::string_view body = text::trim(line.substr(close + 1));
    // Skip the "(chunk_id)" label.
    if (!body.empty() && body.front() == '(') {
      const auto paren = body.find(") ");
      if (paren == std::string_view::npos) continue;
      body = body.substr(paren + 2);
    }
    for (auto [b, e] : split_sentences(body)) {
      const auto sentence = body.substr(b, e - b);
      if (extract_quantities(sentence).empty()) continue;
      out += std::string(sentence) + " " + std::string(citation) + "\n";
    }
  }
  return out;
}

std::string MockEchoProvider::complete(const LlmRequest& request) { return mock_echo_answer(user_text(request)); }

std::shared_ptr<LlmProvider> make_provider(const GeneratorSpec& spec) {
  if (spec.kind == GeneratorKind::mock_echo) return std::make_shared<MockEchoProvider>();
  return std::make_shared<HttpLlmProvider>(spec.provider);
}

std::string generate(std::string_view prompt, const GeneratorSpec& spec) {
  if (text::trim(prompt).empty()) throw Error(ErrorCode::InvalidPrompt, "prompt is empty");
  if (spec.kind == GeneratorKind::mock_echo) return mock_echo_answer(prompt);
  LlmRequest request;
  request.messages.push_back({"user", std::string(prompt)});
  try {
    return make_provider(spec)->complete(request);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::GeneratorUnavailable) throw;
    throw Error(ErrorCode::GeneratorUnavailable, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::GeneratorUnavailable, e.what());
  }
}

std::string strip_citations(std::string_view t) {
  std::string out(t);
  std::size_t pos = 0;
  while ((pos = out.find('[', pos)) != std::string::npos) {
    const auto close = out.find(']', pos);
    if (close == std::string::npos) break;
    std::string inner = out.substr(pos + 1, close - pos - 1);
    bool is_citation = inner.rfind("Ref", 0) == 0;
    for (std::size_t k; is_citation && (k = inner.find("Ref")) != std::string::npos;) inner.replace(k, 3, "   ");
    bool has_digit = false;
    for (char c : inner) {
      if (text::is_digit(c)) {
        has_digit = true;
      } else if (c != ' ' && c != ',' && c != '-') {
        is_citation = false;
      }
    }
    if (is_citation && has_digit) {
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(pos), out.begin() + static_cast<std::ptrdiff_t>(close) + 1, ' ');
    }
    pos = close;
  }
  return out;
}

double relative_change(double a, double b) {
  if (b == 0.0) throw Error(ErrorCode::DivisionByZero, "relative change against zero");
  return (a - b) / b;
}

namespace {

bool unitless(const Quantity& q) { return q.dimension == Dimension::dimensionless; }

bool same_space(const Quantity& a, const Quantity& b) {
  return a.dimension == b.dimension && a.canonical_unit == b.canonical_unit;
}

bool within(double value, double expected) {
  return std::fabs(value - expected) <= kDerivedTolerance * std::fabs(expected);
}

} // namespace

GroundingReport verify_grounding(std::string_view answer, const ContextPackage& context, double rel_tol,
                                 std::string_view query_text) {
  std::vector<std::pair<Quantity, std::string>> sources;
  for (const auto& e : context.entries) {
    for (auto& q : extract_quantities(e.text)) sources.emplace_back(std::move(q), e.chunk_id);
    for (auto& q : extract_quantities(text::collapse_whitespace(e.text))) sources.emplace_back(std::move(q), e.chunk_id);
  }
  if (!query_text.empty()) {
    for (auto& q : extract_quantities(query_text)) sources.emplace_back(std::move(q), "query");
  }

  GroundingReport r;
  const auto found = extract_quantities(strip_citations(answer));
  std::vector<const Quantity*> pending;
  for (const auto& q : found) {
    auto it = std::find_if(sources.begin(), sources.end(),
                           [&](const auto& s) { return quantities_match(q, s.first, rel_tol); });
    if (it != sources.end()) {
      r.grounded.push_back(GroundedQuantity{q, it->second});
      continue;
    }
    // A bare number restating a context value whose unit is written once for
    // a whole range ("from 0.68 to 7.28 W/m·K") takes that value's unit.
    if (unitless(q)) {
      it = std::find_if(sources.begin(), sources.end(), [&](const auto& s) {
        return !unitless(s.first) &&
               std::fabs(q.value - s.first.value) <= rel_tol * std::max({std::fabs(q.value), std::fabs(s.first.value), 1.0});
      });
    }
    if (it != sources.end()) {
      Quantity adopted = it->first;
      adopted.span = q.span;
      adopted.approx = q.approx;
      adopted.chunk_id.reset();
      r.grounded.push_back(GroundedQuantity{adopted, it->second});
    } else {
      pending.push_back(&q);
    }
  }

  for (const Quantity* q : pending) {
    std::optional<DerivedQuantity> hit;
    for (std::size_t i = 0; i < r.grounded.size() && !hit; ++i) {
      for (std::size_t j = 0; j < r.grounded.size() && !hit; ++j) {
        if (i == j) continue;
        const Quantity& qa = r.grounded[i].quantity;
        const Quantity& qb = r.grounded[j].quantity;
        if (!same_space(qa, qb)) continue;
        const double a = qa.canonical_value;
        const double b = qb.canonical_value;
        auto consider = [&](const char* formula, double expected) {
          if (!hit && within(q->canonical_value, expected)) hit = DerivedQuantity{*q, formula, a, b, expected};
        };
        if (unitless(*q) && b != 0.0) {
          consider("a/b", a / b);
          consider("(a-b)/b", relative_change(a, b));
        }
        if (same_space(*q, qa)) {
          consider("a-b", a - b);
          consider("a+b", a + b);
        }
      }
    }
    if (hit) {
      r.derived.push_back(std::move(*hit));
    } else {
      r.ungrounded.push_back(*q);
    }
  }

  const std::size_t total = r.total();
  r.ratio = total == 0 ? 1.0 : static_cast<double>(r.grounded.size() + r.derived.size()) / static_cast<double>(total);
  return r;
}

} // namespace lsdb
