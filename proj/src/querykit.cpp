#include "lsdb/querykit.hpp"

#include <algorithm>
#include <set>

#include "lsdb/error.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

std::string clean_query(std::string_view raw) {
  std::string kept;
  kept.reserve(raw.size());
  for (char c : raw) {
    const auto u = static_cast<unsigned char>(c);
    if (text::is_space(c)) {
      kept += ' ';
    } else if (u >= 0x20 && u != 0x7F) {
      kept += c;
    }
  }
  std::string cleaned = text::collapse_whitespace(kept);
  if (cleaned.empty()) throw Error(ErrorCode::EmptyQuery, "query is empty after cleaning");
  return cleaned;
}

namespace {

std::size_t skip_spaces(std::string_view t, std::size_t pos) {
  while (pos < t.size() && text::is_space(t[pos])) ++pos;
  return pos;
}

// Comparator symbol at `pos`: (comparator, byte length).
std::optional<std::pair<Comparator, std::size_t>> comparator_at(std::string_view t, std::size_t pos) {
  auto rest = t.substr(pos);
  if (rest.rfind("\xE2\x89\xA4", 0) == 0) return std::pair{Comparator::LE, std::size_t{3}};
  if (rest.rfind("\xE2\x89\xA5", 0) == 0) return std::pair{Comparator::GE, std::size_t{3}};
  if (rest.rfind("<=", 0) == 0) return std::pair{Comparator::LE, std::size_t{2}};
  if (rest.rfind(">=", 0) == 0) return std::pair{Comparator::GE, std::size_t{2}};
  if (rest.rfind("==", 0) == 0) return std::pair{Comparator::EQ, std::size_t{2}};
  if (rest.rfind("<", 0) == 0) return std::pair{Comparator::LT, std::size_t{1}};
  if (rest.rfind(">", 0) == 0) return std::pair{Comparator::GT, std::size_t{1}};
  if (rest.rfind("=", 0) == 0) return std::pair{Comparator::EQ, std::size_t{1}};
  return std::nullopt;
}

// Case-insensitive whole word at `pos`; returns the position after it.
std::optional<std::size_t> word_at(std::string_view t, std::size_t pos, std::string_view word) {
  if (!text::starts_with_ci(t.substr(pos), word)) return std::nullopt;
  const std::size_t end = pos + word.size();
  if (end < t.size() && text::is_alnum(t[end])) return std::nullopt;
  return end;
}

// A condition whose attribute phrase spans [start, attr_end).
std::optional<Condition> condition_after(std::string_view t, std::size_t start, std::size_t attr_end,
                                         const std::string& attribute) {
  std::size_t pos = skip_spaces(t, attr_end);
  if (auto after = word_at(t, pos, "between")) {
    auto lo = match_quantity_at(t, skip_spaces(t, *after));
    if (!lo) return std::nullopt;
    auto and_pos = word_at(t, skip_spaces(t, lo->span.end), "and");
    if (!and_pos) return std::nullopt;
    auto hi = match_quantity_at(t, skip_spaces(t, *and_pos));
    if (!hi) return std::nullopt;
    Condition c;
    if (!lo->unit.empty() && !hi->unit.empty() && lo->unit != hi->unit) {
      if (lo->dimension != hi->dimension || lo->canonical_unit != hi->canonical_unit) return std::nullopt;
      c = make_condition(attribute, Comparator::BETWEEN, lo->canonical_value, hi->canonical_value,
                         lo->canonical_unit);
    } else {
      const std::string unit = hi->unit.empty() ? lo->unit : hi->unit;
      if (lo->value > hi->value) return std::nullopt;
      c = make_condition(attribute, Comparator::BETWEEN, lo->value, hi->value, unit);
    }
    c.span = Span{start, hi->span.end};
    c.text = std::string(t.substr(start, hi->span.end - start));
    return c;
  }

  Comparator cmp = Comparator::EQ;
  if (auto sym = comparator_at(t, pos)) {
    cmp = sym->first;
    pos = skip_spaces(t, pos + sym->second);
  }
  auto q = match_quantity_at(t, pos);
  if (!q) return std::nullopt;
  Condition c = make_condition(attribute, cmp, q->value, std::nullopt, q->unit);
  c.span = Span{start, q->span.end};
  c.text = std::string(t.substr(start, q->span.end - start));
  return c;
}

} // namespace

ConditionParse parse_conditions(std::string_view cleaned, const AttributeSynonyms& synonyms) {
  ConditionParse out;
  const auto tokens = tokenize_with_offsets(cleaned);
  std::vector<Span> removed;
  std::size_t consumed_to = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].start < consumed_to) continue;
    auto hit = synonyms.match_starting_at(tokens, i);
    if (!hit) continue;
    const std::size_t attr_end = tokens[i + hit->token_count - 1].end;
    auto c = condition_after(cleaned, tokens[i].start, attr_end, hit->name);
    if (!c) continue;
    removed.push_back(c->span);
    consumed_to = c->span.end;
    out.conditions.push_back(std::move(*c));
  }

  std::string residual;
  std::size_t pos = 0;
  for (const auto& s : removed) {
    residual.append(cleaned.substr(pos, s.start - pos));
    residual += ' ';
    pos = s.end;
  }
  residual.append(cleaned.substr(pos));
  out.residual = text::collapse_whitespace(residual);
  return out;
}

std::vector<std::string> extract_keywords(std::string_view residual, const StopwordSet& stopwords) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& tok : tokenize(residual)) {
    if (stopwords.contains(tok)) continue;
    if (seen.insert(tok).second) out.push_back(std::move(tok));
  }
  return out;
}

std::string LlmRewriter::rewrite(std::string_view cleaned) {
  LlmRequest request;
  request.messages.push_back({"system",
                              "Rewrite the search query below so it is clear and self-contained. Keep "
                              "every number, unit and comparison unchanged. Reply with the query only."});
  request.messages.push_back({"user", std::string(cleaned)});
  try {
    return provider_->complete(request);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::RewriterUnavailable, e.what());
  }
}

CompositeQuery preprocess(std::string_view raw, Rewriter& rewriter, const Embedder& embedder,
                          const QueryResources& resources) {
  CompositeQuery q;
  q.raw = std::string(raw);
  q.cleaned = clean_query(raw);
  try {
    q.rewritten = text::collapse_whitespace(rewriter.rewrite(q.cleaned));
    if (q.rewritten.empty()) {
      q.warnings.push_back("rewriter returned empty text; using the cleaned query");
      q.rewritten = q.cleaned;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RewriterUnavailable) throw;
    q.warnings.push_back(std::string("rewriter unavailable, using the cleaned query: ") + e.what());
    q.rewritten = q.cleaned;
  }
  auto parsed = parse_conditions(q.rewritten, *resources.synonyms);
  q.conditions = std::move(parsed.conditions);
  q.residual = std::move(parsed.residual);
  q.keywords = extract_keywords(q.residual, *resources.stopwords);
  if (q.keywords.empty() && q.conditions.empty()) {
    q.warnings.push_back("query has no keywords and no conditions");
  }
  q.embedding = embedder.embed(q.rewritten);
  return q;
}

std::vector<Condition> parse_filter(std::string_view filter, const AttributeSynonyms& synonyms) {
  auto parsed = parse_conditions(filter, synonyms);
  for (const auto& tok : tokenize_with_offsets(parsed.residual)) {
    if (tok.text != "and") {
      throw Error(ErrorCode::InvalidArgument, "filter has unparsed text: '" + parsed.residual + "'");
    }
  }
  for (char c : parsed.residual) {
    if (!text::is_alpha(c) && c != ',' && c != ';' && !text::is_space(c)) {
      throw Error(ErrorCode::InvalidArgument, "filter has unparsed text: '" + parsed.residual + "'");
    }
  }
  return parsed.conditions;
}

} // namespace lsdb
