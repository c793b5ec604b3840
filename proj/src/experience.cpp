#include "lsdb/experience.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <set>

#include "lsdb/assets.hpp"
#include "lsdb/error.hpp"
#include "lsdb/ragkit.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

std::string_view review_kind_name(ReviewKind kind) noexcept {
  switch (kind) {
    case ReviewKind::accept: return "accept";
    case ReviewKind::reject: return "reject";
    case ReviewKind::edit: return "edit";
  }
  return "accept";
}

std::optional<ReviewKind> parse_review_kind(std::string_view name) noexcept {
  if (name == "accept") return ReviewKind::accept;
  if (name == "reject") return ReviewKind::reject;
  if (name == "edit") return ReviewKind::edit;
  return std::nullopt;
}

std::string ExperienceDoc::digest() const {
  std::string buf = objective;
  buf += '\0';
  for (const auto& s : sections) {
    buf += s.title;
    buf += '\0';
    buf += s.body;
    buf += '\0';
  }
  return text::sha256_hex(buf);
}

ExperienceSection* ExperienceDoc::section(std::string_view title) {
  for (auto& s : sections) {
    if (s.title == title) return &s;
  }
  return nullptr;
}

const ExperienceSection* ExperienceDoc::section(std::string_view title) const {
  for (const auto& s : sections) {
    if (s.title == title) return &s;
  }
  return nullptr;
}

std::vector<std::string> default_experience_sections() {
  std::vector<std::string> out;
  for (auto line : text::split_lines(assets::get("experience_template.txt"))) {
    auto t = text::trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

ExperienceDoc init_experience(std::string_view objective, const std::vector<std::string>& section_titles) {
  ExperienceDoc doc;
  doc.objective = text::collapse_whitespace(objective);
  if (doc.objective.empty()) throw Error(ErrorCode::EmptyObjective, "experience objective is empty");
  for (const auto& t : section_titles) doc.sections.push_back(ExperienceSection{t, ""});
  return doc;
}

std::string render_experience(const ExperienceDoc& doc) {
  std::string out = "---\nobjective: " + doc.objective + "\nversion: " + std::to_string(doc.version) + "\n---\n";
  for (const auto& s : doc.sections) {
    out += "\n# " + s.title + "\n";
    if (!s.body.empty()) out += "\n" + s.body + "\n";
  }
  return out;
}

ExperienceDoc parse_experience(std::string_view input) {
  ExperienceDoc doc;
  const auto lines = text::split_lines(input);
  std::size_t i = 0;
  while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
  if (i < lines.size() && text::trim(lines[i]) == "---") {
    for (++i; i < lines.size() && text::trim(lines[i]) != "---"; ++i) {
      const auto colon = lines[i].find(':');
      if (colon == std::string_view::npos) continue;
      const auto key = text::trim(lines[i].substr(0, colon));
      const auto value = text::trim(lines[i].substr(colon + 1));
      if (key == "objective") doc.objective = std::string(value);
      if (key == "version") doc.version = std::strtoull(std::string(value).c_str(), nullptr, 10);
    }
    if (i >= lines.size()) throw Error(ErrorCode::InvalidArgument, "experience front matter is not closed");
    ++i;
  }
  std::vector<std::string_view> body;
  auto flush = [&]() {
    if (doc.sections.empty()) return;
    std::size_t b = 0;
    std::size_t e = body.size();
    while (b < e && text::trim(body[b]).empty()) ++b;
    while (e > b && text::trim(body[e - 1]).empty()) --e;
    std::string joined;
    for (std::size_t k = b; k < e; ++k) {
      if (k > b) joined += '\n';
      joined += body[k];
    }
    doc.sections.back().body = std::move(joined);
    body.clear();
  };
  for (; i < lines.size(); ++i) {
    auto line = lines[i];
    if (line.size() >= 2 && line[0] == '#' && line[1] == ' ') {
      flush();
      doc.sections.push_back(ExperienceSection{std::string(text::trim(line.substr(2))), ""});
      continue;
    }
    if (doc.sections.empty()) {
      if (!text::trim(line).empty()) {
        throw Error(ErrorCode::InvalidArgument, "experience text before the first '# ' section heading");
      }
      continue;
    }
    body.push_back(line);
  }
  flush();
  return doc;
}

std::string_view default_distillation_template() { return assets::get("distillation_prompt.txt"); }

namespace {

void append_line(ExperienceDoc& doc, const std::string& title, const std::string& line) {
  ExperienceSection* s = doc.section(title);
  if (s == nullptr) {
    doc.sections.push_back(ExperienceSection{title, ""});
    s = &doc.sections.back();
  }
  for (auto existing : text::split_lines(s->body)) {
    if (existing == line) return;
  }
  if (!s->body.empty()) s->body += '\n';
  s->body += line;
}

std::string substitute(std::string_view tmpl, const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    auto it = std::find_if(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
    if (it == values.end()) throw Error(ErrorCode::UnknownPlaceholder, "unknown placeholder {{" + name + "}}");
    out.append(tmpl.substr(pos, open - pos));
    out += it->second;
    pos = close + 2;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::vector<Quantity> source_quantities(const std::vector<Chunk>& sources) {
  std::vector<Quantity> out;
  for (const auto& c : sources) {
    for (auto& q : extract_quantities(c.text)) out.push_back(std::move(q));
    for (auto& q : extract_quantities(text::collapse_whitespace(c.text))) out.push_back(std::move(q));
  }
  return out;
}

} // namespace

Draft integrate_batch(const ExperienceDoc& doc, const std::vector<Chunk>& batch, LlmProvider* provider) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "cannot integrate an empty batch");
  Draft draft;
  draft.base_version = doc.version;
  draft.base_digest = doc.digest();
  for (const auto& c : batch) draft.batch_chunk_ids.push_back(c.chunk_id);

  if (provider == nullptr) {
    draft.content = doc;
    draft.content.audit_trail.clear();
    for (const auto& c : batch) {
      std::string_view body = c.text;
      if (!c.heading.empty() && body.starts_with(c.heading)) body.remove_prefix(c.heading.size());
      const std::string folded = text::collapse_whitespace(body);
      for (auto [b, e] : split_sentences(folded)) {
        const std::string sentence = folded.substr(b, e - b);
        if (!extract_quantities(sentence).empty()) append_line(draft.content, "Parameters", "- " + sentence);
      }
      append_line(draft.content, "References", "- " + c.chunk_id + ": " + c.heading);
    }
    return draft;
  }

  std::string listing;
  for (const auto& c : batch) listing += "[" + c.chunk_id + "] " + text::collapse_whitespace(c.text) + "\n";
  const std::string prompt = substitute(default_distillation_template(),
                                        {{"OBJECTIVE", doc.objective},
                                         {"CURRENT_GUIDE", render_experience(doc)},
                                         {"BATCH", listing}});
  LlmRequest request;
  request.messages.push_back({"user", prompt});
  std::string reply;
  try {
    reply = provider->complete(request);
  } catch (const Error& e) {
    throw Error(ErrorCode::GeneratorUnavailable, e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::GeneratorUnavailable, e.what());
  }
  ExperienceDoc parsed;
  try {
    parsed = parse_experience(reply);
  } catch (const Error& e) {
    throw Error(ErrorCode::GeneratorUnavailable, std::string("unusable guide from provider: ") + e.what());
  }
  draft.content.objective = doc.objective;
  draft.content.version = doc.version;
  draft.content.sections = std::move(parsed.sections);
  return draft;
}

std::vector<Quantity> guide_quantities(const ExperienceDoc& doc) {
  std::vector<Quantity> out;
  for (const auto& s : doc.sections) {
    if (s.title == "References") continue;
    for (auto& q : extract_quantities(strip_citations(s.body))) out.push_back(std::move(q));
  }
  return out;
}

QualityReport quality_check(const ExperienceDoc& draft, const std::vector<Chunk>& sources, double rel_tol) {
  QualityReport r;
  // A value restated in several sections is one claim.
  std::vector<Quantity> claims;
  for (auto& q : guide_quantities(draft)) {
    const bool dup = std::any_of(claims.begin(), claims.end(), [&](const Quantity& c) {
      return c.dimension == q.dimension && c.canonical_unit == q.canonical_unit &&
             c.canonical_value == q.canonical_value;
    });
    if (!dup) claims.push_back(std::move(q));
  }
  const auto known = source_quantities(sources);
  const MatchReport m = compare_quantity_sets(known, claims, rel_tol);
  r.grounding_ratio = m.precision;
  for (std::size_t t : m.unmatched_target) r.ungrounded.push_back(claims[t]);

  BaselineExtractor extractor;
  std::size_t parameters = 0;
  std::size_t covered = 0;
  for (const auto& c : sources) {
    for (const auto& e : extractor.extract(c)) {
      if (e.type != "parameter" || !e.canonical_value) continue;
      ++parameters;
      Quantity q;
      q.canonical_value = *e.canonical_value;
      q.canonical_unit = e.canonical_unit;
      q.dimension = e.dimension;
      const bool hit = std::any_of(claims.begin(), claims.end(),
                                   [&](const Quantity& c2) { return quantities_match(q, c2, rel_tol); });
      if (hit) ++covered;
    }
  }
  r.entity_coverage = parameters == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(parameters);
  return r;
}

std::string default_timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch != nullptr && *epoch != '\0') {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ExperienceDoc apply_review(const ExperienceDoc& doc, const Draft& draft, const ReviewDecision& decision,
                           const QualityReport& quality, const Clock& clock) {
  if (draft.base_version != doc.version || draft.base_digest != doc.digest()) {
    throw Error(ErrorCode::StaleDraft, "draft was derived from version " + std::to_string(draft.base_version) +
                                           ", guide is at version " + std::to_string(doc.version));
  }
  ExperienceDoc next;
  switch (decision.kind) {
    case ReviewKind::accept:
      next = draft.content;
      next.version = doc.version + 1;
      break;
    case ReviewKind::reject:
      next = doc;
      break;
    case ReviewKind::edit: {
      if (text::trim(decision.edited_text).empty()) {
        throw Error(ErrorCode::InvalidArgument, "edit decision carries no text");
      }
      ExperienceDoc edited = parse_experience(decision.edited_text);
      next.objective = edited.objective.empty() ? doc.objective : edited.objective;
      next.sections = std::move(edited.sections);
      next.version = doc.version + 1;
      break;
    }
  }
  next.audit_trail = doc.audit_trail;
  IterationRecord rec;
  rec.iteration = doc.audit_trail.size() + 1;
  rec.batch_chunk_ids = draft.batch_chunk_ids;
  rec.draft_digest = draft.content.digest();
  rec.quality = quality;
  rec.decision = decision;
  rec.timestamp = clock ? clock() : default_timestamp();
  rec.version_after = next.version;
  rec.doc_digest_after = next.digest();
  next.audit_trail.push_back(std::move(rec));
  return next;
}

ExperienceDoc run_loop(std::string_view objective, const ChunkRetriever& retriever, const LoopConfig& config) {
  if (config.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (config.review_mode == ReviewMode::interactive && !config.reviewer) {
    throw Error(ErrorCode::InvalidConfig, "interactive review needs a reviewer");
  }
  ExperienceDoc doc = init_experience(objective, config.sections);
  const std::vector<Chunk> chunks = retriever(doc.objective);
  if (chunks.empty()) throw Error(ErrorCode::NoRetrievedChunks, "no chunks retrieved for the objective");

  std::vector<Chunk> seen;
  std::size_t rejects_in_a_row = 0;
  for (std::size_t start = 0, it = 0; start < chunks.size() && it < config.max_iterations;
       start += config.batch_size, ++it) {
    const auto end = std::min(chunks.size(), start + config.batch_size);
    std::vector<Chunk> batch(chunks.begin() + static_cast<std::ptrdiff_t>(start),
                             chunks.begin() + static_cast<std::ptrdiff_t>(end));
    Draft draft = integrate_batch(doc, batch, config.provider);
    seen.insert(seen.end(), batch.begin(), batch.end());
    const QualityReport quality = quality_check(draft.content, seen);
    ReviewDecision decision;
    if (config.review_mode == ReviewMode::interactive) decision = config.reviewer(doc, draft, quality);
    doc = apply_review(doc, draft, decision, quality, config.clock);
    rejects_in_a_row = decision.kind == ReviewKind::reject ? rejects_in_a_row + 1 : 0;
    if (rejects_in_a_row >= 2) break;
  }
  return doc;
}

ExperienceDoc replay(std::string_view objective, const std::vector<IterationRecord>& trail,
                     const std::function<const Chunk*(std::string_view)>& lookup,
                     const std::vector<std::string>& sections, LlmProvider* provider) {
  ExperienceDoc doc = init_experience(objective, sections);
  for (const auto& rec : trail) {
    std::vector<Chunk> batch;
    for (const auto& id : rec.batch_chunk_ids) {
      const Chunk* c = lookup(id);
      if (c == nullptr) throw Error(ErrorCode::InvalidArgument, "replay: unknown chunk " + id);
      batch.push_back(*c);
    }
    Draft draft = integrate_batch(doc, batch, provider);
    if (provider == nullptr && draft.content.digest() != rec.draft_digest) {
      throw Error(ErrorCode::StaleDraft, "replay diverged at iteration " + std::to_string(rec.iteration));
    }
    const std::string when = rec.timestamp;
    doc = apply_review(doc, draft, rec.decision, rec.quality, [&] { return when; });
  }
  return doc;
}

} // namespace lsdb
