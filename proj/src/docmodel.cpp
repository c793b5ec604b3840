#include "lsdb/docmodel.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "lsdb/error.hpp"
#include "lsdb/extraction.hpp"
#include "lsdb/lexindex.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

namespace {

constexpr std::array<std::string_view, 4> kPreparationVocab = {"General", "Process", "Product", "Conclusion"};
constexpr std::array<std::string_view, 5> kCharacterizationVocab = {"General", "Results", "Control Study",
                                                                    "Conclusion", "Instrument"};
constexpr std::array<std::string_view, 3> kMechanismVocab = {"Mechanism", "Comparison", "Conclusion"};
constexpr std::array<std::string_view, 4> kModelingVocab = {"Overview", "Theory", "Methods", "Simulation"};

constexpr std::array<std::string_view, 6> kReservedKeys = {"abstract", "article_id", "authors",
                                                           "doi",      "journal",    "year"};

bool is_reserved_key(std::string_view key) {
  return key == "title" || std::find(kReservedKeys.begin(), kReservedKeys.end(), key) != kReservedKeys.end();
}

// Heading level (1-3) of a line, or 0. A heading is 1-3 '#' followed by a
// space or the end of the line.
int heading_level(std::string_view line) {
  std::size_t n = 0;
  while (n < line.size() && line[n] == '#') ++n;
  if (n == 0 || n > 3) return 0;
  if (n < line.size() && line[n] != ' ') return 0;
  return static_cast<int>(n);
}

std::string join_block(const std::vector<std::string_view>& lines) {
  std::size_t b = 0;
  std::size_t e = lines.size();
  while (b < e && text::trim(lines[b]).empty()) ++b;
  while (e > b && text::trim(lines[e - 1]).empty()) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) out += '\n';
    out += lines[i];
  }
  return out;
}

bool has_content(std::string_view s) { return !text::trim(s).empty(); }

bool is_single_trimmed_line(std::string_view s) {
  return s.find('\n') == std::string_view::npos && s.find('\r') == std::string_view::npos &&
         text::trim(s) == s;
}

// Checks that a body or snippet survives serialization unchanged.
void check_block(ValidationReport& r, const std::string& where, std::string_view block) {
  if (block.find('\r') != std::string_view::npos) {
    r.error(where, "CarriageReturn", "text contains a carriage return");
  }
  auto lines = text::split_lines(block);
  if (!block.empty() && (text::trim(lines.front()).empty() || text::trim(lines.back()).empty() ||
                         block.back() == '\n')) {
    r.error(where, "UntrimmedBlock", "text starts or ends with a blank line");
  }
  for (auto line : lines) {
    if (heading_level(line) != 0) {
      r.error(where, "HeadingInBody", "line would parse as a heading: " + std::string(line));
      break;
    }
  }
}

} // namespace

std::string_view category_name(Category c) noexcept {
  switch (c) {
    case Category::Preparation: return "Preparation";
    case Category::Characterization: return "Characterization";
    case Category::Mechanism: return "Mechanism";
    case Category::Modeling: return "Modeling";
    case Category::Tables: return "Tables";
  }
  return "Preparation";
}

std::optional<Category> parse_category(std::string_view name) noexcept {
  name = text::trim(name);
  for (Category c : kCategoryOrder) {
    if (text::iequals(name, category_name(c))) return c;
  }
  return std::nullopt;
}

std::size_t category_rank(Category c) noexcept { return static_cast<std::size_t>(c); }

std::span<const std::string_view> category_vocabulary(Category c) noexcept {
  switch (c) {
    case Category::Preparation: return kPreparationVocab;
    case Category::Characterization: return kCharacterizationVocab;
    case Category::Mechanism: return kMechanismVocab;
    case Category::Modeling: return kModelingVocab;
    case Category::Tables: return {};
  }
  return {};
}

const ModuleBlock* Article::find(Category c) const {
  for (const auto& m : modules) {
    if (m.category == c) return &m;
  }
  return nullptr;
}

void ValidationReport::error(std::string location, std::string code, std::string message) {
  errors.push_back(Issue{std::move(location), std::move(code), std::move(message)});
}

void ValidationReport::warn(std::string location, std::string code, std::string message) {
  warnings.push_back(Issue{std::move(location), std::move(code), std::move(message)});
}

Article parse_article(std::string_view input) {
  const auto lines = text::split_lines(input);
  std::size_t i = 0;
  while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
  if (i >= lines.size() || text::trim(lines[i]) != "---") {
    throw Error(ErrorCode::MissingFrontMatter, "document must start with a '---' front-matter block");
  }
  ++i;

  Article a;
  bool closed = false;
  bool has_id = false;
  for (; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (text::trim(line) == "---") {
      closed = true;
      ++i;
      break;
    }
    if (text::trim(line).empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw Error(ErrorCode::MissingFrontMatter,
                  "front-matter line " + std::to_string(i + 1) + " is not 'key: value'");
    }
    const std::string key = text::to_lower(text::trim(line.substr(0, colon)));
    const std::string value(text::trim(line.substr(colon + 1)));
    if (key == "article_id") {
      a.meta.article_id = value;
      has_id = !value.empty();
    } else if (key == "title") {
      a.meta.title = value;
    } else if (key == "abstract") {
      a.meta.abstract = value;
    } else if (key == "journal") {
      a.meta.journal = value;
    } else if (key == "doi") {
      if (!value.empty()) a.meta.doi = value;
    } else if (key == "authors") {
      a.meta.authors.clear();
      for (const auto& part : text::split(value, ';')) {
        auto name = text::trim(part);
        if (!name.empty()) a.meta.authors.emplace_back(name);
      }
    } else if (key == "year") {
      int year = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), year);
      if (ec == std::errc() && p == value.data() + value.size() && !value.empty()) {
        a.meta.year = year;
      } else if (!value.empty()) {
        a.meta.extra["year"] = value;
      }
    } else {
      a.meta.extra[key] = value;
    }
  }
  if (!closed) throw Error(ErrorCode::MissingFrontMatter, "front-matter block is not closed by '---'");
  if (!has_id) throw Error(ErrorCode::MissingArticleId, "front matter has no article_id");

  enum class Target { none, module_text, body, evidence };
  Target target = Target::none;
  std::vector<std::string_view> buffer;
  ModuleBlock* module = nullptr;
  bool explicit_section = false;

  auto flush = [&]() {
    std::string block = join_block(buffer);
    buffer.clear();
    if (target == Target::module_text && !block.empty()) {
      // Text between a module heading and its first subsection.
      module->sections.push_back(SectionUnit{"General", std::move(block), {}, 0});
    } else if (target == Target::body) {
      module->sections.back().body = std::move(block);
    } else if (target == Target::evidence) {
      module->sections.back().evidence.push_back(std::move(block));
    }
  };

  for (; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    const int level = heading_level(line);
    if (level == 0) {
      if (target == Target::none) {
        if (has_content(line)) {
          throw Error(ErrorCode::MalformedHeading,
                      "line " + std::to_string(i + 1) + ": text before the first module heading");
        }
        continue;
      }
      buffer.push_back(line);
      continue;
    }
    const std::string title(text::trim(line.substr(static_cast<std::size_t>(level))));
    const std::string where = "line " + std::to_string(i + 1);
    if (title.empty()) throw Error(ErrorCode::MalformedHeading, where + ": empty heading");
    flush();
    if (level == 1) {
      ModuleBlock m;
      m.category = parse_category(title);
      m.label = m.category ? std::string(category_name(*m.category)) : title;
      a.modules.push_back(std::move(m));
      module = &a.modules.back();
      explicit_section = false;
      target = Target::module_text;
    } else if (level == 2) {
      if (module == nullptr) throw Error(ErrorCode::MalformedHeading, where + ": subsection before any module");
      module->sections.push_back(SectionUnit{title, "", {}, 0});
      explicit_section = true;
      target = Target::body;
    } else {
      if (module == nullptr || !explicit_section) {
        throw Error(ErrorCode::MalformedHeading, where + ": evidence block before any subsection");
      }
      target = Target::evidence;
    }
  }
  flush();

  for (auto& m : a.modules) {
    for (std::size_t s = 0; s < m.sections.size(); ++s) m.sections[s].order = static_cast<int>(s);
  }
  std::stable_sort(a.modules.begin(), a.modules.end(), [](const ModuleBlock& x, const ModuleBlock& y) {
    const std::size_t rx = x.category ? category_rank(*x.category) : kCategoryOrder.size();
    const std::size_t ry = y.category ? category_rank(*y.category) : kCategoryOrder.size();
    return rx < ry;
  });
  return a;
}

std::string serialize_article(const Article& a) {
  std::map<std::string, std::string> fm(a.meta.extra.begin(), a.meta.extra.end());
  fm["article_id"] = a.meta.article_id;
  if (!a.meta.title.empty()) fm["title"] = a.meta.title;
  if (!a.meta.abstract.empty()) fm["abstract"] = a.meta.abstract;
  if (!a.meta.journal.empty()) fm["journal"] = a.meta.journal;
  if (!a.meta.authors.empty()) fm["authors"] = text::join(a.meta.authors, "; ");
  if (a.meta.year) fm["year"] = std::to_string(*a.meta.year);
  if (a.meta.doi) fm["doi"] = *a.meta.doi;

  std::string out = "---\n";
  for (const auto& [k, v] : fm) out += k + ": " + v + "\n";
  out += "---\n";

  std::vector<const ModuleBlock*> ordered;
  for (const auto& m : a.modules) ordered.push_back(&m);
  std::stable_sort(ordered.begin(), ordered.end(), [](const ModuleBlock* x, const ModuleBlock* y) {
    const std::size_t rx = x->category ? category_rank(*x->category) : kCategoryOrder.size();
    const std::size_t ry = y->category ? category_rank(*y->category) : kCategoryOrder.size();
    return rx < ry;
  });

  for (const ModuleBlock* m : ordered) {
    out += "\n# " + (m->category ? std::string(category_name(*m->category)) : m->label) + "\n";
    std::vector<const SectionUnit*> sections;
    for (const auto& s : m->sections) sections.push_back(&s);
    std::stable_sort(sections.begin(), sections.end(),
                     [](const SectionUnit* x, const SectionUnit* y) { return x->order < y->order; });
    for (const SectionUnit* s : sections) {
      out += "\n## " + s->heading + "\n";
      if (!s->body.empty()) out += "\n" + s->body + "\n";
      for (const auto& ev : s->evidence) {
        out += "\n### evidence\n";
        if (!ev.empty()) out += "\n" + ev + "\n";
      }
    }
  }
  return out;
}

ValidationReport validate_schema(const Article& a) {
  ValidationReport r;
  const auto& meta = a.meta;
  if (meta.article_id.empty()) {
    r.error("meta.article_id", "MissingArticleId", "article_id is empty");
  } else if (!valid_article_id(meta.article_id)) {
    r.error("meta.article_id", "InvalidArticleId", "article_id must not contain '#', '/' or whitespace");
  }
  auto check_meta = [&](const std::string& key, std::string_view value) {
    if (!is_single_trimmed_line(value)) {
      r.error("meta." + key, "InvalidMetaValue", "value must be a single trimmed line");
    }
  };
  check_meta("title", meta.title);
  check_meta("abstract", meta.abstract);
  check_meta("journal", meta.journal);
  if (meta.doi) {
    check_meta("doi", *meta.doi);
    if (meta.doi->empty()) r.error("meta.doi", "InvalidMetaValue", "doi is present but empty");
  }
  for (const auto& author : meta.authors) {
    if (author.empty() || author.find(';') != std::string::npos) {
      r.error("meta.authors", "InvalidMetaValue", "author names must be non-empty and contain no ';'");
    }
    check_meta("authors", author);
  }
  for (const auto& [key, value] : meta.extra) {
    const bool key_ok = !key.empty() && key.find(':') == std::string::npos &&
                        std::none_of(key.begin(), key.end(), [](char c) { return text::is_space(c) || text::is_upper(c); }) &&
                        key != "---";
    if (!key_ok) r.error("meta." + key, "InvalidMetaKey", "front-matter key is not serializable");
    if (is_reserved_key(key) && !(key == "year" && !meta.year)) {
      r.error("meta." + key, "InvalidMetaKey", "reserved key stored as an extra field");
    }
    check_meta(key, value);
  }

  if (a.modules.empty()) r.warn("article", "NoModules", "article has no modules");

  std::set<std::string> seen;
  std::size_t last_rank = 0;
  for (std::size_t mi = 0; mi < a.modules.size(); ++mi) {
    const auto& m = a.modules[mi];
    const std::string where = "module " + (m.label.empty() ? std::to_string(mi) : m.label);
    if (!m.category) {
      r.error(where, "UnknownCategory", "unknown module heading '" + m.label + "'");
    } else {
      if (m.label != category_name(*m.category)) {
        r.error(where, "InvalidLabel", "label does not match the category name");
      }
      const std::size_t rank = category_rank(*m.category);
      if (rank < last_rank) r.error(where, "ModuleOrder", "modules are not in canonical order");
      last_rank = rank;
    }
    const std::string key = m.category ? std::string(category_name(*m.category)) : text::to_lower(m.label);
    if (!seen.insert(key).second) r.error(where, "DuplicateCategory", "module appears more than once");

    const auto vocab = m.category ? category_vocabulary(*m.category) : std::span<const std::string_view>{};
    for (std::size_t si = 0; si < m.sections.size(); ++si) {
      const auto& s = m.sections[si];
      const std::string sw = where + "/" + (s.heading.empty() ? std::to_string(si) : s.heading);
      if (s.order != static_cast<int>(si)) {
        r.error(sw, "SectionOrder", "section order must equal its position");
      }
      if (s.heading.empty() || !is_single_trimmed_line(s.heading)) {
        r.error(sw, "InvalidHeading", "section heading must be a non-empty single line");
      }
      if (m.category && *m.category != Category::Tables && !vocab.empty()) {
        const bool known = std::any_of(vocab.begin(), vocab.end(),
                                       [&](std::string_view h) { return text::iequals(h, s.heading); });
        if (!known) {
          r.warn(sw, "UnknownHeading", "heading '" + s.heading + "' is outside the module vocabulary");
        }
      }
      check_block(r, sw + "/body", s.body);
      for (std::size_t ei = 0; ei < s.evidence.size(); ++ei) {
        check_block(r, sw + "/evidence/" + std::to_string(ei), s.evidence[ei]);
      }
    }
  }
  return r;
}

bool valid_article_id(std::string_view id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char c) { return c == '#' || c == '/' || text::is_space(c); });
}

std::string make_chunk_id(std::string_view article_id, Category category, int order) {
  std::string id(article_id);
  id += '#';
  id += category_name(category);
  id += '/';
  id += std::to_string(order);
  return id;
}

std::optional<ChunkKey> parse_chunk_id(std::string_view chunk_id) {
  const auto hash = chunk_id.find('#');
  const auto slash = chunk_id.rfind('/');
  if (hash == std::string_view::npos || slash == std::string_view::npos || slash < hash) return std::nullopt;
  ChunkKey key;
  key.article_id = std::string(chunk_id.substr(0, hash));
  if (!valid_article_id(key.article_id)) return std::nullopt;
  const auto cat_text = chunk_id.substr(hash + 1, slash - hash - 1);
  auto cat = parse_category(cat_text);
  if (!cat || cat_text != category_name(*cat)) return std::nullopt;
  key.category = *cat;
  const auto num = chunk_id.substr(slash + 1);
  if (num.empty() || !std::all_of(num.begin(), num.end(), text::is_digit)) return std::nullopt;
  if (num.size() > 1 && num.front() == '0') return std::nullopt;
  auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), key.order);
  if (ec != std::errc()) return std::nullopt;
  return key;
}

std::vector<std::pair<std::size_t, std::size_t>> split_sentences(std::string_view t) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  auto push = [&](std::size_t b, std::size_t e) {
    if (std::any_of(t.begin() + static_cast<std::ptrdiff_t>(b), t.begin() + static_cast<std::ptrdiff_t>(e),
                    text::is_alnum)) {
      while (b < e && text::is_space(t[b])) ++b;
      while (e > b && text::is_space(t[e - 1])) --e;
      spans.emplace_back(b, e);
    }
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if (c != '.' && c != '?' && c != '!') continue;
    std::size_t j = i + 1;
    if (j >= t.size() || !text::is_space(t[j])) continue;
    while (j < t.size() && text::is_space(t[j])) ++j;
    if (j < t.size() && (text::is_upper(t[j]) || text::is_digit(t[j]))) {
      push(start, i + 1);
      start = j;
      i = j - 1;
    }
  }
  push(start, t.size());
  return spans;
}

std::size_t count_sentences(std::string_view text) { return split_sentences(text).size(); }

void recount_chunk(Chunk& chunk) {
  chunk.token_count = tokenize(chunk.text).size();
  chunk.sentence_count = count_sentences(chunk.text);
  chunk.quantity_count = extract_quantities(chunk.text).size();
}

std::vector<Chunk> chunk_article(const Article& a) {
  std::vector<const ModuleBlock*> ordered;
  for (const auto& m : a.modules) {
    if (m.category) ordered.push_back(&m);
  }
  std::stable_sort(ordered.begin(), ordered.end(), [](const ModuleBlock* x, const ModuleBlock* y) {
    return category_rank(*x->category) < category_rank(*y->category);
  });

  std::vector<Chunk> chunks;
  for (const ModuleBlock* m : ordered) {
    std::vector<const SectionUnit*> sections;
    for (const auto& s : m->sections) sections.push_back(&s);
    std::stable_sort(sections.begin(), sections.end(),
                     [](const SectionUnit* x, const SectionUnit* y) { return x->order < y->order; });
    for (const SectionUnit* s : sections) {
      const bool has_evidence =
          std::any_of(s->evidence.begin(), s->evidence.end(), [](const std::string& e) { return has_content(e); });
      if (!has_content(s->body) && !has_evidence) continue;
      std::vector<std::string> parts;
      if (has_content(s->heading)) parts.push_back(s->heading);
      if (has_content(s->body)) parts.push_back(s->body);
      for (const auto& e : s->evidence) {
        if (has_content(e)) parts.push_back(e);
      }
      Chunk c;
      c.chunk_id = make_chunk_id(a.meta.article_id, *m->category, s->order);
      c.article_id = a.meta.article_id;
      c.category = *m->category;
      c.heading = s->heading;
      c.text = text::join(parts, "\n\n");
      recount_chunk(c);
      chunks.push_back(std::move(c));
    }
  }
  return chunks;
}

std::string render_extraction_prompt(std::string_view prompt_template, std::string_view source_text) {
  constexpr std::string_view kPlaceholder = "{{SOURCE_TEXT}}";
  if (prompt_template.find(kPlaceholder) == std::string_view::npos) {
    throw Error(ErrorCode::InvalidPrompt, "extraction prompt has no {{SOURCE_TEXT}} placeholder");
  }
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto hit = prompt_template.find(kPlaceholder, pos);
    if (hit == std::string_view::npos) break;
    out.append(prompt_template.substr(pos, hit - pos));
    out.append(source_text);
    pos = hit + kPlaceholder.size();
  }
  out.append(prompt_template.substr(pos));
  return out;
}

CheckedArticle check_article_text(std::string_view text) {
  CheckedArticle out;
  try {
    out.article = parse_article(text);
  } catch (const Error& e) {
    out.report.error("document", std::string(to_string(e.code())), e.what());
    return out;
  }
  out.report = validate_schema(*out.article);
  return out;
}

} // namespace lsdb
