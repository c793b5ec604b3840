#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lsdb {

enum class Category { Preparation, Characterization, Mechanism, Modeling, Tables };

/// Canonical module order, also used for serialization and chunk ordering.
inline constexpr std::array<Category, 5> kCategoryOrder = {
    Category::Preparation, Category::Characterization, Category::Mechanism,
    Category::Modeling, Category::Tables};

std::string_view category_name(Category c) noexcept;
/// Case-insensitive lookup of a module heading.
std::optional<Category> parse_category(std::string_view name) noexcept;
std::size_t category_rank(Category c) noexcept;

/// Allowed subsection headings for a module; empty for Tables (any heading).
std::span<const std::string_view> category_vocabulary(Category c) noexcept;

struct ArticleMeta {
  std::string article_id;
  std::string title;
  std::string abstract;
  std::vector<std::string> authors;
  std::string journal;
  std::optional<int> year;
  std::optional<std::string> doi;
  // Front-matter keys outside the fixed set, kept for round-tripping.
  std::map<std::string, std::string> extra;

  bool operator==(const ArticleMeta&) const = default;
};

struct SectionUnit {
  std::string heading;
  std::string body;
  std::vector<std::string> evidence;  // verbatim snippets
  int order = 0;

  bool operator==(const SectionUnit&) const = default;
};

struct ModuleBlock {
  // Heading text as written; canonical spelling when the category is known.
  std::string label;
  std::optional<Category> category;
  std::vector<SectionUnit> sections;

  bool operator==(const ModuleBlock&) const = default;
};

struct Article {
  ArticleMeta meta;
  std::vector<ModuleBlock> modules;

  const ModuleBlock* find(Category c) const;
  bool operator==(const Article&) const = default;
};

struct Chunk {
  std::string chunk_id;
  std::string article_id;
  Category category = Category::Preparation;
  std::string heading;
  std::string text;
  std::size_t token_count = 0;
  std::size_t sentence_count = 0;
  std::size_t quantity_count = 0;

  bool operator==(const Chunk&) const = default;
};

struct Issue {
  std::string location;
  std::string code;
  std::string message;

  bool operator==(const Issue&) const = default;
};

struct ValidationReport {
  std::vector<Issue> errors;
  std::vector<Issue> warnings;

  bool ok() const { return errors.empty(); }
  void error(std::string location, std::string code, std::string message);
  void warn(std::string location, std::string code, std::string message);
};

/// Parses the lightly structured article format:
///
///   ---
///   article_id: a1
///   title: ...
///   ---
///   # Preparation
///   ## Process
///   body paragraphs
///   ### evidence
///   verbatim snippet
///
/// Throws MissingFrontMatter, MissingArticleId or MalformedHeading.
Article parse_article(std::string_view text);

/// Canonical text: sorted front-matter keys, one blank line between blocks,
/// modules in kCategoryOrder (unknown labels last, in input order).
std::string serialize_article(const Article& article);

ValidationReport validate_schema(const Article& article);

/// One chunk per section with a non-empty body or evidence, in canonical
/// module order then section order.
std::vector<Chunk> chunk_article(const Article& article);

/// Recomputes the derived counters of a chunk from its text.
void recount_chunk(Chunk& chunk);

std::string make_chunk_id(std::string_view article_id, Category category, int order);

struct ChunkKey {
  std::string article_id;
  Category category = Category::Preparation;
  int order = 0;

  bool operator==(const ChunkKey&) const = default;
};
std::optional<ChunkKey> parse_chunk_id(std::string_view chunk_id);

/// True when `id` can serve as an article_id (non-empty, no '#', '/' or whitespace).
bool valid_article_id(std::string_view id);

/// Sentence boundaries fall after '.', '?' or '!' when followed by whitespace
/// and then an uppercase letter or a digit. Returned spans cover segments that
/// contain at least one alphanumeric character.
std::vector<std::pair<std::size_t, std::size_t>> split_sentences(std::string_view text);
std::size_t count_sentences(std::string_view text);

/// Substitutes {{SOURCE_TEXT}} in an extraction prompt template.
std::string render_extraction_prompt(std::string_view prompt_template, std::string_view source_text);

struct CheckedArticle {
  std::optional<Article> article;
  ValidationReport report;
};
/// Gate for model-produced article text: parse errors become report errors.
CheckedArticle check_article_text(std::string_view text);

} // namespace lsdb
