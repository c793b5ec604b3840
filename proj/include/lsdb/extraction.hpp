#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lsdb/docmodel.hpp"
#include "lsdb/lexicon.hpp"
#include "lsdb/llm.hpp"

namespace lsdb {

enum class Dimension {
  length,
  time,
  rotational_speed,
  thermal_conductivity,
  mass_fraction,
  temperature,
  ratio,
  dimensionless,
  unknown,
};

std::string_view dimension_name(Dimension d) noexcept;
std::optional<Dimension> parse_dimension(std::string_view name) noexcept;

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

struct Quantity {
  double value = 0.0;
  std::string unit;  // as written
  double canonical_value = 0.0;
  std::string canonical_unit;
  Dimension dimension = Dimension::dimensionless;
  bool approx = false;
  Span span;
  std::optional<std::string> chunk_id;

  bool operator==(const Quantity&) const = default;
};

/// Converts to the canonical unit of the unit's dimension:
///   length -> nm, time -> s, rotational speed -> rpm,
///   thermal conductivity -> W/(m·K), mass fraction -> wt%, temperature -> °C,
///   percent and fold/times -> dimensionless fraction/multiple.
/// Units outside the table keep their value and get Dimension::unknown.
Quantity normalize_quantity(double value, std::string_view unit);

/// Canonical spelling for a known unit spelling, or nullopt.
std::optional<std::string> canonical_unit_of(std::string_view unit);

/// Quantity whose number begins exactly at `pos` (a leading '~' counts as part
/// of the number). Returns nullopt when no number starts there.
std::optional<Quantity> match_quantity_at(std::string_view text, std::size_t pos);

/// Left-to-right, non-overlapping maximal matches of the number grammar
/// (integers with 3-digit thousands groups, decimals, scientific notation,
/// '~' prefix, ratios a:b) with an optional trailing unit.
std::vector<Quantity> extract_quantities(std::string_view text);

struct Entity {
  std::string entity_id;
  std::string type;  // "parameter", "quantity" or "material"
  std::string name;  // normalized attribute or material name
  std::optional<double> value;
  std::optional<std::string> unit;
  std::optional<double> canonical_value;
  std::string canonical_unit;
  Dimension dimension = Dimension::unknown;
  std::string chunk_id;
  Span span;
  std::string provenance = "baseline";  // "baseline" | "external"

  bool operator==(const Entity&) const = default;
};

class EntityExtractor {
 public:
  virtual ~EntityExtractor() = default;
  /// Throws ExtractorUnavailable if an external backend fails.
  virtual std::vector<Entity> extract(const Chunk& chunk) = 0;
};

/// Rule-based extractor: every quantity is attributed to the nearest attribute
/// phrase that ends at most `window` tokens before it; material phrases become
/// value-less material entities.
class BaselineExtractor final : public EntityExtractor {
 public:
  static constexpr std::size_t kDefaultWindow = 6;

  BaselineExtractor();
  BaselineExtractor(PhraseLexicon attributes, PhraseLexicon materials,
                    std::size_t window = kDefaultWindow);

  std::vector<Entity> extract(const Chunk& chunk) override;

 private:
  PhraseLexicon attributes_;
  PhraseLexicon materials_;
  std::size_t window_;
};

/// Sends the chunk text plus the attribute lexicon to an LLM provider and
/// expects a JSON array of entities in the store's wire shape.
class LlmEntityExtractor final : public EntityExtractor {
 public:
  LlmEntityExtractor(std::shared_ptr<LlmProvider> provider, PhraseLexicon attributes);
  std::vector<Entity> extract(const Chunk& chunk) override;

 private:
  std::shared_ptr<LlmProvider> provider_;
  PhraseLexicon attributes_;
};

std::vector<Entity> extract_entities(const Chunk& chunk, EntityExtractor& extractor);

struct KGNode {
  std::int64_t node_id = 0;
  std::string type;  // "chunk" or the entity type
  std::string content;
  std::optional<double> value;
  std::string ref;  // chunk_id or entity_id backing the node

  bool operator==(const KGNode&) const = default;
};

struct KGEdge {
  std::int64_t source = 0;
  std::int64_t target = 0;
  std::string relation;

  bool operator==(const KGEdge&) const = default;
};

struct KnowledgeGraph {
  std::vector<KGNode> nodes;
  std::vector<KGEdge> edges;
};

/// Chunk nodes, deduplicated entity nodes, "mentions" edges from chunks and
/// "has_parameter" edges from materials to co-located parameters.
/// Throws DanglingEntity when an entity's chunk is not in `chunks`.
KnowledgeGraph build_graph(std::span<const Chunk> chunks, std::span<const Entity> entities);

struct MatchReport {
  std::vector<std::pair<std::size_t, std::size_t>> matched;  // (source index, target index)
  double precision = 1.0;
  double recall = 1.0;
  std::vector<std::size_t> unmatched_source;
  std::vector<std::size_t> unmatched_target;
};

/// True when both quantities share a dimension (and, for unknown dimensions,
/// a canonical unit) and their canonical values agree within
/// rel_tol * max(|a|, |b|, 1).
bool quantities_match(const Quantity& a, const Quantity& b, double rel_tol);

/// Maximum bipartite matching under quantities_match.
MatchReport compare_quantity_sets(std::span<const Quantity> source, std::span<const Quantity> target,
                                  double rel_tol = 1e-9);

} // namespace lsdb
