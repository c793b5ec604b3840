#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsdb/extraction.hpp"

namespace lsdb {

enum class Comparator { LT, LE, EQ, GE, GT, BETWEEN };

std::string_view comparator_name(Comparator c) noexcept;
std::optional<Comparator> parse_comparator(std::string_view symbol) noexcept;

/// Relative tolerance for EQ conditions.
inline constexpr double kEqualityTolerance = 1e-6;

struct Condition {
  std::string attribute;  // normalized name
  Comparator comparator = Comparator::EQ;
  double value = 0.0;
  std::optional<double> value_hi;  // BETWEEN only
  std::string unit;
  double canonical_lo = 0.0;
  double canonical_hi = 0.0;  // equals canonical_lo unless BETWEEN
  std::string canonical_unit;
  Dimension dimension = Dimension::dimensionless;
  std::string text;  // surface form when parsed from a query
  Span span;

  bool operator==(const Condition&) const = default;
};

/// Builds a canonicalized condition. Throws InvalidArgument for an empty
/// attribute, a BETWEEN without a high bound, or low > high.
Condition make_condition(std::string attribute, Comparator comparator, double value,
                         std::optional<double> value_hi, std::string unit);

/// Whether a stored canonical value satisfies the condition. Conditions with a
/// unit only accept values in the same canonical unit; unit-less conditions
/// compare raw numbers.
bool satisfies(const Condition& condition, double canonical_value, std::string_view canonical_unit);

struct ValueEntry {
  double canonical_value = 0.0;
  std::string chunk_id;
  std::string canonical_unit;
};

/// Attribute -> entries sorted by (canonical value, chunk id).
class ValueIndex {
 public:
  ValueIndex() = default;

  /// When `known_chunks` is given, throws DanglingEntity for entities whose
  /// chunk is not in it.
  static ValueIndex build(std::span<const Entity> entities,
                          const std::set<std::string>* known_chunks = nullptr);

  bool has_attribute(std::string_view attribute) const;
  const std::vector<ValueEntry>* entries(std::string_view attribute) const;
  std::size_t attribute_count() const { return by_attribute_.size(); }

  std::set<std::string> match(const Condition& condition) const;

 private:
  std::map<std::string, std::vector<ValueEntry>, std::less<>> by_attribute_;
};

inline ValueIndex index_entities(std::span<const Entity> entities,
                                 const std::set<std::string>* known_chunks = nullptr) {
  return ValueIndex::build(entities, known_chunks);
}

std::set<std::string> match_condition(const Condition& condition, const ValueIndex& index);

/// Fraction of `conditions` the chunk satisfies; 0 for an empty list.
double relational_score(std::string_view chunk_id, std::span<const Condition> conditions,
                        const ValueIndex& index);

} // namespace lsdb
