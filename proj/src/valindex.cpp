#include "lsdb/valindex.hpp"

#include <algorithm>
#include <cmath>

#include "lsdb/error.hpp"

namespace lsdb {

std::string_view comparator_name(Comparator c) noexcept {
  switch (c) {
    case Comparator::LT: return "<";
    case Comparator::LE: return "<=";
    case Comparator::EQ: return "=";
    case Comparator::GE: return ">=";
    case Comparator::GT: return ">";
    case Comparator::BETWEEN: return "between";
  }
  return "=";
}

std::optional<Comparator> parse_comparator(std::string_view s) noexcept {
  if (s == "<" || s == "LT" || s == "lt") return Comparator::LT;
  if (s == "<=" || s == "\xE2\x89\xA4" || s == "LE" || s == "le") return Comparator::LE;
  if (s == "=" || s == "==" || s == "EQ" || s == "eq") return Comparator::EQ;
  if (s == ">=" || s == "\xE2\x89\xA5" || s == "GE" || s == "ge") return Comparator::GE;
  if (s == ">" || s == "GT" || s == "gt") return Comparator::GT;
  if (s == "between" || s == "BETWEEN") return Comparator::BETWEEN;
  return std::nullopt;
}

Condition make_condition(std::string attribute, Comparator comparator, double value,
                         std::optional<double> value_hi, std::string unit) {
  if (attribute.empty()) throw Error(ErrorCode::InvalidArgument, "condition attribute is empty");
  if (comparator == Comparator::BETWEEN && !value_hi) {
    throw Error(ErrorCode::InvalidArgument, "between condition needs a high bound");
  }
  if (comparator != Comparator::BETWEEN) value_hi.reset();
  Condition c;
  c.attribute = std::move(attribute);
  c.comparator = comparator;
  c.value = value;
  c.value_hi = value_hi;
  c.unit = std::move(unit);
  const Quantity lo = normalize_quantity(value, c.unit);
  c.canonical_lo = lo.canonical_value;
  c.canonical_hi = value_hi ? normalize_quantity(*value_hi, c.unit).canonical_value : c.canonical_lo;
  c.canonical_unit = lo.canonical_unit;
  c.dimension = lo.dimension;
  if (c.canonical_lo > c.canonical_hi) {
    throw Error(ErrorCode::InvalidArgument, "between condition has low bound above high bound");
  }
  return c;
}

bool satisfies(const Condition& c, double canonical_value, std::string_view canonical_unit) {
  double lo = c.value;
  double hi = c.value_hi.value_or(c.value);
  if (!c.unit.empty()) {
    if (canonical_unit != c.canonical_unit) return false;
    lo = c.canonical_lo;
    hi = c.canonical_hi;
  }
  const double x = canonical_value;
  switch (c.comparator) {
    case Comparator::LT: return x < lo;
    case Comparator::LE: return x <= lo;
    case Comparator::GE: return x >= lo;
    case Comparator::GT: return x > lo;
    case Comparator::BETWEEN: return x >= lo && x <= hi;
    case Comparator::EQ: {
      const double scale = std::max({std::fabs(lo), std::fabs(x), 1.0});
      return std::fabs(x - lo) <= kEqualityTolerance * scale;
    }
  }
  return false;
}

ValueIndex ValueIndex::build(std::span<const Entity> entities, const std::set<std::string>* known_chunks) {
  ValueIndex index;
  for (const auto& e : entities) {
    if (known_chunks && !known_chunks->count(e.chunk_id)) {
      throw Error(ErrorCode::DanglingEntity, "entity " + e.entity_id + " references unknown chunk " + e.chunk_id);
    }
    if (!e.canonical_value || e.name.empty()) continue;
    index.by_attribute_[e.name].push_back(ValueEntry{*e.canonical_value, e.chunk_id, e.canonical_unit});
  }
  for (auto& [name, list] : index.by_attribute_) {
    std::sort(list.begin(), list.end(), [](const ValueEntry& a, const ValueEntry& b) {
      if (a.canonical_value != b.canonical_value) return a.canonical_value < b.canonical_value;
      if (a.chunk_id != b.chunk_id) return a.chunk_id < b.chunk_id;
      return a.canonical_unit < b.canonical_unit;
    });
  }
  return index;
}

bool ValueIndex::has_attribute(std::string_view attribute) const {
  return by_attribute_.find(attribute) != by_attribute_.end();
}

const std::vector<ValueEntry>* ValueIndex::entries(std::string_view attribute) const {
  auto it = by_attribute_.find(attribute);
  return it == by_attribute_.end() ? nullptr : &it->second;
}

std::set<std::string> ValueIndex::match(const Condition& condition) const {
  std::set<std::string> out;
  const auto* list = entries(condition.attribute);
  if (list == nullptr) return out;
  for (const auto& entry : *list) {
    if (satisfies(condition, entry.canonical_value, entry.canonical_unit)) out.insert(entry.chunk_id);
  }
  return out;
}

std::set<std::string> match_condition(const Condition& condition, const ValueIndex& index) {
  return index.match(condition);
}

double relational_score(std::string_view chunk_id, std::span<const Condition> conditions,
                        const ValueIndex& index) {
  if (conditions.empty()) return 0.0;
  std::size_t satisfied = 0;
  for (const auto& c : conditions) {
    const auto* list = index.entries(c.attribute);
    if (list == nullptr) continue;
    const bool hit = std::any_of(list->begin(), list->end(), [&](const ValueEntry& e) {
      return e.chunk_id == chunk_id && satisfies(c, e.canonical_value, e.canonical_unit);
    });
    if (hit) ++satisfied;
  }
  return static_cast<double>(satisfied) / static_cast<double>(conditions.size());
}

} // namespace lsdb
