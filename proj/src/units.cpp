// Quantity grammar and unit table.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "lsdb/extraction.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

namespace {

struct UnitDef {
  std::string_view spelling;
  std::string_view canonical;
  Dimension dimension;
  double factor;
  double offset = 0.0;
};

// NOTE: UTF-8 spellings. µ is U+00B5, μ is U+03BC, · is U+00B7, − is U+2212.
const std::vector<UnitDef>& unit_table() {
  static const std::vector<UnitDef> table = [] {
    std::vector<UnitDef> t = {
        // length -> nm
        {"nm", "nm", Dimension::length, 1.0},
        {"Å", "nm", Dimension::length, 0.1},
        {"µm", "nm", Dimension::length, 1e3},
        {"μm", "nm", Dimension::length, 1e3},
        {"um", "nm", Dimension::length, 1e3},
        {"mm", "nm", Dimension::length, 1e6},
        {"cm", "nm", Dimension::length, 1e7},
        {"m", "nm", Dimension::length, 1e9},
        // time -> s
        {"s", "s", Dimension::time, 1.0},
        {"sec", "s", Dimension::time, 1.0},
        {"secs", "s", Dimension::time, 1.0},
        {"seconds", "s", Dimension::time, 1.0},
        {"second", "s", Dimension::time, 1.0},
        {"min", "s", Dimension::time, 60.0},
        {"mins", "s", Dimension::time, 60.0},
        {"minute", "s", Dimension::time, 60.0},
        {"minutes", "s", Dimension::time, 60.0},
        {"h", "s", Dimension::time, 3600.0},
        {"hr", "s", Dimension::time, 3600.0},
        {"hrs", "s", Dimension::time, 3600.0},
        {"hour", "s", Dimension::time, 3600.0},
        {"hours", "s", Dimension::time, 3600.0},
        {"day", "s", Dimension::time, 86400.0},
        {"days", "s", Dimension::time, 86400.0},
        // rotational speed -> rpm
        {"rpm", "rpm", Dimension::rotational_speed, 1.0},
        {"RPM", "rpm", Dimension::rotational_speed, 1.0},
        {"r/min", "rpm", Dimension::rotational_speed, 1.0},
        {"rev/min", "rpm", Dimension::rotational_speed, 1.0},
        // mass fraction -> wt%
        {"wt%", "wt%", Dimension::mass_fraction, 1.0},
        {"wt.%", "wt%", Dimension::mass_fraction, 1.0},
        {"wt %", "wt%", Dimension::mass_fraction, 1.0},
        {"wt. %", "wt%", Dimension::mass_fraction, 1.0},
        // temperature -> °C
        {"°C", "°C", Dimension::temperature, 1.0},
        {"℃", "°C", Dimension::temperature, 1.0},
        {"K", "°C", Dimension::temperature, 1.0, -273.15},
        // percent and multiples -> dimensionless
        {"%", "", Dimension::dimensionless, 0.01},
        {"times", "", Dimension::dimensionless, 1.0},
        {"fold", "", Dimension::dimensionless, 1.0},
        {"-fold", "", Dimension::dimensionless, 1.0},
        // recognized but outside the normalization table
        {"vol%", "vol%", Dimension::unknown, 1.0},
        {"vol.%", "vol%", Dimension::unknown, 1.0},
        {"mg/mL", "mg/mL", Dimension::unknown, 1.0},
        {"g/mL", "g/mL", Dimension::unknown, 1.0},
        {"g/cm3", "g/cm3", Dimension::unknown, 1.0},
        {"m2/g", "m2/g", Dimension::unknown, 1.0},
        {"m²/g", "m2/g", Dimension::unknown, 1.0},
        {"mg", "mg", Dimension::unknown, 1.0},
        {"kg", "kg", Dimension::unknown, 1.0},
        {"g", "g", Dimension::unknown, 1.0},
        {"mL", "mL", Dimension::unknown, 1.0},
        {"ml", "mL", Dimension::unknown, 1.0},
        {"L", "L", Dimension::unknown, 1.0},
        {"mM", "mM", Dimension::unknown, 1.0},
        {"mol", "mol", Dimension::unknown, 1.0},
        {"GPa", "GPa", Dimension::unknown, 1.0},
        {"MPa", "MPa", Dimension::unknown, 1.0},
        {"kPa", "kPa", Dimension::unknown, 1.0},
        {"Pa", "Pa", Dimension::unknown, 1.0},
        {"kV", "kV", Dimension::unknown, 1.0},
        {"mV", "mV", Dimension::unknown, 1.0},
        {"V", "V", Dimension::unknown, 1.0},
        {"kHz", "kHz", Dimension::unknown, 1.0},
        {"MHz", "MHz", Dimension::unknown, 1.0},
        {"Hz", "Hz", Dimension::unknown, 1.0},
        {"kW", "kW", Dimension::unknown, 1.0},
        {"mW", "mW", Dimension::unknown, 1.0},
        {"W", "W", Dimension::unknown, 1.0},
        {"kJ", "kJ", Dimension::unknown, 1.0},
        {"J", "J", Dimension::unknown, 1.0},
        {"eV", "eV", Dimension::unknown, 1.0},
        {"cm-1", "cm-1", Dimension::unknown, 1.0},
        {"cm−1", "cm-1", Dimension::unknown, 1.0},
    };
    // Thermal conductivity spellings -> W/(m·K)
    for (std::string_view s :
         {"W/(m·K)", "W/(m K)", "W/(mK)", "W/(m*K)", "W/m·K", "W/m K", "W/mK", "W/m*K",
          "W m-1 K-1", "W m−1 K−1", "W·m-1·K-1", "W·m−1·K−1",
          "W m^-1 K^-1", "Wm-1K-1", "Wm−1K−1", "W·m^-1·K^-1"}) {
      t.push_back({s, "W/(m·K)", Dimension::thermal_conductivity, 1.0});
    }
    // Longest spelling first so "min" beats "m" and "W/m·K" beats "W".
    std::stable_sort(t.begin(), t.end(), [](const UnitDef& a, const UnitDef& b) {
      return a.spelling.size() > b.spelling.size();
    });
    return t;
  }();
  return table;
}

const UnitDef* find_unit(std::string_view spelling) {
  for (const auto& u : unit_table()) {
    if (u.spelling == spelling) return &u;
  }
  return nullptr;
}

// Canonical spellings that are not extraction spellings.
struct CanonicalDef {
  std::string_view name;
  Dimension dimension;
};
constexpr CanonicalDef kCanonicalOnly[] = {
    {"", Dimension::dimensionless},
    {"ratio", Dimension::ratio},
    {":", Dimension::ratio},
};

bool is_word_byte(char c) { return text::is_alnum(c) || c == '_'; }

// Byte length of a minus sign at pos ('-' or U+2212), 0 if none.
std::size_t minus_at(std::string_view t, std::size_t pos) {
  if (pos < t.size() && t[pos] == '-') return 1;
  if (t.substr(pos, 3) == "−") return 3;
  return 0;
}

struct NumberScan {
  double value = 0.0;
  std::size_t start = 0;
  std::size_t end = 0;
  bool tilde = false;
};

std::size_t skip_digits(std::string_view t, std::size_t i) {
  while (i < t.size() && text::is_digit(t[i])) ++i;
  return i;
}

// Number grammar at exactly `pos`.
std::optional<NumberScan> scan_number(std::string_view t, std::size_t pos) {
  NumberScan out;
  out.start = pos;
  std::size_t i = pos;
  if (i < t.size() && t[i] == '~') {
    out.tilde = true;
    ++i;
  }
  bool negative = false;
  if (std::size_t m = minus_at(t, i); m && !out.tilde) {
    // A sign only when the minus is not glued to a preceding word.
    if (i == 0 || text::is_space(t[i - 1]) || t[i - 1] == '(' || t[i - 1] == '[') {
      negative = true;
      i += m;
    } else {
      return std::nullopt;
    }
  }
  if (i >= t.size() || !text::is_digit(t[i])) return std::nullopt;
  const std::size_t digits_begin = i;
  if (out.start > 0 && (is_word_byte(t[out.start - 1]) || t[out.start - 1] == '.')) return std::nullopt;

  std::string literal;
  std::size_t j = skip_digits(t, i);
  literal.append(t.substr(i, j - i));
  // Thousands groups only after a 1-3 digit lead, each exactly three digits.
  if (j - digits_begin <= 3) {
    while (j + 3 < t.size() + 1 && j < t.size() && t[j] == ',') {
      std::size_t g = skip_digits(t, j + 1);
      if (g - (j + 1) != 3) break;
      literal.append(t.substr(j + 1, 3));
      j = g;
    }
  }
  if (j + 1 < t.size() && t[j] == '.' && text::is_digit(t[j + 1])) {
    std::size_t k = skip_digits(t, j + 1);
    literal.append(t.substr(j, k - j));
    j = k;
  }
  // Scientific notation: 1.5e-3 / 2E5 ...
  if (j < t.size() && (t[j] == 'e' || t[j] == 'E')) {
    std::size_t k = j + 1;
    std::string exp = "e";
    if (k < t.size() && (t[k] == '+' || t[k] == '-')) exp += t[k++];
    std::size_t d = skip_digits(t, k);
    if (d > k && (d >= t.size() || !text::is_alpha(t[d]))) {
      exp.append(t.substr(k, d - k));
      literal += exp;
      j = d;
    }
  }
  // ... and 1.5 × 10^3 / 1.5x10^-3 / 2×10−4
  {
    std::size_t k = j;
    if (k < t.size() && t[k] == ' ') ++k;
    std::size_t times_len = 0;
    if (t.substr(k, 2) == "×") times_len = 2;
    else if (k < t.size() && t[k] == 'x') times_len = 1;
    if (times_len) {
      k += times_len;
      if (k < t.size() && t[k] == ' ') ++k;
      if (t.substr(k, 2) == "10") {
        k += 2;
        bool caret = k < t.size() && t[k] == '^';
        if (caret) ++k;
        std::string exp = "e";
        std::size_t m = minus_at(t, k);
        if (m) {
          exp += '-';
          k += m;
        } else if (k < t.size() && t[k] == '+') {
          ++k;
        }
        std::size_t d = skip_digits(t, k);
        if (d > k && (caret || m)) {
          exp.append(t.substr(k, d - k));
          literal += exp;
          j = d;
        }
      }
    }
  }
  out.value = std::strtod(literal.c_str(), nullptr);
  if (negative) out.value = -out.value;
  out.end = j;
  return out;
}

bool unit_boundary(std::string_view t, std::size_t end, std::string_view spelling) {
  if (end >= t.size()) return true;
  if (!spelling.empty() && !is_word_byte(spelling.back())) return true;
  return !is_word_byte(t[end]);
}

struct UnitScan {
  std::string spelling;
  std::size_t end = 0;
};

std::optional<UnitScan> scan_unit(std::string_view t, std::size_t pos) {
  std::size_t p = pos;
  bool spaced = false;
  if (p < t.size() && t[p] == ' ') {
    ++p;
    spaced = true;
  }
  for (const auto& u : unit_table()) {
    if (t.substr(p, u.spelling.size()) == u.spelling && unit_boundary(t, p + u.spelling.size(), u.spelling)) {
      // "-fold" and "%" attach to the number directly.
      if (spaced && (u.spelling == "-fold")) continue;
      return UnitScan{std::string(u.spelling), p + u.spelling.size()};
    }
  }
  // An unknown unit glued to the number ("42parsec").
  if (!spaced && p < t.size() && text::is_alpha(t[p])) {
    std::size_t e = p;
    while (e < t.size() && text::is_alpha(t[e])) ++e;
    return UnitScan{std::string(t.substr(p, e - p)), e};
  }
  return std::nullopt;
}

bool preceded_by_word(std::string_view t, std::size_t pos, std::string_view word) {
  std::size_t e = pos;
  while (e > 0 && t[e - 1] == ' ') --e;
  if (e == pos || e < word.size()) return false;
  std::size_t b = e - word.size();
  if (!text::iequals(t.substr(b, word.size()), word)) return false;
  return b == 0 || !is_word_byte(t[b - 1]);
}

} // namespace

std::string_view dimension_name(Dimension d) noexcept {
  switch (d) {
    case Dimension::length: return "length";
    case Dimension::time: return "time";
    case Dimension::rotational_speed: return "rotational_speed";
    case Dimension::thermal_conductivity: return "thermal_conductivity";
    case Dimension::mass_fraction: return "mass_fraction";
    case Dimension::temperature: return "temperature";
    case Dimension::ratio: return "ratio";
    case Dimension::dimensionless: return "dimensionless";
    case Dimension::unknown: return "unknown";
  }
  return "unknown";
}

std::optional<Dimension> parse_dimension(std::string_view name) noexcept {
  for (Dimension d : {Dimension::length, Dimension::time, Dimension::rotational_speed,
                      Dimension::thermal_conductivity, Dimension::mass_fraction, Dimension::temperature,
                      Dimension::ratio, Dimension::dimensionless, Dimension::unknown}) {
    if (dimension_name(d) == name) return d;
  }
  return std::nullopt;
}

std::optional<std::string> canonical_unit_of(std::string_view unit) {
  auto u = text::trim(unit);
  if (const UnitDef* def = find_unit(u)) return std::string(def->canonical);
  for (const auto& c : kCanonicalOnly) {
    if (c.name == u) return c.dimension == Dimension::ratio ? std::string("ratio") : std::string();
  }
  for (const auto& def : unit_table()) {
    if (def.canonical == u) return std::string(def.canonical);
  }
  return std::nullopt;
}

Quantity normalize_quantity(double value, std::string_view unit) {
  Quantity q;
  q.value = value;
  q.unit = std::string(text::trim(unit));
  if (const UnitDef* def = find_unit(q.unit)) {
    q.dimension = def->dimension;
    q.canonical_unit = std::string(def->canonical);
    q.canonical_value = value * def->factor + def->offset;
    return q;
  }
  // Canonical names that are not themselves spellings ("W/(m·K)" is; "" is not).
  for (const auto& c : kCanonicalOnly) {
    if (c.name == q.unit) {
      q.dimension = c.dimension;
      q.canonical_unit = c.dimension == Dimension::ratio ? "ratio" : "";
      q.canonical_value = value;
      return q;
    }
  }
  for (const auto& def : unit_table()) {
    if (def.canonical == q.unit) {
      q.dimension = def.dimension;
      q.canonical_unit = q.unit;
      q.canonical_value = value;
      return q;
    }
  }
  q.dimension = Dimension::unknown;
  q.canonical_unit = q.unit;
  q.canonical_value = value;
  return q;
}

std::optional<Quantity> match_quantity_at(std::string_view t, std::size_t pos) {
  auto num = scan_number(t, pos);
  if (!num) return std::nullopt;

  // Ratio a:b (optionally spaced as "a : b").
  {
    std::size_t k = num->end;
    if (k < t.size() && t[k] == ' ') ++k;
    if (k < t.size() && t[k] == ':') {
      ++k;
      if (k < t.size() && t[k] == ' ') ++k;
      if (k < t.size() && text::is_digit(t[k])) {
        auto rhs = scan_number(t, k);
        if (rhs && rhs->value != 0.0 && !(rhs->end < t.size() && t[rhs->end] == ':')) {
          Quantity q = normalize_quantity(num->value / rhs->value, ":");
          q.unit = ":";
          q.approx = num->tilde || preceded_by_word(t, pos, "about") ||
                     preceded_by_word(t, pos, "approximately");
          q.span = Span{num->start, rhs->end};
          return q;
        }
      }
    }
  }

  Quantity q;
  std::size_t end = num->end;
  if (auto unit = scan_unit(t, num->end)) {
    q = normalize_quantity(num->value, unit->spelling);
    end = unit->end;
  } else {
    q = normalize_quantity(num->value, "");
  }
  q.approx = num->tilde || preceded_by_word(t, pos, "about") || preceded_by_word(t, pos, "approximately");
  q.span = Span{num->start, end};
  return q;
}

std::vector<Quantity> extract_quantities(std::string_view text) {
  std::vector<Quantity> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    char c = text[pos];
    if (c == '~' || c == '-' || text::is_digit(c) || static_cast<unsigned char>(c) == 0xE2) {
      if (auto q = match_quantity_at(text, pos)) {
        pos = q->span.end;
        out.push_back(std::move(*q));
        continue;
      }
    }
    ++pos;
  }
  return out;
}

} // namespace lsdb
