#include "lsdb/lexicon.hpp"

#include <algorithm>

#include "lsdb/assets.hpp"
#include "lsdb/error.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

namespace {

std::string underscore_name(const std::vector<std::string>& tokens) { return text::join(tokens, "_"); }

} // namespace

PhraseLexicon PhraseLexicon::parse(std::string_view content) {
  PhraseLexicon lex;
  for (auto raw : text::split_lines(content)) {
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto arrow = line.find("=>");
    if (arrow == std::string_view::npos) {
      lex.add(line, underscore_name(tokenize(line)));
    } else {
      auto name = text::trim(line.substr(arrow + 2));
      lex.add(text::trim(line.substr(0, arrow)), std::string(name));
    }
  }
  return lex;
}

void PhraseLexicon::add(std::string_view surface, std::string name) {
  auto tokens = tokenize(surface);
  if (tokens.empty() || name.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty lexicon entry '" + std::string(surface) + "'");
  }
  max_tokens_ = std::max(max_tokens_, tokens.size());
  // The normalized name is itself a valid spelling, which makes normalize idempotent.
  auto name_tokens = tokenize(name);
  if (!name_tokens.empty() && !phrases_.count(name_tokens)) {
    max_tokens_ = std::max(max_tokens_, name_tokens.size());
    phrases_[name_tokens] = name;
  }
  phrases_[std::move(tokens)] = std::move(name);
}

std::optional<std::string> PhraseLexicon::lookup(std::string_view phrase) const {
  auto it = phrases_.find(tokenize(phrase));
  if (it == phrases_.end()) return std::nullopt;
  return it->second;
}

std::string PhraseLexicon::normalize(std::string_view phrase) const {
  if (auto hit = lookup(phrase)) return *hit;
  return underscore_name(tokenize(phrase));
}

std::optional<PhraseLexicon::Hit> PhraseLexicon::match_ending_at(const std::vector<Token>& tokens,
                                                                 std::size_t end) const {
  if (end == 0 || end > tokens.size()) return std::nullopt;
  std::vector<std::string> key;
  for (std::size_t len = std::min(max_tokens_, end); len >= 1; --len) {
    key.clear();
    for (std::size_t i = end - len; i < end; ++i) key.push_back(tokens[i].text);
    auto it = phrases_.find(key);
    if (it != phrases_.end()) return Hit{it->second, end - len, len};
  }
  return std::nullopt;
}

std::optional<PhraseLexicon::Hit> PhraseLexicon::match_starting_at(const std::vector<Token>& tokens,
                                                                   std::size_t begin) const {
  if (begin >= tokens.size()) return std::nullopt;
  std::vector<std::string> key;
  for (std::size_t len = std::min(max_tokens_, tokens.size() - begin); len >= 1; --len) {
    key.clear();
    for (std::size_t i = begin; i < begin + len; ++i) key.push_back(tokens[i].text);
    auto it = phrases_.find(key);
    if (it != phrases_.end()) return Hit{it->second, begin, len};
  }
  return std::nullopt;
}

std::set<std::string> PhraseLexicon::names() const {
  std::set<std::string> out;
  for (const auto& [_, name] : phrases_) out.insert(name);
  return out;
}

StopwordSet StopwordSet::parse(std::string_view content) {
  StopwordSet set;
  for (auto raw : text::split_lines(content)) {
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    set.words_.insert(text::to_lower(line));
  }
  return set;
}

const PhraseLexicon& default_attribute_lexicon() {
  static const PhraseLexicon lex = PhraseLexicon::parse(assets::get("attribute_synonyms.txt"));
  return lex;
}

const PhraseLexicon& default_material_lexicon() {
  static const PhraseLexicon lex = PhraseLexicon::parse(assets::get("materials.txt"));
  return lex;
}

const StopwordSet& default_stopwords() {
  static const StopwordSet set = StopwordSet::parse(assets::get("stopwords.txt"));
  return set;
}

} // namespace lsdb
