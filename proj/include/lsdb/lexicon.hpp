#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lsdb/lexindex.hpp"

namespace lsdb {

/// Maps multi-word surface phrases to normalized names. Phrases are compared
/// as lexindex token sequences, so "Lateral-Size" and "lateral size" agree.
class PhraseLexicon {
 public:
  struct Hit {
    std::string name;
    std::size_t first_token = 0;  // index into the token list
    std::size_t token_count = 0;
  };

  /// Lines of "surface => name" or a bare "surface" (name = tokens joined by
  /// '_'). Blank lines and lines starting with '#' are skipped.
  static PhraseLexicon parse(std::string_view text);

  void add(std::string_view surface, std::string name);

  /// Normalized name for a known phrase, otherwise the phrase's tokens joined
  /// by '_'. Idempotent: normalizing a normalized name returns it unchanged.
  std::string normalize(std::string_view phrase) const;
  std::optional<std::string> lookup(std::string_view phrase) const;

  /// Longest phrase whose last token is tokens[end - 1].
  std::optional<Hit> match_ending_at(const std::vector<Token>& tokens, std::size_t end) const;
  /// Longest phrase whose first token is tokens[begin].
  std::optional<Hit> match_starting_at(const std::vector<Token>& tokens, std::size_t begin) const;

  std::set<std::string> names() const;
  std::size_t size() const { return phrases_.size(); }
  bool empty() const { return phrases_.empty(); }

 private:
  std::map<std::vector<std::string>, std::string> phrases_;
  std::size_t max_tokens_ = 0;
};

using AttributeSynonyms = PhraseLexicon;

class StopwordSet {
 public:
  static StopwordSet parse(std::string_view text);
  bool contains(std::string_view token) const { return words_.count(std::string(token)) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::set<std::string> words_;
};

const PhraseLexicon& default_attribute_lexicon();
const PhraseLexicon& default_material_lexicon();
const StopwordSet& default_stopwords();

} // namespace lsdb
