#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsdb {

struct Chunk;

/// A word token with byte offsets into the source text.
struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;
};

/// Lowercases and splits on every non-alphanumeric byte. Numbers stay as
/// tokens, empty tokens are dropped, nothing is stemmed.
std::vector<std::string> tokenize(std::string_view text);
std::vector<Token> tokenize_with_offsets(std::string_view text);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  /// Throws InvalidArgument unless k1 > 0 and 0 <= b <= 1.
  void validate() const;
};

struct Posting {
  std::string chunk_id;
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

struct ScoredId {
  std::string chunk_id;
  double score = 0.0;
};

/// Term -> postings over chunk texts. Immutable once built; every container is
/// ordered so two builds over the same chunk set compare equal regardless of
/// input order.
class InvertedIndex {
 public:
  static constexpr int kFormatVersion = 1;

  InvertedIndex() = default;

  /// Throws DuplicateChunkId when two chunks share an id.
  static InvertedIndex build(std::span<const Chunk> chunks);
  static InvertedIndex build_from_texts(
      const std::vector<std::pair<std::string, std::string>>& id_and_text);

  std::size_t doc_count() const { return lengths_.size(); }
  double avg_length() const { return avg_length_; }
  std::size_t doc_length(std::string_view chunk_id) const;
  std::size_t df(std::string_view term) const;
  const std::vector<Posting>* postings(std::string_view term) const;
  const std::map<std::string, std::vector<Posting>, std::less<>>& terms() const { return postings_; }
  const std::map<std::string, std::size_t, std::less<>>& lengths() const { return lengths_; }

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); unseen terms use df = 0.
  double idf(std::string_view term) const;

  /// Okapi BM25 of one chunk against the distinct query terms.
  double score(std::string_view chunk_id, std::span<const std::string> query_tokens,
               const Bm25Params& params) const;

  /// Top-k chunks by BM25, score descending then chunk id ascending. Chunks
  /// scoring 0 are omitted.
  std::vector<ScoredId> search(std::span<const std::string> query_tokens, std::size_t k,
                               const Bm25Params& params) const;

  void save(std::ostream& out) const;
  static InvertedIndex load(std::istream& in);

  bool operator==(const InvertedIndex&) const = default;

 private:
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
  std::map<std::string, std::size_t, std::less<>> lengths_;
  double avg_length_ = 0.0;
};

inline double idf(std::string_view term, const InvertedIndex& index) { return index.idf(term); }

} // namespace lsdb
