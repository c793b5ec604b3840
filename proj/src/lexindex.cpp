#include "lsdb/lexindex.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "lsdb/docmodel.hpp"
#include "lsdb/error.hpp"
#include "lsdb/text.hpp"

namespace lsdb {

std::vector<Token> tokenize_with_offsets(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!text::is_alnum(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && text::is_alnum(text[i])) ++i;
    tokens.push_back(Token{text::to_lower(text.substr(start, i - start)), start, i});
  }
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

void Bm25Params::validate() const {
  if (!(k1 > 0.0) || !std::isfinite(k1)) {
    throw Error(ErrorCode::InvalidArgument, "bm25 k1 must be > 0");
  }
  if (!(b >= 0.0 && b <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "bm25 b must lie in [0, 1]");
  }
}

InvertedIndex InvertedIndex::build_from_texts(
    const std::vector<std::pair<std::string, std::string>>& id_and_text) {
  InvertedIndex index;
  std::map<std::string, std::map<std::string, std::uint32_t>> tf_by_term;
  std::size_t total = 0;
  for (const auto& [id, body] : id_and_text) {
    if (index.lengths_.count(id)) {
      throw Error(ErrorCode::DuplicateChunkId, "duplicate chunk id " + id);
    }
    auto tokens = tokenize(body);
    index.lengths_[id] = tokens.size();
    total += tokens.size();
    for (auto& t : tokens) ++tf_by_term[t][id];
  }
  for (auto& [term, per_chunk] : tf_by_term) {
    auto& list = index.postings_[term];
    list.reserve(per_chunk.size());
    for (auto& [id, tf] : per_chunk) list.push_back(Posting{id, tf});
  }
  index.avg_length_ = index.lengths_.empty()
                          ? 0.0
                          : static_cast<double>(total) / static_cast<double>(index.lengths_.size());
  return index;
}

InvertedIndex InvertedIndex::build(std::span<const Chunk> chunks) {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(chunks.size());
  for (const auto& c : chunks) pairs.emplace_back(c.chunk_id, c.text);
  return build_from_texts(pairs);
}

std::size_t InvertedIndex::doc_length(std::string_view chunk_id) const {
  auto it = lengths_.find(chunk_id);
  return it == lengths_.end() ? 0 : it->second;
}

std::size_t InvertedIndex::df(std::string_view term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

const std::vector<Posting>* InvertedIndex::postings(std::string_view term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

double InvertedIndex::idf(std::string_view term) const {
  const double n = static_cast<double>(doc_count());
  const double d = static_cast<double>(df(term));
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

namespace {

std::vector<std::string> distinct_terms(std::span<const std::string> query_tokens) {
  std::set<std::string> seen(query_tokens.begin(), query_tokens.end());
  return {seen.begin(), seen.end()};
}

double term_weight(double idf, double tf, double len, double avg, const Bm25Params& p) {
  const double norm = avg > 0.0 ? len / avg : 0.0;
  return idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

} // namespace

double InvertedIndex::score(std::string_view chunk_id, std::span<const std::string> query_tokens,
                            const Bm25Params& params) const {
  auto len_it = lengths_.find(chunk_id);
  if (len_it == lengths_.end()) return 0.0;
  double total = 0.0;
  for (const auto& term : distinct_terms(query_tokens)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& list = it->second;
    auto p = std::lower_bound(list.begin(), list.end(), chunk_id,
                              [](const Posting& a, std::string_view id) { return a.chunk_id < id; });
    if (p == list.end() || p->chunk_id != chunk_id) continue;
    total += term_weight(idf(term), p->tf, static_cast<double>(len_it->second), avg_length_, params);
  }
  return total;
}

std::vector<ScoredId> InvertedIndex::search(std::span<const std::string> query_tokens, std::size_t k,
                                            const Bm25Params& params) const {
  params.validate();
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  // Accumulate per chunk in term order so the floating-point sum matches score().
  std::map<std::string, double, std::less<>> acc;
  for (const auto& term : distinct_terms(query_tokens)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w_idf = idf(term);
    for (const auto& p : it->second) {
      const double len = static_cast<double>(lengths_.find(p.chunk_id)->second);
      acc[p.chunk_id] += term_weight(w_idf, p.tf, len, avg_length_, params);
    }
  }
  std::vector<ScoredId> out;
  out.reserve(acc.size());
  for (auto& [id, s] : acc) {
    if (s > 0.0) out.push_back(ScoredId{id, s});
  }
  auto by_rank = [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk_id < b.chunk_id;
  };
  if (out.size() > k) {
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), by_rank);
    out.resize(k);
  } else {
    std::sort(out.begin(), out.end(), by_rank);
  }
  return out;
}

// Line-based file:
//   lsdb-lexical <version>
//   docs <N> <avg_length as %.17g>
//   D <chunk_id> <length>          (N lines)
//   T <term> <chunk_id>:<tf> ...   (one line per term)
void InvertedIndex::save(std::ostream& out) const {
  out << "lsdb-lexical " << kFormatVersion << '\n';
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", avg_length_);
  out << "docs " << lengths_.size() << ' ' << buf << '\n';
  for (const auto& [id, len] : lengths_) out << "D " << id << ' ' << len << '\n';
  for (const auto& [term, list] : postings_) {
    out << "T " << term;
    for (const auto& p : list) out << ' ' << p.chunk_id << ':' << p.tf;
    out << '\n';
  }
}

InvertedIndex InvertedIndex::load(std::istream& in) {
  auto fail = [](const std::string& why) {
    return Error(ErrorCode::StorageFailure, "lexical index: " + why);
  };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "lsdb-lexical") throw fail("bad header");
  if (version != kFormatVersion) throw fail("unsupported version " + std::to_string(version));
  std::string tag;
  std::size_t n = 0;
  std::string avg;
  if (!(in >> tag >> n >> avg) || tag != "docs") throw fail("bad docs line");
  InvertedIndex index;
  index.avg_length_ = std::strtod(avg.c_str(), nullptr);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ls >> tag;
    if (tag == "D") {
      std::string id;
      std::size_t len = 0;
      if (!(ls >> id >> len)) throw fail("bad D line");
      index.lengths_[id] = len;
    } else if (tag == "T") {
      std::string term;
      ls >> term;
      auto& list = index.postings_[term];
      std::string item;
      while (ls >> item) {
        auto colon = item.rfind(':');
        if (colon == std::string::npos) throw fail("bad posting " + item);
        list.push_back(Posting{item.substr(0, colon),
                               static_cast<std::uint32_t>(std::stoul(item.substr(colon + 1)))});
      }
    } else {
      throw fail("unknown record " + tag);
    }
  }
  if (index.lengths_.size() != n) throw fail("document count mismatch");
  return index;
}

} // namespace lsdb
