#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsdb/docmodel.hpp"
#include "lsdb/extraction.hpp"
#include "lsdb/fusion.hpp"
#include "lsdb/llm.hpp"
#include "lsdb/querykit.hpp"

namespace lsdb {

struct ContextEntry {
  std::string citation;  // "[Ref i]"
  std::string chunk_id;
  std::string article_id;
  Category category = Category::Preparation;
  std::string text;
  std::size_t tokens = 0;
};

struct ContextPackage {
  std::vector<ContextEntry> entries;
  std::size_t tokens_used = 0;
  std::size_t budget = 0;
  std::map<std::string, std::string> citations;  // citation -> chunk_id
};

using ChunkLookup = std::function<const Chunk*(std::string_view chunk_id)>;

inline constexpr std::size_t kDefaultContextBudget = 4000;

/// Orders selected chunks by article rank then module priority and packs them
/// greedily (a chunk that does not fit is skipped, never truncated).
/// Throws EmptyResult when nothing fits.
ContextPackage assemble_context(const RetrievalResult& result, const ChunkLookup& lookup,
                                std::size_t budget_tokens = kDefaultContextBudget);

/// Context listing as rendered into prompts: one line per entry,
/// "[Ref i] (<chunk_id>) <text with line breaks folded>".
std::string render_context(const ContextPackage& context);

/// Substitutes {{QUERY}}, {{CONTEXT}} and {{CITATION_INSTRUCTIONS}}. Missing
/// placeholders are fine; any other {{NAME}} throws UnknownPlaceholder.
std::string build_prompt(const CompositeQuery& query, const ContextPackage& context,
                         std::string_view prompt_template);
std::string_view default_generation_template();

enum class GeneratorKind { mock_echo, external_service };

std::string_view generator_kind_name(GeneratorKind kind) noexcept;
std::optional<GeneratorKind> parse_generator_kind(std::string_view name) noexcept;

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::mock_echo;
  ProviderConfig provider;
};

/// Deterministic offline answer: the prompt's "Question:" line followed by
/// every quantity-bearing sentence of the context, each tagged with its citation.
std::string mock_echo_answer(std::string_view prompt);

/// Provider that answers every request with mock_echo_answer(user text).
class MockEchoProvider final : public LlmProvider {
 public:
  std::string complete(const LlmRequest& request) override;
};

std::shared_ptr<LlmProvider> make_provider(const GeneratorSpec& spec);

/// Throws InvalidPrompt for an empty prompt and GeneratorUnavailable when the
/// external service fails.
std::string generate(std::string_view prompt, const GeneratorSpec& spec);

/// Removes "[Ref i]" citation markers, keeping byte offsets (markers become spaces).
std::string strip_citations(std::string_view text);

struct GroundedQuantity {
  Quantity quantity;
  std::string source;  // chunk_id, or "query" for values restated from the question
};

struct DerivedQuantity {
  Quantity quantity;
  std::string formula;  // "a/b", "(a-b)/b", "a-b" or "a+b"
  double a = 0.0;
  double b = 0.0;
  double expected = 0.0;
};

struct GroundingReport {
  std::vector<GroundedQuantity> grounded;
  std::vector<DerivedQuantity> derived;
  std::vector<Quantity> ungrounded;
  double ratio = 1.0;  // (grounded + derived) / total, 1 when no quantities

  std::size_t total() const { return grounded.size() + derived.size() + ungrounded.size(); }
};

inline constexpr double kDerivedTolerance = 0.01;

/// Classifies each quantity of the answer (citation markers ignored):
/// grounded when a context quantity (or one in `query_text`) matches within
/// rel_tol; derived when within 1% of a/b, (a-b)/b, a-b or a+b for a pair of
/// grounded answer quantities; otherwise ungrounded.
GroundingReport verify_grounding(std::string_view answer, const ContextPackage& context,
                                 double rel_tol = 1e-6, std::string_view query_text = {});

/// (a - b) / b. Throws DivisionByZero for b == 0.
double relative_change(double a, double b);

} // namespace lsdb
