#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lsdb/docmodel.hpp"
#include "lsdb/extraction.hpp"
#include "lsdb/llm.hpp"

namespace lsdb {

struct QualityReport {
  double grounding_ratio = 1.0;
  double entity_coverage = 0.0;
  std::vector<Quantity> ungrounded;
};

enum class ReviewKind { accept, reject, edit };

std::string_view review_kind_name(ReviewKind kind) noexcept;
std::optional<ReviewKind> parse_review_kind(std::string_view name) noexcept;

struct ReviewDecision {
  ReviewKind kind = ReviewKind::accept;
  std::string edited_text;  // guide text in the experience file format, edit only
  std::string note;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::vector<std::string> batch_chunk_ids;
  std::string draft_digest;
  QualityReport quality;
  ReviewDecision decision;
  std::string timestamp;
  std::size_t version_after = 0;
  std::string doc_digest_after;
};

struct ExperienceSection {
  std::string title;
  std::string body;

  bool operator==(const ExperienceSection&) const = default;
};

struct ExperienceDoc {
  std::string objective;
  std::size_t version = 0;
  std::vector<ExperienceSection> sections;
  std::vector<IterationRecord> audit_trail;

  /// SHA-256 over objective and sections (not version or audit trail).
  std::string digest() const;
  ExperienceSection* section(std::string_view title);
  const ExperienceSection* section(std::string_view title) const;
};

/// A proposed next state of a guide, bound to the version it was derived from.
struct Draft {
  ExperienceDoc content;
  std::size_t base_version = 0;
  std::string base_digest;
  std::vector<std::string> batch_chunk_ids;
};

std::vector<std::string> default_experience_sections();

/// Version 0 guide with empty sections. Throws EmptyObjective.
ExperienceDoc init_experience(std::string_view objective,
                              const std::vector<std::string>& section_titles = default_experience_sections());

/// Guide text ("# <Section>" headings) used by edit decisions and the file
/// format; optional front-matter carries objective and version.
std::string render_experience(const ExperienceDoc& doc);
ExperienceDoc parse_experience(std::string_view text);

std::string_view default_distillation_template();

/// Without a provider: appends each chunk's quantity-bearing sentences under
/// "Parameters" and "<chunk_id>: <heading>" under "References". With a provider:
/// sends the distillation prompt and parses the returned guide.
/// Throws InvalidArgument for an empty batch, GeneratorUnavailable on failure.
Draft integrate_batch(const ExperienceDoc& doc, const std::vector<Chunk>& batch,
                      LlmProvider* provider = nullptr);

/// Quantities a guide asserts (the References section is metadata and skipped).
std::vector<Quantity> guide_quantities(const ExperienceDoc& doc);

/// Grounding of the draft's quantities against the union of the sources'
/// quantities, plus coverage of the sources' parameter entities.
QualityReport quality_check(const ExperienceDoc& draft, const std::vector<Chunk>& sources,
                            double rel_tol = 1e-6);

using Clock = std::function<std::string()>;
/// UTC ISO-8601 now, or SOURCE_DATE_EPOCH when that variable is set.
std::string default_timestamp();

/// Applies a review to the current guide and appends an IterationRecord.
/// Throws StaleDraft when the draft was not derived from `doc`'s version.
ExperienceDoc apply_review(const ExperienceDoc& doc, const Draft& draft, const ReviewDecision& decision,
                           const QualityReport& quality = {}, const Clock& clock = default_timestamp);

enum class ReviewMode { interactive, auto_accept };

using Reviewer = std::function<ReviewDecision(const ExperienceDoc& current, const Draft& draft,
                                              const QualityReport& quality)>;
using ChunkRetriever = std::function<std::vector<Chunk>(std::string_view objective)>;

struct LoopConfig {
  std::size_t batch_size = 20;
  std::size_t max_iterations = 10;
  ReviewMode review_mode = ReviewMode::auto_accept;
  Reviewer reviewer;  // required for interactive mode
  LlmProvider* provider = nullptr;  // nullptr: deterministic mock integration
  std::vector<std::string> sections = default_experience_sections();
  Clock clock = default_timestamp;
};

/// retrieve -> batch -> (integrate, quality_check, review)*; stops when batches
/// run out, after max_iterations, or after two consecutive rejects.
/// Throws NoRetrievedChunks.
ExperienceDoc run_loop(std::string_view objective, const ChunkRetriever& retriever,
                       const LoopConfig& config);

/// Re-applies recorded decisions over recorded batches from a fresh guide.
ExperienceDoc replay(std::string_view objective, const std::vector<IterationRecord>& trail,
                     const std::function<const Chunk*(std::string_view)>& lookup,
                     const std::vector<std::string>& sections = default_experience_sections(),
                     LlmProvider* provider = nullptr);

} // namespace lsdb
