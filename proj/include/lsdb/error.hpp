#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lsdb {

enum class ErrorCode {
  MissingFrontMatter,
  MissingArticleId,
  MalformedHeading,
  SchemaInvalid,
  StorageFailure,
  UnknownArticle,
  StoreLocked,
  DuplicateChunkId,
  ExtractorUnavailable,
  DanglingEntity,
  EmbedderUnavailable,
  DimensionMismatch,
  EmptyQuery,
  RewriterUnavailable,
  StaleIndex,
  InvalidWeights,
  InvalidArgument,
  EmptyResult,
  UnknownPlaceholder,
  InvalidPrompt,
  GeneratorUnavailable,
  DivisionByZero,
  EmptyObjective,
  StaleDraft,
  NoRetrievedChunks,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every recoverable failure in the library is reported as an Error carrying a
// stable code; callers branch on code(), humans read what().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

} // namespace lsdb
