#include "lsdb/error.hpp"

namespace lsdb {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingFrontMatter: return "MissingFrontMatter";
    case ErrorCode::MissingArticleId: return "MissingArticleId";
    case ErrorCode::MalformedHeading: return "MalformedHeading";
    case ErrorCode::SchemaInvalid: return "SchemaInvalid";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::UnknownArticle: return "UnknownArticle";
    case ErrorCode::StoreLocked: return "StoreLocked";
    case ErrorCode::DuplicateChunkId: return "DuplicateChunkId";
    case ErrorCode::ExtractorUnavailable: return "ExtractorUnavailable";
    case ErrorCode::DanglingEntity: return "DanglingEntity";
    case ErrorCode::EmbedderUnavailable: return "EmbedderUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::RewriterUnavailable: return "RewriterUnavailable";
    case ErrorCode::StaleIndex: return "StaleIndex";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyResult: return "EmptyResult";
    case ErrorCode::UnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::InvalidPrompt: return "InvalidPrompt";
    case ErrorCode::GeneratorUnavailable: return "GeneratorUnavailable";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::EmptyObjective: return "EmptyObjective";
    case ErrorCode::StaleDraft: return "StaleDraft";
    case ErrorCode::NoRetrievedChunks: return "NoRetrievedChunks";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

} // namespace lsdb
