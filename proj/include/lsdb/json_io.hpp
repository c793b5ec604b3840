#pragma once

// JSON wire shapes for records and API payloads. Field names are stable and
// documented in README.md.

#include "json.hpp"

#include "lsdb/docmodel.hpp"
#include "lsdb/evalharness.hpp"
#include "lsdb/experience.hpp"
#include "lsdb/extraction.hpp"
#include "lsdb/fusion.hpp"
#include "lsdb/ragkit.hpp"
#include "lsdb/store.hpp"
#include "lsdb/valindex.hpp"

namespace lsdb {

using Json = nlohmann::json;

void to_json(Json& j, const ArticleMeta& m);
void from_json(const Json& j, ArticleMeta& m);
void to_json(Json& j, const SectionUnit& s);
void from_json(const Json& j, SectionUnit& s);
void to_json(Json& j, const ModuleBlock& m);
void from_json(const Json& j, ModuleBlock& m);
void to_json(Json& j, const Article& a);
void from_json(const Json& j, Article& a);
void to_json(Json& j, const Chunk& c);
void from_json(const Json& j, Chunk& c);
void to_json(Json& j, const Quantity& q);
void from_json(const Json& j, Quantity& q);
void to_json(Json& j, const Entity& e);
void from_json(const Json& j, Entity& e);
void to_json(Json& j, const KGNode& n);
void from_json(const Json& j, KGNode& n);
void to_json(Json& j, const KGEdge& e);
void from_json(const Json& j, KGEdge& e);
void to_json(Json& j, const Issue& i);
void to_json(Json& j, const ValidationReport& r);
void to_json(Json& j, const StoreManifest& m);
void from_json(const Json& j, StoreManifest& m);
void to_json(Json& j, const CorpusStats& s);
void to_json(Json& j, const Condition& c);
void to_json(Json& j, const Weights& w);
void to_json(Json& j, const ScoredChunk& c);
void to_json(Json& j, const RetrievalResult& r);
void to_json(Json& j, const ContextPackage& c);
void to_json(Json& j, const GroundingReport& g);
void to_json(Json& j, const QualityReport& q);
void from_json(const Json& j, QualityReport& q);
void to_json(Json& j, const ReviewDecision& d);
void from_json(const Json& j, ReviewDecision& d);
void to_json(Json& j, const IterationRecord& r);
void from_json(const Json& j, IterationRecord& r);
void to_json(Json& j, const HitRates& r);
void to_json(Json& j, const HitReport& r);
void to_json(Json& j, const SweepRow& r);

/// CSV rendering of corpus statistics: one row per category plus a total row.
std::string corpus_stats_csv(const CorpusStats& stats);

} // namespace lsdb
