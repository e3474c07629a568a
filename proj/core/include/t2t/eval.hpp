#pragma once

// Extractive content metrics (relation generation, content selection,
// content ordering) driven by a rule-based fact extractor, plus corpus BLEU.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "t2t/data.hpp"

namespace t2t {

struct ExtractedFact {
  std::string entity;
  std::string rtype;
  std::string value;
  std::size_t position = 0;  // token index of the number

  bool operator==(const ExtractedFact&) const = default;
};

struct ExtractorConfig {
  std::size_t span = 15;  // max distance from an entity mention to its number
  // A word right after a number names its type ...
  std::map<std::string, std::string> type_after = {
      {"points", "PTS"}, {"assists", "AST"}, {"rebounds", "REB"}};
  // ... or a verb right before it.
  std::map<std::string, std::string> type_before = {{"scored", "PTS"}};
};

/// Attributes each number to the closest preceding entity mention within
/// the span. The type comes from an adjacent keyword or a column name
/// following the number; failing that, from the first column of the
/// entity's row holding that value. Numbers that resolve to nothing are
/// skipped. Each (entity, type) is kept once, at its first mention.
std::vector<ExtractedFact> extract_records(std::span<const std::string> text,
                                           const TableSet& tables,
                                           const ExtractorConfig& config = {});

/// Whether the table holds `fact.value` for (fact.entity, fact.rtype).
bool fact_supported(const ExtractedFact& fact, const TableSet& tables);

struct RgScore {
  double precision = 0.0;  // percent; 0 when nothing was extracted
  std::size_t count = 0;
  std::size_t correct = 0;
};
RgScore rg(std::span<const std::string> generated, const TableSet& tables,
           const ExtractorConfig& config = {});

struct CsScore {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
};
CsScore cs(std::span<const std::string> generated, std::span<const std::string> reference,
           const TableSet& tables, const ExtractorConfig& config = {});

/// Normalized Damerau-Levenshtein similarity of the (entity, type) mention
/// orders, in percent.
double co(std::span<const std::string> generated, std::span<const std::string> reference,
          const TableSet& tables, const ExtractorConfig& config = {});

/// Unrestricted Damerau-Levenshtein distance (adjacent transpositions may
/// be edited further), unit costs.
template <class T>
std::size_t damerau_levenshtein(std::span<const T> a, std::span<const T> b);

std::size_t damerau_levenshtein(const std::string& a, const std::string& b);

/// Corpus BLEU-4 in [0, 100] with brevity penalty and no smoothing.
double bleu(std::span<const std::vector<std::string>> candidates,
            std::span<const std::vector<std::string>> references);

struct MetricsReport {
  double rg_p = 0.0;
  double rg_count = 0.0;
  double cs_p = 0.0;
  double cs_r = 0.0;
  double cs_f1 = 0.0;
  double co_dld = 0.0;
  double bleu = 0.0;
};

/// Scores generated[i] against games[i].summary over the whole list. RG-P
/// pools facts across summaries; CS and CO average per summary.
MetricsReport evaluate(std::span<const std::vector<std::string>> generated,
                       std::span<const TableSet> games, const ExtractorConfig& config = {});

/// Keys RG-P%, RG-#, CS-P%, CS-R%, CS-F1%, CO-DLD%, BLEU.
std::string report_to_json(const MetricsReport& report);

}  // namespace t2t

#include "t2t/detail/dld.hpp"
