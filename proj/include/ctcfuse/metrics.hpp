#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctcfuse/textnorm.hpp"

namespace ctcfuse {

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  EditCounts &operator+=(const EditCounts &o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    reference_length += o.reference_length;
    return *this;
  }
  bool operator==(const EditCounts &) const = default;
};

// Unit-cost Levenshtein alignment. Among alignments with the fewest edits the
// one with the fewest deletions (equivalently the most substitutions) is
// reported, so S/D/I are uniquely determined.
EditCounts edit_distance(const std::vector<std::string> &reference, const std::vector<std::string> &hypothesis);
EditCounts edit_distance(std::u32string_view reference, std::u32string_view hypothesis);

// Whitespace-separated words / code points of the single-spaced text.
EditCounts word_edits(std::string_view reference, std::string_view hypothesis);
EditCounts char_edits(std::string_view reference, std::string_view hypothesis);

using TextPair = std::pair<std::string, std::string>;  // (reference, hypothesis)

// Pooled rates in percent: 100 * sum(S + D + I) / sum(reference length).
// Throw InvalidInput when the pooled reference length is zero.
double wer(const std::vector<TextPair> &pairs);
double cer(const std::vector<TextPair> &pairs);

// NaN when reference_length is 0.
double error_rate_percent(const EditCounts &counts);

struct GroupScore {
  EditCounts words;
  EditCounts chars;
  double wer_percent() const { return error_rate_percent(words); }
  double cer_percent() const { return error_rate_percent(chars); }
  bool operator==(const GroupScore &) const = default;
};

struct EvalReport {
  std::string group_by;  // manifest field, empty for no grouping
  GroupScore overall;
  std::map<std::string, GroupScore> groups;
};

// Hypotheses are (id, text). References and hypotheses both go through
// normalize_transcript with `config`. `group_by` is "", "language", "region"
// or "split". Every reference needs exactly one hypothesis and vice versa.
EvalReport evaluate(const std::vector<TranscriptRecord> &references,
                    const std::vector<std::pair<std::string, std::string>> &hypotheses, std::string_view group_by,
                    const NormalizationConfig &config, unsigned jobs = 1);

// Header `group wer cer S D I ref_len`, one row per group then `all`.
// S/D/I/ref_len are word-level; rates use 2 decimals.
std::string render_report_tsv(const EvalReport &report);
std::string render_report_json(const EvalReport &report);

}  // namespace ctcfuse
