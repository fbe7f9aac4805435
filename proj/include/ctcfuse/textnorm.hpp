#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctcfuse {

enum class Language { Bokmaal, Nynorsk };
enum class Split { Train, Validation, Test };

std::string_view to_string(Language lang);  // "nb" / "nn"
std::string_view to_string(Split split);     // "train" / "validation" / "test"
std::optional<Language> parse_language(std::string_view s);
std::optional<Split> parse_split(std::string_view s);

// One utterance. `text` holds the raw transcript until normalize_corpus
// replaces it with the normalized form.
struct TranscriptRecord {
  std::string id;
  std::string audio_path;
  double duration_seconds = 0.0;
  std::string text;
  Language language = Language::Bokmaal;
  std::optional<std::string> region;
  std::optional<Split> split;
  // Manifest fields this toolkit does not interpret, kept as serialized JSON.
  std::string extra_json;
};

enum class HesitationStrategy { TripleLetter, SingleLetter, SharedSymbol };

// Config-file spellings: "triple", "single", "shared".
std::string_view to_string(HesitationStrategy s);
std::optional<HesitationStrategy> parse_hesitation_strategy(std::string_view s);

struct NormalizationConfig {
  // UTF-8, one code point per allowed character.
  std::u32string alphabet = U"abcdefghijklmnopqrstuvwxyzæøå ";
  HesitationStrategy hesitation_strategy = HesitationStrategy::TripleLetter;
  char32_t shared_symbol = U'ĥ';  // ĥ
  double min_duration_seconds = 0.5;
  bool drop_digits = true;
  bool drop_spelled_words = true;
  // Marker (matched after lowercasing) -> replacement text.
  std::map<std::string, std::string> dictation_replacements = default_dictation_replacements();

  static std::map<std::string, std::string> default_dictation_replacements();

  // Throws InvalidInput when the invariants do not hold.
  void validate() const;
};

// Reads the flat `key = value` config format. Unknown keys are errors.
//
//   alphabet = abcdefghijklmnopqrstuvwxyzæøå     (space is always added)
//   hesitation = triple | single | shared
//   shared_symbol = ĥ
//   min_duration_seconds = 0.5
//   drop_digits = true
//   drop_spelled_words = true
//   dictation.<komma> =                          (marker -> replacement)
//   dictation_defaults = false                   (clear built-in markers)
NormalizationConfig parse_normalization_config(std::string_view text);
NormalizationConfig load_normalization_config(const std::string &path);

std::string normalize_transcript(std::string_view raw, const NormalizationConfig &config);

enum class DropReason { TooShort, ContainsDigits, SpelledWord, EmptyAfterNormalization };
std::string_view to_string(DropReason r);

struct FilterDecision {
  std::optional<DropReason> reason;  // present iff the record is dropped
  bool keep() const { return !reason.has_value(); }
};

FilterDecision filter_record(const TranscriptRecord &record, const NormalizationConfig &config);

struct NormalizedCorpus {
  std::vector<TranscriptRecord> kept;
  std::vector<std::pair<std::string, DropReason>> dropped;
};

// `jobs` caps worker threads; output order always follows input order.
NormalizedCorpus normalize_corpus(const std::vector<TranscriptRecord> &records,
                                  const NormalizationConfig &config, unsigned jobs = 1);

// UTF-8 helpers shared by the metrics and decoder code.
std::u32string utf8_to_u32(std::string_view s);
std::string u32_to_utf8(std::u32string_view s);

// Splits on runs of ASCII/Unicode whitespace.
std::vector<std::string> split_words(std::string_view text);

}  // namespace ctcfuse
