#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctcfuse/ngram_lm.hpp"

namespace ctcfuse {

inline constexpr std::string_view kBlankToken = "<blank>";
inline constexpr std::string_view kDelimiterToken = "|";

// CTC output inventory. The delimiter renders as a space in decoded text.
struct Vocabulary {
  std::vector<std::string> tokens;
  std::size_t blank_index = 0;
  std::size_t delimiter_index = 1;

  // blank, delimiter, a-z, æ, ø, å and optionally ĥ.
  static Vocabulary norwegian(bool with_shared_symbol = false);

  std::size_t size() const { return tokens.size(); }
  // Text a token contributes to the output ("" for blank, " " for the delimiter).
  std::string_view symbol(std::size_t index) const;
  void validate() const;
};

// One token per line in index order; `<blank>` and `|` mark the blank and delimiter.
Vocabulary parse_vocabulary(std::istream &in);
Vocabulary load_vocabulary(const std::string &path);
void write_vocabulary(const Vocabulary &vocab, std::ostream &out);

// T x V natural-log posteriors, row-major. Stored as float to match the
// on-disk emission format bit for bit.
struct EmissionMatrix {
  std::size_t frames = 0;
  std::size_t vocab_size = 0;
  std::vector<float> values;

  EmissionMatrix() = default;
  EmissionMatrix(std::size_t t, std::size_t v) : frames(t), vocab_size(v), values(t * v, 0.0f) {}

  float at(std::size_t t, std::size_t v) const { return values[t * vocab_size + v]; }
  float &at(std::size_t t, std::size_t v) { return values[t * vocab_size + v]; }
  std::span<const float> row(std::size_t t) const { return {values.data() + t * vocab_size, vocab_size}; }

  // Throws InvalidInput unless every row's logsumexp is 0 within `tolerance`.
  void check_normalized(double tolerance = 1e-4) const;
};

struct DecoderParams {
  double alpha = 0.5;
  double beta = 0.001;
  std::size_t beam_width = 100;
  // Tokens whose frame log-probability falls below this are not expanded.
  std::optional<double> prune_log_floor;
  bool score_eos = true;
};

struct Hypothesis {
  std::string text;
  double score = 0.0;           // acoustic + fusion
  double acoustic_score = 0.0;  // log of the summed path probability
};

double log_add(double a, double b);

// Removes adjacent repeats, then blanks; the delimiter maps to a space.
std::string ctc_collapse(std::span<const std::size_t> path, const Vocabulary &vocab);

// Per-frame argmax (lowest index on ties) followed by ctc_collapse, with
// whitespace normalized as in beam_search_decode.
std::string greedy_decode(const EmissionMatrix &emissions, const Vocabulary &vocab);

// Prefix beam search with optional word-level n-gram shallow fusion.
// Hypothesis text has whitespace runs collapsed and no leading/trailing
// spaces; prefixes that render to the same text are merged. Sorted by score
// descending, then text ascending.
std::vector<Hypothesis> beam_search_decode(const EmissionMatrix &emissions, const Vocabulary &vocab,
                                           const ArpaModel *lm, const DecoderParams &params);

// Exhaustive reference decoder over all V^T frame paths. Desk scale only:
// throws InvalidInput when V^T exceeds 10^6.
std::vector<Hypothesis> oracle_decode(const EmissionMatrix &emissions, const Vocabulary &vocab,
                                      const ArpaModel *lm, const DecoderParams &params);

// Fusion score of a finished word sequence: for each word alpha * ln P(w | h) + beta,
// then alpha * ln P(</s> | h) when score_eos. Zero without a model.
double fusion_score(const std::vector<std::string> &words, const ArpaModel *lm, const DecoderParams &params);

struct BatchResult {
  std::string id;
  std::optional<std::string> text;  // absent when the file failed
  std::string error;
};

// Decodes each file independently; failures are reported per file. Output
// order equals input order for any `jobs`. The id is the file name without
// its extension.
std::vector<BatchResult> batch_decode(const std::vector<std::string> &emission_files, const Vocabulary &vocab,
                                      const ArpaModel *lm, const DecoderParams &params, unsigned jobs);

}  // namespace ctcfuse
