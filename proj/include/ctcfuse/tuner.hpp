#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ctcfuse/ctc_decoder.hpp"
#include "ctcfuse/textnorm.hpp"

namespace ctcfuse {

struct GridSpec {
  std::vector<double> alpha_values;
  std::vector<double> beta_values;

  // {0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 1, 1.5, 2, 3} on both axes.
  static GridSpec standard();
  // Both axes non-empty and strictly increasing.
  void validate() const;
};

// Comma-separated decimals, e.g. "0.1,0.5,1".
std::vector<double> parse_grid_values(std::string_view csv);

struct GridCell {
  double alpha = 0.0;
  double beta = 0.0;
  double wer_percent = 0.0;
  bool operator==(const GridCell &) const = default;
};

struct GridSearchResult {
  std::vector<GridCell> table;  // sorted by (alpha, beta)
  double best_alpha = 0.0;
  double best_beta = 0.0;
  double best_wer = 0.0;
};

struct ValidationUtterance {
  std::string id;
  EmissionMatrix emissions;
  std::string reference;
};

// Decodes every utterance at every (alpha, beta) and keeps the pooled-WER
// minimizer; ties go to the smaller alpha, then the smaller beta. Emissions
// are held in memory once and shared by all cells.
GridSearchResult grid_search(const std::vector<ValidationUtterance> &validation, const Vocabulary &vocab,
                             const ArpaModel &lm, const GridSpec &grid, const DecoderParams &base_params,
                             const NormalizationConfig &config = {}, unsigned jobs = 1);

// TSV `alpha beta wer best`; the minimizer's row carries `*`. Values are
// printed in shortest round-trip form.
std::string emit_grid_report(const GridSearchResult &result);
GridSearchResult parse_grid_report(std::string_view tsv);

}  // namespace ctcfuse
