#include "ctcfuse/tuner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "ctcfuse/error.hpp"
#include "ctcfuse/metrics.hpp"
#include "ctcfuse/parallel.hpp"

namespace ctcfuse {

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, const std::string &what) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw InvalidInput(what + ": not a number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = s.find(sep, start);
    out.push_back(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

void check_increasing(const std::vector<double> &values, const char *name) {
  if (values.empty()) throw InvalidInput(std::string(name) + " grid is empty");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1])) throw InvalidInput(std::string(name) + " grid must be strictly increasing");
}

}  // namespace

GridSpec GridSpec::standard() {
  const std::vector<double> values{0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 1, 1.5, 2, 3};
  return {values, values};
}

void GridSpec::validate() const {
  check_increasing(alpha_values, "alpha");
  check_increasing(beta_values, "beta");
  if (alpha_values.front() < 0) throw InvalidInput("alpha values must be non-negative");
}

std::vector<double> parse_grid_values(std::string_view csv) {
  std::vector<double> values;
  for (auto field : split(csv, ',')) values.push_back(parse_double(field, "grid value"));
  return values;
}

GridSearchResult grid_search(const std::vector<ValidationUtterance> &validation, const Vocabulary &vocab,
                             const ArpaModel &lm, const GridSpec &grid, const DecoderParams &base_params,
                             const NormalizationConfig &config, unsigned jobs) {
  if (validation.empty()) throw InvalidInput("grid search needs a non-empty validation set");
  grid.validate();

  std::vector<std::string> references;
  references.reserve(validation.size());
  for (const auto &u : validation) references.push_back(normalize_transcript(u.reference, config));

  struct Point {
    double alpha, beta;
  };
  std::vector<Point> points;
  for (double a : grid.alpha_values)
    for (double b : grid.beta_values) points.push_back({a, b});

  // One task per (cell, utterance); each writes its own slot.
  const std::size_t n = validation.size();
  std::vector<std::string> hypotheses(points.size() * n);
  parallel_for(hypotheses.size(), jobs, [&](std::size_t task) {
    const Point &p = points[task / n];
    const ValidationUtterance &u = validation[task % n];
    DecoderParams params = base_params;
    params.alpha = p.alpha;
    params.beta = p.beta;
    try {
      const auto ranked = beam_search_decode(u.emissions, vocab, &lm, params);
      hypotheses[task] = normalize_transcript(ranked.empty() ? std::string() : ranked.front().text, config);
    } catch (const Error &e) {
      throw Error("grid point alpha=" + shortest(p.alpha) + " beta=" + shortest(p.beta) + ", utterance '" + u.id +
                  "': " + e.what());
    }
  });

  GridSearchResult result;
  for (std::size_t c = 0; c < points.size(); ++c) {
    EditCounts total;
    for (std::size_t i = 0; i < n; ++i) total += word_edits(references[i], hypotheses[c * n + i]);
    if (total.reference_length == 0)
      throw InvalidInput("grid point alpha=" + shortest(points[c].alpha) + " beta=" + shortest(points[c].beta) +
                         ": references contain no words");
    result.table.push_back({points[c].alpha, points[c].beta, error_rate_percent(total)});
  }
  std::sort(result.table.begin(), result.table.end(), [](const GridCell &a, const GridCell &b) {
    return a.alpha != b.alpha ? a.alpha < b.alpha : a.beta < b.beta;
  });
  // Table order is (alpha, beta), so the first strict minimum wins ties.
  const GridCell *best = &result.table.front();
  for (const auto &cell : result.table)
    if (cell.wer_percent < best->wer_percent) best = &cell;
  result.best_alpha = best->alpha;
  result.best_beta = best->beta;
  result.best_wer = best->wer_percent;
  return result;
}

std::string emit_grid_report(const GridSearchResult &result) {
  std::vector<GridCell> table = result.table;
  std::sort(table.begin(), table.end(), [](const GridCell &a, const GridCell &b) {
    return a.alpha != b.alpha ? a.alpha < b.alpha : a.beta < b.beta;
  });
  std::ostringstream out;
  out << "alpha\tbeta\twer\tbest\n";
  bool marked = false;
  for (const auto &cell : table) {
    const bool best = !marked && cell.alpha == result.best_alpha && cell.beta == result.best_beta;
    marked = marked || best;
    out << shortest(cell.alpha) << '\t' << shortest(cell.beta) << '\t' << shortest(cell.wer_percent) << '\t'
        << (best ? "*" : "") << '\n';
  }
  return out.str();
}

GridSearchResult parse_grid_report(std::string_view tsv) {
  GridSearchResult result;
  bool header = true;
  bool have_best = false;
  std::size_t line_no = 0;
  for (auto line : split(tsv, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    if (header) {
      if (line != "alpha\tbeta\twer\tbest") throw ParseError(line_no, "unexpected grid report header");
      header = false;
      continue;
    }
    const auto fields = split(line, '\t');
    if (fields.size() != 4) throw ParseError(line_no, "expected 4 tab-separated fields");
    GridCell cell;
    try {
      cell = {parse_double(fields[0], "alpha"), parse_double(fields[1], "beta"), parse_double(fields[2], "wer")};
    } catch (const InvalidInput &e) {
      throw ParseError(line_no, e.what());
    }
    if (fields[3] == "*") {
      result.best_alpha = cell.alpha;
      result.best_beta = cell.beta;
      result.best_wer = cell.wer_percent;
      have_best = true;
    } else if (!fields[3].empty()) {
      throw ParseError(line_no, "best column must be '*' or empty");
    }
    result.table.push_back(cell);
  }
  if (header) throw ParseError(line_no, "empty grid report");
  if (!have_best) throw FormatError("grid report has no row marked best");
  return result;
}

}  // namespace ctcfuse
