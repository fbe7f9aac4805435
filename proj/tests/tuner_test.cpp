#include <gtest/gtest.h>

#include <algorithm>

#include "ctcfuse/error.hpp"
#include "ctcfuse/metrics.hpp"
#include "ctcfuse/tuner.hpp"
#include "testing.hpp"

using namespace ctcfuse;

namespace {

struct Fixture {
  std::vector<ValidationUtterance> validation;
  ArpaModel lm{1};
};

Fixture confusable(std::size_t n) {
  const auto set = ctcfuse::testing::confusable_set(n, 12345);
  Fixture f;
  for (std::size_t i = 0; i < n; ++i)
    f.validation.push_back({"v" + std::to_string(i), set.emissions[i], set.references[i]});
  f.lm = estimate_kneser_ney(count_ngrams(set.lm_corpus, 3), DiscountSpec::estimated());
  return f;
}

double decode_wer(const Fixture &f, double alpha, double beta) {
  DecoderParams p;
  p.alpha = alpha;
  p.beta = beta;
  std::vector<TextPair> pairs;
  for (const auto &u : f.validation)
    pairs.emplace_back(u.reference, beam_search_decode(u.emissions, Vocabulary::norwegian(), &f.lm, p).front().text);
  return wer(pairs);
}

}  // namespace

TEST(GridSpec, StandardAndParsing) {
  const auto g = GridSpec::standard();
  EXPECT_EQ(g.alpha_values, (std::vector<double>{0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 1, 1.5, 2, 3}));
  EXPECT_EQ(g.beta_values, g.alpha_values);
  EXPECT_NO_THROW(g.validate());
  EXPECT_EQ(parse_grid_values("0.1,0.5, 1"), (std::vector<double>{0.1, 0.5, 1.0}));
  EXPECT_THROW(parse_grid_values("0.1,,1"), InvalidInput);
  EXPECT_THROW(parse_grid_values("x"), InvalidInput);
  EXPECT_THROW((GridSpec{{0.5, 0.1}, {0.1}}.validate()), InvalidInput);
  EXPECT_THROW((GridSpec{{}, {0.1}}.validate()), InvalidInput);
}

TEST(GridSearch, SingleCell) {
  const Fixture f = confusable(4);
  const auto r = grid_search(f.validation, Vocabulary::norwegian(), f.lm, {{0.5}, {0.001}}, {});
  ASSERT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.best_alpha, 0.5);
  EXPECT_EQ(r.best_beta, 0.001);
  EXPECT_EQ(r.best_wer, r.table[0].wer_percent);
  const std::string report = emit_grid_report(r);
  EXPECT_EQ(report.rfind("alpha\tbeta\twer\tbest\n0.5\t0.001\t", 0), 0u) << report;
  EXPECT_EQ(report.substr(report.size() - 3), "\t*\n");
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 2);
  EXPECT_THROW(grid_search({}, Vocabulary::norwegian(), f.lm, {{0.5}, {0.001}}, {}), InvalidInput);
}

TEST(GridSearch, LanguageModelLowersWerOnConfusableSet) {
  const Fixture f = confusable(20);
  const auto grid = GridSpec::standard();
  const auto r = grid_search(f.validation, Vocabulary::norwegian(), f.lm, grid, {}, {}, 4);
  ASSERT_EQ(r.table.size(), 100u);
  EXPECT_TRUE(std::is_sorted(r.table.begin(), r.table.end(), [](const GridCell &a, const GridCell &b) {
    return a.alpha != b.alpha ? a.alpha < b.alpha : a.beta < b.beta;
  }));
  double smallest_alpha_best = 1e300;
  for (const auto &c : r.table) {
    EXPECT_GE(c.wer_percent, r.best_wer);
    if (c.alpha == grid.alpha_values.front()) smallest_alpha_best = std::min(smallest_alpha_best, c.wer_percent);
  }
  EXPECT_LT(r.best_wer, smallest_alpha_best);
  // The table is the exhaustive evaluation: re-decode a few cells directly.
  for (std::size_t i : {0, 17, 44, 99}) EXPECT_DOUBLE_EQ(decode_wer(f, r.table[i].alpha, r.table[i].beta), r.table[i].wer_percent);
  EXPECT_DOUBLE_EQ(decode_wer(f, r.best_alpha, r.best_beta), r.best_wer);

  // Reproducible across runs and worker counts.
  const auto again = grid_search(f.validation, Vocabulary::norwegian(), f.lm, grid, {}, {}, 1);
  EXPECT_EQ(again.table, r.table);
  EXPECT_EQ(again.best_alpha, r.best_alpha);
  EXPECT_EQ(again.best_beta, r.best_beta);
}

TEST(GridSearch, TiesPreferSmallerAlphaThenBeta) {
  // Sharp emissions spell the reference, so every cell scores 0%.
  const auto vocab = Vocabulary::norwegian();
  std::vector<ValidationUtterance> v = {{"a", ctcfuse::testing::spell_emissions("god dag", vocab, {}, 0.99), "god dag"}};
  const ArpaModel lm = estimate_kneser_ney(count_ngrams({{"god", "dag"}}, 2), DiscountSpec::fixed_value(0.5));
  const auto r = grid_search(v, vocab, lm, {{0.25, 0.5, 1}, {0.01, 0.1}}, {});
  EXPECT_EQ(r.best_wer, 0.0);
  EXPECT_EQ(r.best_alpha, 0.25);
  EXPECT_EQ(r.best_beta, 0.01);
}

TEST(GridSearch, ErrorsNameTheGridPoint) {
  const auto vocab = Vocabulary::norwegian();
  std::vector<ValidationUtterance> v = {{"bad", EmissionMatrix(3, 5), "x"}};
  const ArpaModel lm = ctcfuse::testing::toy_letter_lm();
  try {
    grid_search(v, vocab, lm, {{0.5}, {0.001}}, {});
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("alpha=0.5 beta=0.001"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("'bad'"), std::string::npos) << e.what();
  }
}

TEST(GridReport, HundredRowsAndRoundTrip) {
  GridSearchResult r;
  const auto g = GridSpec::standard();
  double w = 12.5;
  for (double a : g.alpha_values)
    for (double b : g.beta_values) r.table.push_back({a, b, (w += 1.0 / 3.0)});
  r.table[37].wer_percent = 1.0 / 7.0;
  r.best_alpha = r.table[37].alpha;
  r.best_beta = r.table[37].beta;
  r.best_wer = r.table[37].wer_percent;

  const std::string report = emit_grid_report(r);
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 101);
  EXPECT_EQ(std::count(report.begin(), report.end(), '*'), 1);
  const auto back = parse_grid_report(report);
  EXPECT_EQ(back.table, r.table);
  EXPECT_EQ(back.best_alpha, r.best_alpha);
  EXPECT_EQ(back.best_beta, r.best_beta);
  EXPECT_EQ(back.best_wer, r.best_wer);
  EXPECT_EQ(emit_grid_report(back), report);

  EXPECT_THROW(parse_grid_report("alpha\tbeta\twer\tbest\n0.5\t0.1\t3\t\n"), FormatError);
  EXPECT_THROW(parse_grid_report("a\tb\n"), ParseError);
  EXPECT_THROW(parse_grid_report("alpha\tbeta\twer\tbest\n0.5\tx\t3\t*\n"), ParseError);
}
