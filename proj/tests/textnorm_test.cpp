#include <gtest/gtest.h>

#include <random>

#include "ctcfuse/error.hpp"
#include "ctcfuse/textnorm.hpp"

using namespace ctcfuse;

namespace {

NormalizationConfig with_strategy(HesitationStrategy s) {
  NormalizationConfig c;
  c.hesitation_strategy = s;
  return c;
}

TranscriptRecord record(std::string text, double duration, std::string id = "r") {
  TranscriptRecord r;
  r.id = std::move(id);
  r.text = std::move(text);
  r.duration_seconds = duration;
  return r;
}

}  // namespace

TEST(NormalizeTranscript, Golden) {
  const NormalizationConfig d;
  EXPECT_EQ(normalize_transcript("<ee>", d), "eee");
  EXPECT_EQ(normalize_transcript("Stortinget, ja.", d), "stortinget ja");
  EXPECT_EQ(normalize_transcript("blåbær på Å", d), "blåbær på å");
  EXPECT_EQ(normalize_transcript("café", d), "cafe");
  EXPECT_EQ(normalize_transcript("<ee>", with_strategy(HesitationStrategy::SharedSymbol)), "ĥ");
  EXPECT_EQ(normalize_transcript("<ee>", with_strategy(HesitationStrategy::SingleLetter)), "e");
  EXPECT_EQ(normalize_transcript("<mm> ja <qq>", d), "mmm ja qqq");
}

TEST(NormalizeTranscript, AccentsAndScripts) {
  const NormalizationConfig d;
  EXPECT_EQ(normalize_transcript("Über à la crème", d), "uber a la creme");
  EXPECT_EQ(normalize_transcript("ÆØÅ", d), "æøå");
  // Decomposed å (a + combining ring) composes first and survives.
  EXPECT_EQ(normalize_transcript("å", d), "å");
  EXPECT_EQ(normalize_transcript("Ĥ", d), "h");
  EXPECT_EQ(normalize_transcript("日本 ok", d), "ok");
  EXPECT_EQ(normalize_transcript("ﬁne", d), "fine");  // compatibility ligature
}

TEST(NormalizeTranscript, Whitespace) {
  const NormalizationConfig d;
  EXPECT_EQ(normalize_transcript("  god \t\n dag  ", d), "god dag");
  EXPECT_EQ(normalize_transcript("ja-nei", d), "janei");
  EXPECT_EQ(normalize_transcript("", d), "");
  EXPECT_EQ(normalize_transcript("?!.", d), "");
}

TEST(NormalizeTranscript, HesitationBeforeFiltering) {
  // Tag stripping must not eat the hesitation letters.
  EXPECT_EQ(normalize_transcript("hei<ee>du", NormalizationConfig{}), "hei eee du");
  EXPECT_EQ(normalize_transcript("<EE>", NormalizationConfig{}), "eee");
}

TEST(NormalizeTranscript, DictationMarkers) {
  const NormalizationConfig d;
  EXPECT_EQ(normalize_transcript("ja <komma> nei <punktum>", d), "ja nei");
  EXPECT_EQ(normalize_transcript("hva <spørsmålstegn>", d), "hva");
  EXPECT_EQ(normalize_transcript("<KOMMA>ja", d), "ja");
  // Other annotations are removed rather than spelled out.
  EXPECT_EQ(normalize_transcript("ja <inaudible> nei", d), "ja nei");

  NormalizationConfig custom = d;
  custom.dictation_replacements["<komma>"] = "komma";
  EXPECT_EQ(normalize_transcript("ja<komma>nei", custom), "ja komma nei");
}

TEST(NormalizeTranscript, SharedSymbolOnlyWhenEnabled) {
  EXPECT_EQ(normalize_transcript("ĥ", NormalizationConfig{}), "h");
  EXPECT_EQ(normalize_transcript("ĥ <aa>", with_strategy(HesitationStrategy::SharedSymbol)), "ĥ ĥ");
}

TEST(NormalizeTranscript, IdempotentAndClosedOnRandomUnicode) {
  std::mt19937_64 rng(20240611);
  // Mix of ASCII, Latin-1/Extended, combining marks, Greek/Cyrillic, CJK,
  // whitespace and a few astral code points, plus tag fragments.
  const std::vector<std::pair<char32_t, char32_t>> ranges = {
      {0x20, 0x7E}, {0xA0, 0x24F}, {0x300, 0x36F}, {0x370, 0x4FF}, {0x1E00, 0x1EFF},
      {0x2000, 0x206F}, {0x3000, 0x303F}, {0x4E00, 0x4E80}, {0xFB00, 0xFB06}, {0x1F600, 0x1F64F}};
  const std::vector<std::u32string> fragments = {U"<", U">", U"<ee>", U"<komma>", U" ", U"\t", U"å", U"å"};
  const std::vector<HesitationStrategy> strategies = {HesitationStrategy::TripleLetter,
                                                      HesitationStrategy::SingleLetter,
                                                      HesitationStrategy::SharedSymbol};
  std::uniform_int_distribution<int> len(0, 24);
  std::uniform_int_distribution<std::size_t> pick_range(0, ranges.size() - 1), pick_frag(0, fragments.size() - 1);
  std::uniform_int_distribution<int> coin(0, 5);

  for (int n = 0; n < 10000; ++n) {
    const auto config = with_strategy(strategies[n % 3]);
    std::u32string raw;
    for (int i = len(rng); i > 0; --i) {
      if (coin(rng) == 0) {
        raw += fragments[pick_frag(rng)];
      } else {
        const auto [lo, hi] = ranges[pick_range(rng)];
        raw.push_back(std::uniform_int_distribution<char32_t>(lo, hi)(rng));
      }
    }
    const std::string once = normalize_transcript(u32_to_utf8(raw), config);
    ASSERT_EQ(normalize_transcript(once, config), once) << "input: " << u32_to_utf8(raw);

    std::u32string allowed = config.alphabet;
    if (config.hesitation_strategy == HesitationStrategy::SharedSymbol) allowed.push_back(config.shared_symbol);
    const std::u32string out = utf8_to_u32(once);
    for (char32_t c : out) ASSERT_NE(allowed.find(c), std::u32string::npos) << "input: " << u32_to_utf8(raw);
    ASSERT_EQ(out.find(U"  "), std::u32string::npos);
    if (!out.empty()) {
      ASSERT_NE(out.front(), U' ');
      ASSERT_NE(out.back(), U' ');
    }
  }
}

TEST(FilterRecord, Rules) {
  const NormalizationConfig d;
  EXPECT_EQ(filter_record(record("god dag", 0.4), d).reason, DropReason::TooShort);
  EXPECT_EQ(filter_record(record("han er 42 år", 2.0), d).reason, DropReason::ContainsDigits);
  EXPECT_TRUE(filter_record(record("god dag", 2.0), d).keep());
  EXPECT_TRUE(filter_record(record("god dag", 0.5), d).keep());
  EXPECT_EQ(filter_record(record("n. o. r.", 2.0), d).reason, DropReason::SpelledWord);
  EXPECT_EQ(filter_record(record("det er <spelled> nrk", 2.0), d).reason, DropReason::SpelledWord);
  EXPECT_EQ(filter_record(record("<komma> ...", 2.0), d).reason, DropReason::EmptyAfterNormalization);
}

TEST(FilterRecord, FirstMatchWins) {
  const NormalizationConfig d;
  EXPECT_EQ(filter_record(record("42 a.", 0.1), d).reason, DropReason::TooShort);
  EXPECT_EQ(filter_record(record("42 a.", 1.0), d).reason, DropReason::ContainsDigits);
  EXPECT_EQ(filter_record(record("a. !", 1.0), d).reason, DropReason::SpelledWord);
}

TEST(FilterRecord, RulesCanBeDisabled) {
  NormalizationConfig c;
  c.drop_digits = false;
  c.drop_spelled_words = false;
  EXPECT_TRUE(filter_record(record("han er 42 år", 2.0), c).keep());
  EXPECT_TRUE(filter_record(record("n. r. k.", 2.0), c).keep());
}

TEST(NormalizeCorpus, OrderAndConservation) {
  EXPECT_TRUE(normalize_corpus({}, NormalizationConfig{}).kept.empty());

  std::vector<TranscriptRecord> input;
  for (int i = 0; i < 200; ++i) {
    const std::string id = "u" + std::to_string(i);
    if (i % 7 == 0) input.push_back(record("ligger " + std::to_string(i), 2.0, id));
    else if (i % 11 == 0) input.push_back(record("kort", 0.2, id));
    else input.push_back(record("<ee> Hei nummer " + std::string(i % 3 + 1, 'x'), 2.0, id));
  }
  const auto serial = normalize_corpus(input, NormalizationConfig{}, 1);
  const auto parallel = normalize_corpus(input, NormalizationConfig{}, 8);
  EXPECT_EQ(serial.kept.size() + serial.dropped.size(), input.size());
  ASSERT_EQ(serial.kept.size(), parallel.kept.size());
  for (std::size_t i = 0; i < serial.kept.size(); ++i) {
    EXPECT_EQ(serial.kept[i].id, parallel.kept[i].id);
    EXPECT_EQ(serial.kept[i].text, parallel.kept[i].text);
  }
  EXPECT_EQ(serial.dropped, parallel.dropped);
  EXPECT_EQ(serial.kept.front().id, "u1");
  EXPECT_EQ(serial.kept.front().text, "eee hei nummer xx");
  EXPECT_EQ(serial.dropped.front(), std::make_pair(std::string("u0"), DropReason::ContainsDigits));
  for (std::size_t i = 1; i < serial.kept.size(); ++i)
    EXPECT_LT(std::stoi(serial.kept[i - 1].id.substr(1)), std::stoi(serial.kept[i].id.substr(1)));
}

TEST(NormalizeCorpus, DocumentedExamples) {
  auto r = normalize_corpus({record("<ee> hei", 1.0, "a"), record("42", 1.0, "b")}, NormalizationConfig{});
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].text, "eee hei");
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].second, DropReason::ContainsDigits);
}

TEST(NormalizationConfig, ParseAndValidate) {
  auto c = parse_normalization_config(
      "# comment\nhesitation = shared\nmin_duration_seconds = 1.5\n"
      "drop_digits = false\ndictation_defaults = false\ndictation.<ny> = ny\n");
  EXPECT_EQ(c.hesitation_strategy, HesitationStrategy::SharedSymbol);
  EXPECT_DOUBLE_EQ(c.min_duration_seconds, 1.5);
  EXPECT_FALSE(c.drop_digits);
  ASSERT_EQ(c.dictation_replacements.size(), 1u);
  EXPECT_EQ(c.dictation_replacements.at("<ny>"), "ny");

  EXPECT_THROW(parse_normalization_config("bogus = 1"), ParseError);
  EXPECT_THROW(parse_normalization_config("hesitation = double"), ParseError);
  EXPECT_THROW(parse_normalization_config("just text"), ParseError);
  try {
    parse_normalization_config("alphabet = abc\n\nhesitation = x\n");
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 3u);
  }

  NormalizationConfig bad;
  bad.alphabet = U"abc";
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad.alphabet = U"abcĥ ";
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad.hesitation_strategy = HesitationStrategy::SharedSymbol;
  EXPECT_NO_THROW(bad.validate());
}
