#include "ctcfuse/textnorm.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "ctcfuse/error.hpp"
#include "ctcfuse/parallel.hpp"

namespace ctcfuse {

std::string_view to_string(Language lang) { return lang == Language::Bokmaal ? "nb" : "nn"; }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "test";
}

std::optional<Language> parse_language(std::string_view s) {
  if (s == "nb") return Language::Bokmaal;
  if (s == "nn") return Language::Nynorsk;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

std::string_view to_string(HesitationStrategy s) {
  switch (s) {
    case HesitationStrategy::TripleLetter: return "triple";
    case HesitationStrategy::SingleLetter: return "single";
    case HesitationStrategy::SharedSymbol: return "shared";
  }
  return "triple";
}

std::optional<HesitationStrategy> parse_hesitation_strategy(std::string_view s) {
  if (s == "triple") return HesitationStrategy::TripleLetter;
  if (s == "single") return HesitationStrategy::SingleLetter;
  if (s == "shared") return HesitationStrategy::SharedSymbol;
  return std::nullopt;
}

std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::TooShort: return "TooShort";
    case DropReason::ContainsDigits: return "ContainsDigits";
    case DropReason::SpelledWord: return "SpelledWord";
    case DropReason::EmptyAfterNormalization: return "EmptyAfterNormalization";
  }
  return "";
}

// ---------------------------------------------------------------------------
// UTF-8 <-> UTF-32

std::u32string utf8_to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6 && i + 1 < s.size()) {
      cp = ((c & 0x1F) << 6) | (s[i + 1] & 0x3F);
      len = 2;
    } else if ((c >> 4) == 0xE && i + 2 < s.size()) {
      cp = ((c & 0x0F) << 12) | ((s[i + 1] & 0x3F) << 6) | (s[i + 2] & 0x3F);
      len = 3;
    } else if ((c >> 3) == 0x1E && i + 3 < s.size()) {
      cp = ((c & 0x07) << 18) | ((s[i + 1] & 0x3F) << 12) | ((s[i + 2] & 0x3F) << 6) |
           (s[i + 3] & 0x3F);
      len = 4;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string u32_to_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

namespace {

std::u32string from_unicode_string(const icu::UnicodeString &u) {
  std::u32string out;
  out.reserve(u.length());
  for (int32_t i = 0; i < u.length();) {
    const UChar32 cp = u.char32At(i);
    out.push_back(static_cast<char32_t>(cp));
    i += U16_LENGTH(cp);
  }
  return out;
}

const icu::Normalizer2 &nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2 *n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
  return *n;
}

const icu::Normalizer2 &nfkd() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2 *n = icu::Normalizer2::getNFKDInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFKD normalizer unavailable");
  return *n;
}

// NFC then full Unicode lowercasing.
std::u32string canonical_lower(std::string_view raw) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString composed = nfc().normalize(u, status);
  if (U_FAILURE(status)) composed = u;
  composed.toLower(icu::Locale::getRoot());
  return from_unicode_string(composed);
}

bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)); }
bool is_letter(char32_t c) { return u_isalpha(static_cast<UChar32>(c)); }

std::u32string lower_key(std::string_view key) { return canonical_lower(key); }

// Replaces dictation markers (longest match wins) with " replacement ".
std::u32string apply_dictation(const std::u32string &text,
                               const std::vector<std::pair<std::u32string, std::u32string>> &table) {
  if (table.empty()) return text;
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const std::pair<std::u32string, std::u32string> *best = nullptr;
    for (const auto &entry : table) {
      const auto &key = entry.first;
      if (key.empty() || key.size() > text.size() - i) continue;
      if (text.compare(i, key.size(), key) == 0 && (!best || key.size() > best->first.size())) best = &entry;
    }
    if (best) {
      out.push_back(U' ');
      out += best->second;
      out.push_back(U' ');
      i += best->first.size();
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

// `<x>`, `<xx>`, ... with a single repeated letter are hesitations; any other
// `<tag>` without whitespace inside is an annotation and is removed.
std::u32string apply_hesitations(const std::u32string &text, const NormalizationConfig &config) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != U'<') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t close = i + 1;
    while (close < text.size() && text[close] != U'>' && text[close] != U'<' && !is_space(text[close])) ++close;
    if (close >= text.size() || text[close] != U'>') {
      out.push_back(text[i++]);
      continue;
    }
    const std::u32string_view inner(text.data() + i + 1, close - i - 1);
    const bool hesitation = !inner.empty() && is_letter(inner.front()) &&
                            std::all_of(inner.begin(), inner.end(), [&](char32_t c) { return c == inner.front(); });
    out.push_back(U' ');
    if (hesitation) {
      switch (config.hesitation_strategy) {
        case HesitationStrategy::TripleLetter: out.append(3, inner.front()); break;
        case HesitationStrategy::SingleLetter: out.push_back(inner.front()); break;
        case HesitationStrategy::SharedSymbol: out.push_back(config.shared_symbol); break;
      }
    }
    out.push_back(U' ');
    i = close + 1;
  }
  return out;
}

struct Normalizer {
  const NormalizationConfig &config;
  std::u32string allowed;
  std::vector<std::pair<std::u32string, std::u32string>> dictation;

  explicit Normalizer(const NormalizationConfig &c) : config(c), allowed(c.alphabet) {
    if (c.hesitation_strategy == HesitationStrategy::SharedSymbol) allowed.push_back(c.shared_symbol);
    std::sort(allowed.begin(), allowed.end());
    for (const auto &[marker, replacement] : c.dictation_replacements)
      dictation.emplace_back(lower_key(marker), canonical_lower(replacement));
  }

  bool is_allowed(char32_t c) const { return std::binary_search(allowed.begin(), allowed.end(), c); }

  std::string operator()(std::string_view raw) const {
    std::u32string text = canonical_lower(raw);
    text = apply_dictation(text, dictation);
    text = apply_hesitations(text, config);

    std::u32string filtered;
    filtered.reserve(text.size());
    auto emit = [&](char32_t c) {
      if (is_space(c) || c == U' ') {
        if (!filtered.empty() && filtered.back() != U' ') filtered.push_back(U' ');
      } else if (is_allowed(c)) {
        filtered.push_back(c);
      }
    };
    for (char32_t c : text) {
      if (is_allowed(c) || is_space(c)) {
        emit(c);
        continue;
      }
      // Strip accents: decompose and keep only base characters.
      UErrorCode status = U_ZERO_ERROR;
      icu::UnicodeString decomposed = nfkd().normalize(icu::UnicodeString(static_cast<UChar32>(c)), status);
      if (U_FAILURE(status)) continue;
      for (char32_t d : from_unicode_string(decomposed)) {
        if (u_getCombiningClass(static_cast<UChar32>(d)) != 0 || u_charType(static_cast<UChar32>(d)) == U_NON_SPACING_MARK)
          continue;
        // NFKD output may itself be uppercase (e.g. compatibility letters).
        emit(static_cast<char32_t>(u_tolower(static_cast<UChar32>(d))));
      }
    }
    while (!filtered.empty() && filtered.back() == U' ') filtered.pop_back();
    return u32_to_utf8(filtered);
  }
};

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool has_spelled_word(std::string_view raw) {
  const std::u32string lowered = canonical_lower(raw);
  if (lowered.find(U"<spelled>") != std::u32string::npos) return true;
  std::size_t i = 0;
  while (i < lowered.size()) {
    while (i < lowered.size() && is_space(lowered[i])) ++i;
    std::size_t j = i;
    while (j < lowered.size() && !is_space(lowered[j])) ++j;
    if (j - i == 2 && is_letter(lowered[i]) && lowered[i + 1] == U'.') return true;
    i = j;
  }
  return false;
}

struct Outcome {
  FilterDecision decision;
  std::string normalized;
};

Outcome classify(const TranscriptRecord &record, const Normalizer &normalizer) {
  const auto &config = normalizer.config;
  if (record.duration_seconds < config.min_duration_seconds) return {{DropReason::TooShort}, {}};
  if (config.drop_digits && has_digit(record.text)) return {{DropReason::ContainsDigits}, {}};
  if (config.drop_spelled_words && has_spelled_word(record.text)) return {{DropReason::SpelledWord}, {}};
  std::string normalized = normalizer(record.text);
  if (normalized.empty()) return {{DropReason::EmptyAfterNormalization}, {}};
  return {{}, std::move(normalized)};
}

bool parse_bool(std::string_view v, std::size_t line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError(line, "expected a boolean, got '" + std::string(v) + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::map<std::string, std::string> NormalizationConfig::default_dictation_replacements() {
  return {
      {"<komma>", ""},     {"<punktum>", ""},   {"<utropstegn>", ""}, {"<spørsmålstegn>", ""},
      {"<kolon>", ""},     {"<semikolon>", ""}, {"<tankestrek>", ""}, {"<anførselstegn>", ""},
      {"<ny_linje>", ""},  {"<nytt_avsnitt>", ""}, {"<stille>", ""},  {"<pause>", ""},
  };
}

void NormalizationConfig::validate() const {
  if (alphabet.empty()) throw InvalidInput("alphabet must not be empty");
  if (alphabet.find(U' ') == std::u32string::npos) throw InvalidInput("alphabet must contain the space character");
  if (hesitation_strategy != HesitationStrategy::SharedSymbol && alphabet.find(shared_symbol) != std::u32string::npos)
    throw InvalidInput("shared_symbol must not be part of the alphabet");
  if (min_duration_seconds < 0) throw InvalidInput("min_duration_seconds must be non-negative");
}

NormalizationConfig parse_normalization_config(std::string_view text) {
  NormalizationConfig config;
  std::map<std::string, std::string> extra_dictation;
  bool keep_default_dictation = true;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') {
      if (eol == text.size()) break;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key == "alphabet") {
      config.alphabet = utf8_to_u32(value);
      if (config.alphabet.find(U' ') == std::u32string::npos) config.alphabet.push_back(U' ');
    } else if (key == "hesitation") {
      auto s = parse_hesitation_strategy(value);
      if (!s) throw ParseError(line_no, "hesitation must be triple, single or shared");
      config.hesitation_strategy = *s;
    } else if (key == "shared_symbol") {
      const auto cps = utf8_to_u32(value);
      if (cps.size() != 1) throw ParseError(line_no, "shared_symbol must be a single character");
      config.shared_symbol = cps.front();
    } else if (key == "min_duration_seconds") {
      try {
        std::size_t used = 0;
        config.min_duration_seconds = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception &) {
        throw ParseError(line_no, "min_duration_seconds must be a number");
      }
    } else if (key == "drop_digits") {
      config.drop_digits = parse_bool(value, line_no);
    } else if (key == "drop_spelled_words") {
      config.drop_spelled_words = parse_bool(value, line_no);
    } else if (key == "dictation_defaults") {
      keep_default_dictation = parse_bool(value, line_no);
    } else if (key.rfind("dictation.", 0) == 0 && key.size() > 10) {
      extra_dictation[key.substr(10)] = value;
    } else {
      throw ParseError(line_no, "unknown key '" + key + "'");
    }
    if (eol == text.size()) break;
  }
  if (!keep_default_dictation) config.dictation_replacements.clear();
  for (auto &[k, v] : extra_dictation) config.dictation_replacements[k] = v;
  config.validate();
  return config;
}

NormalizationConfig load_normalization_config(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_normalization_config(buf.str());
}

std::string normalize_transcript(std::string_view raw, const NormalizationConfig &config) {
  return Normalizer(config)(raw);
}

FilterDecision filter_record(const TranscriptRecord &record, const NormalizationConfig &config) {
  return classify(record, Normalizer(config)).decision;
}

NormalizedCorpus normalize_corpus(const std::vector<TranscriptRecord> &records,
                                  const NormalizationConfig &config, unsigned jobs) {
  const Normalizer normalizer(config);
  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) { outcomes[i] = classify(records[i], normalizer); });

  NormalizedCorpus result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (outcomes[i].decision.keep()) {
      TranscriptRecord r = records[i];
      r.text = std::move(outcomes[i].normalized);
      result.kept.push_back(std::move(r));
    } else {
      result.dropped.emplace_back(records[i].id, *outcomes[i].decision.reason);
    }
  }
  return result;
}

}  // namespace ctcfuse
