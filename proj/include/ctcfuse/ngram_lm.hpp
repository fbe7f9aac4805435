#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctcfuse {

inline constexpr int kMaxOrder = 5;

// log10 value standing in for probability zero (ARPA convention, used for <s>).
inline constexpr double kLog10Zero = -99.0;

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

using WordId = std::uint32_t;
inline constexpr WordId kNoWord = 0xFFFFFFFFu;

// Fixed-width n-gram key; slots past the n-gram length hold kNoWord.
struct NGramKey {
  std::array<WordId, kMaxOrder> ids;

  static NGramKey of(std::span<const WordId> words);
  bool operator==(const NGramKey &) const = default;
};

struct NGramKeyHash {
  std::size_t operator()(const NGramKey &key) const noexcept;
};

// Counts for one order. Lower orders hold continuation counts (number of
// distinct single-word left extensions) except for n-grams starting with <s>.
struct CountTable {
  int order = 1;
  bool adjusted = false;
  std::unordered_map<NGramKey, std::uint64_t, NGramKeyHash> counts;
};

struct NgramCounts {
  // Id -> word. Ids 0, 1 and 2 are always <s>, </s> and <unk>.
  std::vector<std::string> vocab;
  // tables[n - 1] holds order n.
  std::vector<CountTable> tables;

  int max_order() const { return static_cast<int>(tables.size()); }
  // 0 when the n-gram was never seen (or a word is unknown).
  std::uint64_t count(const std::vector<std::string> &ngram) const;
};

// Each sentence is padded as `<s> w1 ... wk </s>`.
NgramCounts count_ngrams(const std::vector<std::vector<std::string>> &sentences, int max_order);

// Either a fixed discount shared by all orders, or per-order estimation from
// counts of counts: D = n1 / (n1 + 2 n2).
struct DiscountSpec {
  std::optional<double> fixed;

  static DiscountSpec estimated() { return {}; }
  static DiscountSpec fixed_value(double d) { return {d}; }
};

struct ArpaEntry {
  double log10_prob = 0.0;
  std::optional<double> log10_backoff;
};

// Incremental query state: the most recent (at most max_order - 1) words.
struct LmState {
  std::array<WordId, kMaxOrder - 1> words{};
  int length = 0;

  std::span<const WordId> context() const { return {words.data(), static_cast<std::size_t>(length)}; }
  bool operator==(const LmState &other) const {
    return length == other.length && std::equal(words.begin(), words.begin() + length, other.words.begin());
  }
};

// Backoff n-gram model in log10, as stored in ARPA files. Immutable once built;
// concurrent readers are safe.
class ArpaModel {
 public:
  explicit ArpaModel(int max_order);

  int max_order() const { return max_order_; }

  WordId intern(std::string_view word);
  std::optional<WordId> find_word(std::string_view word) const;
  // Unknown words map to <unk>; kNoWord when the model has no <unk>.
  WordId word_or_unk(std::string_view word) const;
  const std::string &word(WordId id) const { return words_.at(id); }
  std::size_t vocab_size() const { return words_.size(); }

  void set(std::span<const WordId> ngram, ArpaEntry entry);
  const ArpaEntry *find(std::span<const WordId> ngram) const;
  std::size_t size(int order) const { return tables_.at(order - 1).size(); }
  bool empty() const;

  // Entries of one order sorted by their word strings.
  std::vector<std::pair<std::vector<WordId>, ArpaEntry>> sorted_entries(int order) const;

  // Backoff recursion. Contexts longer than max_order - 1 keep their most
  // recent words. Total: unknown words score as <unk> (kLog10Zero without one).
  double log10_prob(std::span<const WordId> context, WordId word) const;

  LmState begin_sentence_state() const;
  LmState null_state() const { return {}; }
  // Scores `word` after `in`, returns log10 P and writes the successor state.
  double score(const LmState &in, WordId word, LmState &out) const;

 private:
  int max_order_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> index_;
  std::vector<std::unordered_map<NGramKey, ArpaEntry, NGramKeyHash>> tables_;
};

// Interpolated Kneser-Ney with one discount per order, converted to backoff
// form. Throws InvalidInput on empty counts or a discount outside [0, 1].
ArpaModel estimate_kneser_ney(const NgramCounts &counts, const DiscountSpec &discount);

// Discount used per order (index n - 1); exposed for diagnostics and tests.
std::vector<double> kneser_ney_discounts(const NgramCounts &counts, const DiscountSpec &discount);

double conditional_log10(const ArpaModel &model, const std::vector<std::string> &context, std::string_view word);

// log10 P(sentence): <s> as initial context and a final </s> term.
double score_sequence(const ArpaModel &model, const std::vector<std::string> &words);

// 10^(-total_log10 / tokens) with one </s> per sentence.
double perplexity(const ArpaModel &model, const std::vector<std::vector<std::string>> &sentences);

// ARPA text I/O. Probabilities and backoffs use 7 significant digits.
void write_arpa(const ArpaModel &model, std::ostream &out);
void write_arpa_file(const ArpaModel &model, const std::string &path);
ArpaModel parse_arpa(std::istream &in);
ArpaModel parse_arpa_file(const std::string &path);

}  // namespace ctcfuse
