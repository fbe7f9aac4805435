#include "ctcfuse/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ctcfuse/error.hpp"

namespace ctcfuse {

NGramKey NGramKey::of(std::span<const WordId> words) {
  NGramKey key;
  key.ids.fill(kNoWord);
  std::copy(words.begin(), words.end(), key.ids.begin());
  return key;
}

std::size_t NGramKeyHash::operator()(const NGramKey &key) const noexcept {
  // FNV-1a over the ids.
  std::uint64_t h = 1469598103934665603ull;
  for (WordId id : key.ids) {
    h ^= id;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h ^ (h >> 29));
}

std::uint64_t NgramCounts::count(const std::vector<std::string> &ngram) const {
  if (ngram.empty() || ngram.size() > tables.size()) return 0;
  std::vector<WordId> ids;
  for (const auto &w : ngram) {
    auto it = std::find(vocab.begin(), vocab.end(), w);
    if (it == vocab.end()) return 0;
    ids.push_back(static_cast<WordId>(it - vocab.begin()));
  }
  const auto &table = tables[ngram.size() - 1].counts;
  auto found = table.find(NGramKey::of(ids));
  return found == table.end() ? 0 : found->second;
}

NgramCounts count_ngrams(const std::vector<std::vector<std::string>> &sentences, int max_order) {
  if (max_order < 1 || max_order > kMaxOrder)
    throw InvalidInput("n-gram order must be between 1 and " + std::to_string(kMaxOrder));
  if (sentences.empty()) throw InvalidInput("cannot count n-grams of an empty sentence list");

  NgramCounts result;
  result.vocab = {std::string(kBos), std::string(kEos), std::string(kUnk)};
  std::unordered_map<std::string, WordId> index{{std::string(kBos), 0}, {std::string(kEos), 1}, {std::string(kUnk), 2}};
  constexpr WordId bos = 0;
  constexpr WordId eos = 1;

  std::vector<std::unordered_map<NGramKey, std::uint64_t, NGramKeyHash>> raw(max_order);
  std::vector<WordId> padded;
  for (const auto &sentence : sentences) {
    padded.clear();
    padded.push_back(bos);
    for (const auto &w : sentence) {
      if (w == kBos || w == kEos) throw InvalidInput("sentences must not contain <s> or </s>");
      auto [it, inserted] = index.try_emplace(w, static_cast<WordId>(result.vocab.size()));
      if (inserted) result.vocab.push_back(w);
      padded.push_back(it->second);
    }
    padded.push_back(eos);
    for (int n = 1; n <= max_order; ++n) {
      for (std::size_t start = 0; start + n <= padded.size(); ++start) {
        if (n == 1 && padded[start] == bos) continue;
        ++raw[n - 1][NGramKey::of(std::span(padded).subspan(start, n))];
      }
    }
  }

  result.tables.resize(max_order);
  for (int n = 1; n <= max_order; ++n) {
    CountTable &table = result.tables[n - 1];
    table.order = n;
    table.adjusted = n < max_order;
    if (n == max_order) {
      table.counts = std::move(raw[n - 1]);
      continue;
    }
    // Continuation counts: every distinct (n+1)-gram type (v, g) adds one to g.
    for (const auto &[key, count] : raw[n - 1]) {
      if (key.ids[0] == bos) table.counts[key] = count;
    }
    for (const auto &entry : raw[n]) {
      NGramKey suffix;
      suffix.ids.fill(kNoWord);
      std::copy(entry.first.ids.begin() + 1, entry.first.ids.begin() + n + 1, suffix.ids.begin());
      if (suffix.ids[0] == bos) continue;
      ++table.counts[suffix];
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// ArpaModel

ArpaModel::ArpaModel(int max_order) : max_order_(max_order) {
  if (max_order < 1 || max_order > kMaxOrder)
    throw InvalidInput("n-gram order must be between 1 and " + std::to_string(kMaxOrder));
  tables_.resize(max_order);
}

WordId ArpaModel::intern(std::string_view word) {
  auto [it, inserted] = index_.try_emplace(std::string(word), static_cast<WordId>(words_.size()));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

std::optional<WordId> ArpaModel::find_word(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordId ArpaModel::word_or_unk(std::string_view word) const {
  if (auto id = find_word(word)) return *id;
  if (auto unk = find_word(kUnk)) return *unk;
  return kNoWord;
}

void ArpaModel::set(std::span<const WordId> ngram, ArpaEntry entry) {
  if (ngram.empty() || static_cast<int>(ngram.size()) > max_order_)
    throw InvalidInput("n-gram length outside the model order");
  tables_[ngram.size() - 1][NGramKey::of(ngram)] = entry;
}

const ArpaEntry *ArpaModel::find(std::span<const WordId> ngram) const {
  if (ngram.empty() || static_cast<int>(ngram.size()) > max_order_) return nullptr;
  const auto &table = tables_[ngram.size() - 1];
  auto it = table.find(NGramKey::of(ngram));
  return it == table.end() ? nullptr : &it->second;
}

bool ArpaModel::empty() const { return tables_.front().empty(); }

std::vector<std::pair<std::vector<WordId>, ArpaEntry>> ArpaModel::sorted_entries(int order) const {
  std::vector<std::pair<std::vector<WordId>, ArpaEntry>> out;
  out.reserve(tables_.at(order - 1).size());
  for (const auto &[key, entry] : tables_[order - 1])
    out.emplace_back(std::vector<WordId>(key.ids.begin(), key.ids.begin() + order), entry);
  std::sort(out.begin(), out.end(), [this](const auto &a, const auto &b) {
    return std::lexicographical_compare(a.first.begin(), a.first.end(), b.first.begin(), b.first.end(),
                                        [this](WordId x, WordId y) { return words_[x] < words_[y]; });
  });
  return out;
}

double ArpaModel::log10_prob(std::span<const WordId> context, WordId word) const {
  if (word == kNoWord || word >= words_.size() || !find(std::span(&word, 1))) {
    word = kNoWord;
    if (auto unk = find_word(kUnk); unk && find(std::span(&*unk, 1))) word = *unk;
    if (word == kNoWord) return kLog10Zero;
  }
  const std::size_t keep = std::min<std::size_t>(context.size(), max_order_ - 1);
  context = context.last(keep);

  std::array<WordId, kMaxOrder> buffer{};
  double backoff = 0.0;
  for (std::size_t len = context.size() + 1; len-- > 0;) {
    const auto ctx = context.last(len);
    std::copy(ctx.begin(), ctx.end(), buffer.begin());
    buffer[len] = word;
    if (const ArpaEntry *e = find(std::span(buffer.data(), len + 1))) return backoff + e->log10_prob;
    if (const ArpaEntry *c = find(ctx); c && c->log10_backoff) backoff += *c->log10_backoff;
  }
  return backoff + kLog10Zero;  // unreachable: the unigram exists
}

LmState ArpaModel::begin_sentence_state() const {
  LmState state;
  if (max_order_ > 1) {
    if (auto bos = find_word(kBos)) {
      state.words[0] = *bos;
      state.length = 1;
    }
  }
  return state;
}

double ArpaModel::score(const LmState &in, WordId word, LmState &out) const {
  const double lp = log10_prob(in.context(), word);
  const int capacity = max_order_ - 1;
  LmState next;
  if (capacity > 0) {
    const WordId scored = (word == kNoWord || !find(std::span(&word, 1))) ? word_or_unk(kUnk) : word;
    const int keep = std::min(in.length, capacity - 1);
    std::copy(in.words.begin() + (in.length - keep), in.words.begin() + in.length, next.words.begin());
    next.words[keep] = scored;
    next.length = keep + 1;
  }
  out = next;
  return lp;
}

// ---------------------------------------------------------------------------
// Kneser-Ney estimation

std::vector<double> kneser_ney_discounts(const NgramCounts &counts, const DiscountSpec &discount) {
  std::vector<double> out;
  for (const CountTable &table : counts.tables) {
    if (discount.fixed) {
      if (!(*discount.fixed >= 0.0 && *discount.fixed <= 1.0))
        throw InvalidInput("fixed discount must lie in [0, 1]");
      out.push_back(*discount.fixed);
      continue;
    }
    std::uint64_t n1 = 0, n2 = 0;
    for (const auto &[key, c] : table.counts) {
      n1 += c == 1;
      n2 += c == 2;
    }
    if (n1 + 2 * n2 == 0)
      throw InvalidInput("cannot estimate the order-" + std::to_string(table.order) +
                         " discount: no n-grams with count 1 or 2; use a fixed discount");
    out.push_back(static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2));
  }
  return out;
}

namespace {

double to_log10(double p) { return p > 0.0 ? std::log10(p) : kLog10Zero; }

struct ContextTotals {
  std::uint64_t sum = 0;
  std::uint64_t types = 0;
};

}  // namespace

ArpaModel estimate_kneser_ney(const NgramCounts &counts, const DiscountSpec &discount) {
  if (counts.tables.empty() || counts.tables.front().counts.empty())
    throw InvalidInput("cannot estimate a language model from empty counts");
  const int order = counts.max_order();
  const std::vector<double> discounts = kneser_ney_discounts(counts, discount);

  ArpaModel model(order);
  for (const auto &w : counts.vocab) model.intern(w);
  const WordId bos = 0;
  const WordId unk = 2;

  // Interpolated probabilities in linear space, per order.
  std::vector<std::unordered_map<NGramKey, double, NGramKeyHash>> prob(order);

  // Unigrams: discounted continuation counts plus a uniform share.
  {
    const auto &table = counts.tables[0].counts;
    ContextTotals totals;
    for (const auto &[key, c] : table) {
      totals.sum += c;
      ++totals.types;
    }
    if (totals.sum == 0) throw InvalidInput("unigram counts sum to zero");
    // The uniform share covers every observed word, </s> and <unk>.
    std::vector<std::pair<NGramKey, double>> vocab;
    for (WordId id = 0; id < counts.vocab.size(); ++id) {
      if (id == bos) continue;
      const WordId key_ids[1] = {id};
      const NGramKey key = NGramKey::of(key_ids);
      auto it = table.find(key);
      const double c = it == table.end() ? 0.0 : static_cast<double>(it->second);
      if (c > 0.0 || id == unk) vocab.emplace_back(key, c);
    }
    const double d = discounts[0];
    const double interpolation = d * static_cast<double>(totals.types) / static_cast<double>(totals.sum);
    const double uniform = interpolation / static_cast<double>(vocab.size());
    for (const auto &[key, c] : vocab)
      prob[0][key] = std::max(c - d, 0.0) / static_cast<double>(totals.sum) + uniform;
  }

  for (int n = 2; n <= order; ++n) {
    const auto &table = counts.tables[n - 1].counts;
    const double d = discounts[n - 1];
    std::unordered_map<NGramKey, ContextTotals, NGramKeyHash> contexts;
    for (const auto &[key, c] : table) {
      NGramKey ctx = key;
      ctx.ids[n - 1] = kNoWord;
      auto &t = contexts[ctx];
      t.sum += c;
      ++t.types;
    }
    std::unordered_map<NGramKey, double, NGramKeyHash> interpolation;
    for (const auto &[ctx, t] : contexts)
      interpolation[ctx] = d * static_cast<double>(t.types) / static_cast<double>(t.sum);

    for (const auto &[key, c] : table) {
      NGramKey ctx = key;
      ctx.ids[n - 1] = kNoWord;
      NGramKey lower;
      lower.ids.fill(kNoWord);
      std::copy(key.ids.begin() + 1, key.ids.begin() + n, lower.ids.begin());
      auto low = prob[n - 2].find(lower);
      if (low == prob[n - 2].end())
        throw InvalidInput("inconsistent counts: missing lower-order n-gram for order " + std::to_string(n));
      const auto &t = contexts.at(ctx);
      prob[n - 1][key] =
          std::max(static_cast<double>(c) - d, 0.0) / static_cast<double>(t.sum) + interpolation.at(ctx) * low->second;
    }

    // The interpolation weight of a context is its backoff weight.
    for (const auto &[ctx, weight] : interpolation) {
      const std::span<const WordId> ids(ctx.ids.data(), n - 1);
      ArpaEntry entry{kLog10Zero, to_log10(weight)};
      if (auto it = prob[n - 2].find(ctx); it != prob[n - 2].end())
        entry.log10_prob = to_log10(it->second);
      else if (!(n == 2 && ctx.ids[0] == bos))  // only the <s> unigram lacks a probability
        throw InvalidInput("inconsistent counts: context missing at order " + std::to_string(n - 1));
      model.set(ids, entry);
    }
    for (const auto &[key, p] : prob[n - 2]) {
      const std::span<const WordId> ids(key.ids.data(), n - 1);
      if (!model.find(ids)) model.set(ids, {to_log10(p), std::nullopt});
    }
  }
  for (const auto &[key, p] : prob[order - 1]) {
    const std::span<const WordId> ids(key.ids.data(), order);
    model.set(ids, {to_log10(p), std::nullopt});
  }
  // <s> only ever appears as a context.
  const WordId bos_ids[1] = {bos};
  if (!model.find(bos_ids)) model.set(bos_ids, {kLog10Zero, std::nullopt});
  return model;
}

// ---------------------------------------------------------------------------
// Queries

double conditional_log10(const ArpaModel &model, const std::vector<std::string> &context, std::string_view word) {
  std::vector<WordId> ids;
  ids.reserve(context.size());
  for (const auto &w : context) ids.push_back(model.word_or_unk(w));
  return model.log10_prob(ids, model.word_or_unk(word));
}

double score_sequence(const ArpaModel &model, const std::vector<std::string> &words) {
  LmState state = model.begin_sentence_state();
  double total = 0.0;
  for (const auto &w : words) total += model.score(state, model.word_or_unk(w), state);
  total += model.score(state, model.word_or_unk(kEos), state);
  return total;
}

double perplexity(const ArpaModel &model, const std::vector<std::vector<std::string>> &sentences) {
  if (sentences.empty()) throw InvalidInput("perplexity needs at least one sentence");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto &s : sentences) {
    total += score_sequence(model, s);
    tokens += s.size() + 1;
  }
  return std::pow(10.0, -total / static_cast<double>(tokens));
}

}  // namespace ctcfuse
