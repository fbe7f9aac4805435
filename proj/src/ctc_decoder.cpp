#include "ctcfuse/ctc_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <set>

#include "ctcfuse/corpus.hpp"
#include "ctcfuse/error.hpp"
#include "ctcfuse/parallel.hpp"
#include "ctcfuse/textnorm.hpp"

namespace ctcfuse {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kNoToken = std::numeric_limits<std::size_t>::max();

double fusion_term(double log10_prob, const DecoderParams &params) {
  return params.alpha * log10_prob * std::numbers::ln10 + params.beta;
}

std::string join_words(const std::vector<std::string> &words) {
  std::string out;
  for (const auto &w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

void check_shapes(const EmissionMatrix &emissions, const Vocabulary &vocab) {
  if (emissions.frames == 0) throw InvalidInput("emission matrix has no frames");
  if (emissions.vocab_size != vocab.size())
    throw InvalidInput("emission width " + std::to_string(emissions.vocab_size) + " does not match vocabulary size " +
                       std::to_string(vocab.size()));
  if (emissions.values.size() != emissions.frames * emissions.vocab_size)
    throw InvalidInput("emission matrix storage does not match its shape");
}

bool better(const Hypothesis &a, const Hypothesis &b) {
  if (a.score != b.score) return a.score > b.score;
  return a.text < b.text;
}

// Ranks per-text acoustic mass plus fusion.
std::vector<Hypothesis> rank(std::map<std::string, std::pair<double, double>> &by_text) {
  std::vector<Hypothesis> out;
  out.reserve(by_text.size());
  for (auto &[text, scores] : by_text) out.push_back({text, scores.first + scores.second, scores.first});
  std::sort(out.begin(), out.end(), better);
  return out;
}

// Prefix tree of collapsed outputs; a node id identifies a prefix.
class PrefixSearch {
 public:
  PrefixSearch(const Vocabulary &vocab, const ArpaModel *lm, const DecoderParams &params)
      : vocab_(vocab), lm_(lm), params_(params) {
    Node root;
    if (lm_) root.state = lm_->begin_sentence_state();
    nodes_.push_back(std::move(root));
  }

  std::vector<Hypothesis> run(const EmissionMatrix &emissions) {
    std::vector<Candidate> beam{{0, 0.0, kNegInf}};
    std::vector<Candidate> next;
    for (std::size_t t = 0; t < emissions.frames; ++t) {
      const auto row = emissions.row(t);
      const std::size_t best_token =
          static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      next.clear();
      for (const Candidate &entry : beam) {
        const double total = log_add(entry.blank, entry.nonblank);
        const std::size_t last = nodes_[entry.node].token;
        for (std::size_t k = 0; k < row.size(); ++k) {
          const double lp = row[k];
          if (params_.prune_log_floor && lp < *params_.prune_log_floor && k != best_token) continue;
          if (k == vocab_.blank_index) {
            accumulate(next, entry.node, total + lp, kNegInf);
          } else if (k == last) {
            accumulate(next, entry.node, kNegInf, entry.nonblank + lp);
            accumulate(next, child(entry.node, k), kNegInf, entry.blank + lp);
          } else {
            accumulate(next, child(entry.node, k), kNegInf, total + lp);
          }
        }
      }
      for (const Candidate &c : next) slot_[c.node] = -1;
      std::erase_if(next, [](const Candidate &c) { return c.blank == kNegInf && c.nonblank == kNegInf; });
      prune(next);
      std::swap(beam, next);
    }
    return finish(beam);
  }

 private:
  struct Node {
    int parent = -1;
    std::size_t token = kNoToken;
    double fusion = 0.0;
    LmState state;
    std::string text;     // collapsed output so far
    std::string partial;  // letters of the unfinished word (with a model)
    std::vector<std::pair<std::size_t, int>> children;
  };

  struct Candidate {
    int node;
    double blank;
    double nonblank;
  };

  int child(int parent, std::size_t token) {
    for (const auto &[tok, id] : nodes_[parent].children)
      if (tok == token) return id;
    Node node;
    node.parent = parent;
    node.token = token;
    node.fusion = nodes_[parent].fusion;
    node.state = nodes_[parent].state;
    node.text = nodes_[parent].text;
    node.text += vocab_.symbol(token);
    if (token == vocab_.delimiter_index) {
      if (lm_ && !nodes_[parent].partial.empty()) {
        const WordId word = lm_->word_or_unk(nodes_[parent].partial);
        node.fusion += fusion_term(lm_->score(nodes_[parent].state, word, node.state), params_);
      }
    } else if (lm_) {
      node.partial = nodes_[parent].partial;
      node.partial += vocab_.symbol(token);
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(node));
    nodes_[parent].children.emplace_back(token, id);
    return id;
  }

  void accumulate(std::vector<Candidate> &next, int node, double blank, double nonblank) {
    if (static_cast<std::size_t>(node) >= slot_.size()) slot_.resize(nodes_.size(), -1);
    int &slot = slot_[node];
    if (slot < 0) {
      slot = static_cast<int>(next.size());
      next.push_back({node, kNegInf, kNegInf});
    }
    Candidate &c = next[slot];
    c.blank = log_add(c.blank, blank);
    c.nonblank = log_add(c.nonblank, nonblank);
  }

  double fused(const Candidate &c) const { return log_add(c.blank, c.nonblank) + nodes_[c.node].fusion; }

  void prune(std::vector<Candidate> &candidates) const {
    if (candidates.size() <= params_.beam_width) return;
    auto order = [this](const Candidate &a, const Candidate &b) {
      const double sa = fused(a), sb = fused(b);
      if (sa != sb) return sa > sb;
      return nodes_[a.node].text < nodes_[b.node].text;
    };
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(params_.beam_width),
                     candidates.end(), order);
    candidates.resize(params_.beam_width);
    // Keep iteration order independent of nth_element's internal layout.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) { return a.node < b.node; });
  }

  std::vector<Hypothesis> finish(const std::vector<Candidate> &beam) const {
    std::map<std::string, std::pair<double, double>> by_text;
    for (const Candidate &c : beam) {
      const Node &node = nodes_[c.node];
      double fusion = node.fusion;
      if (lm_) {
        LmState state = node.state;
        if (!node.partial.empty())
          fusion += fusion_term(lm_->score(state, lm_->word_or_unk(node.partial), state), params_);
        if (params_.score_eos)
          fusion += params_.alpha * lm_->score(state, lm_->word_or_unk(kEos), state) * std::numbers::ln10;
      }
      const double acoustic = log_add(c.blank, c.nonblank);
      auto [it, inserted] = by_text.try_emplace(join_words(split_words(node.text)), acoustic, fusion);
      if (!inserted) it->second.first = log_add(it->second.first, acoustic);
    }
    return rank(by_text);
  }

  const Vocabulary &vocab_;
  const ArpaModel *lm_;
  const DecoderParams &params_;
  std::vector<Node> nodes_;
  std::vector<int> slot_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::norwegian(bool with_shared_symbol) {
  Vocabulary v;
  v.tokens = {std::string(kBlankToken), std::string(kDelimiterToken)};
  for (char c = 'a'; c <= 'z'; ++c) v.tokens.emplace_back(1, c);
  for (const char *s : {"æ", "ø", "å"}) v.tokens.emplace_back(s);
  if (with_shared_symbol) v.tokens.emplace_back("ĥ");
  v.blank_index = 0;
  v.delimiter_index = 1;
  return v;
}

std::string_view Vocabulary::symbol(std::size_t index) const {
  if (index == blank_index) return "";
  if (index == delimiter_index) return " ";
  return tokens.at(index);
}

void Vocabulary::validate() const {
  if (tokens.empty()) throw InvalidInput("vocabulary is empty");
  if (blank_index >= tokens.size() || delimiter_index >= tokens.size())
    throw InvalidInput("blank or delimiter index out of range");
  if (blank_index == delimiter_index) throw InvalidInput("blank and delimiter must differ");
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].empty()) throw InvalidInput("vocabulary token " + std::to_string(i) + " is empty");
    if (!seen.insert(tokens[i]).second) throw InvalidInput("duplicate vocabulary token '" + tokens[i] + "'");
    if (i != blank_index && i != delimiter_index && tokens[i].find_first_of(" \t") != std::string::npos)
      throw InvalidInput("vocabulary token '" + tokens[i] + "' contains whitespace");
  }
}

Vocabulary parse_vocabulary(std::istream &in) {
  Vocabulary v;
  std::optional<std::size_t> blank, delimiter;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(line_no, "empty vocabulary token");
    if (line == kBlankToken) blank = v.tokens.size();
    if (line == kDelimiterToken) delimiter = v.tokens.size();
    v.tokens.push_back(line);
  }
  if (!blank) throw FormatError("vocabulary has no <blank> token");
  if (!delimiter) throw FormatError("vocabulary has no | delimiter token");
  v.blank_index = *blank;
  v.delimiter_index = *delimiter;
  v.validate();
  return v;
}

Vocabulary load_vocabulary(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary " + path);
  return parse_vocabulary(in);
}

void write_vocabulary(const Vocabulary &vocab, std::ostream &out) {
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    if (i == vocab.blank_index) out << kBlankToken << '\n';
    else if (i == vocab.delimiter_index) out << kDelimiterToken << '\n';
    else out << vocab.tokens[i] << '\n';
  }
}

void EmissionMatrix::check_normalized(double tolerance) const {
  for (std::size_t t = 0; t < frames; ++t) {
    double total = kNegInf;
    for (float v : row(t)) total = log_add(total, v);
    if (!(std::abs(total) <= tolerance))
      throw InvalidInput("emission row " + std::to_string(t) + " is not a log distribution (logsumexp " +
                         std::to_string(total) + ")");
  }
}

// ---------------------------------------------------------------------------
// Decoding

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

std::string ctc_collapse(std::span<const std::size_t> path, const Vocabulary &vocab) {
  std::string text;
  std::size_t previous = kNoToken;
  for (std::size_t index : path) {
    if (index >= vocab.size())
      throw InvalidInput("token index " + std::to_string(index) + " out of range for vocabulary of size " +
                         std::to_string(vocab.size()));
    if (index != previous && index != vocab.blank_index) text += vocab.symbol(index);
    previous = index;
  }
  return text;
}

std::string greedy_decode(const EmissionMatrix &emissions, const Vocabulary &vocab) {
  check_shapes(emissions, vocab);
  std::vector<std::size_t> path(emissions.frames);
  for (std::size_t t = 0; t < emissions.frames; ++t) {
    const auto row = emissions.row(t);
    // max_element returns the first maximum, i.e. the lowest index on ties.
    path[t] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return join_words(split_words(ctc_collapse(path, vocab)));
}

std::vector<Hypothesis> beam_search_decode(const EmissionMatrix &emissions, const Vocabulary &vocab,
                                           const ArpaModel *lm, const DecoderParams &params) {
  check_shapes(emissions, vocab);
  if (params.beam_width < 1) throw InvalidInput("beam width must be at least 1");
  return PrefixSearch(vocab, lm, params).run(emissions);
}

double fusion_score(const std::vector<std::string> &words, const ArpaModel *lm, const DecoderParams &params) {
  if (!lm) return 0.0;
  LmState state = lm->begin_sentence_state();
  double total = 0.0;
  for (const auto &w : words) total += fusion_term(lm->score(state, lm->word_or_unk(w), state), params);
  if (params.score_eos) total += params.alpha * lm->score(state, lm->word_or_unk(kEos), state) * std::numbers::ln10;
  return total;
}

std::vector<Hypothesis> oracle_decode(const EmissionMatrix &emissions, const Vocabulary &vocab, const ArpaModel *lm,
                                      const DecoderParams &params) {
  check_shapes(emissions, vocab);
  double paths = 1.0;
  for (std::size_t t = 0; t < emissions.frames; ++t) paths *= static_cast<double>(vocab.size());
  if (paths > 1e6) throw InvalidInput("oracle decoding limited to V^T <= 10^6 paths");

  std::map<std::string, double> mass;
  std::vector<std::size_t> path(emissions.frames, 0);
  while (true) {
    double lp = 0.0;
    for (std::size_t t = 0; t < path.size(); ++t) lp += emissions.at(t, path[t]);
    const std::string text = join_words(split_words(ctc_collapse(path, vocab)));
    auto [it, inserted] = mass.try_emplace(text, lp);
    if (!inserted) it->second = log_add(it->second, lp);

    // Odometer increment, last frame fastest.
    std::size_t t = path.size();
    while (t > 0 && ++path[t - 1] == vocab.size()) path[--t] = 0;
    if (t == 0) break;
  }

  std::map<std::string, std::pair<double, double>> by_text;
  for (const auto &[text, acoustic] : mass) by_text.emplace(text, std::pair{acoustic, fusion_score(split_words(text), lm, params)});
  return rank(by_text);
}

std::vector<BatchResult> batch_decode(const std::vector<std::string> &emission_files, const Vocabulary &vocab,
                                      const ArpaModel *lm, const DecoderParams &params, unsigned jobs) {
  std::vector<BatchResult> results(emission_files.size());
  parallel_for(emission_files.size(), jobs, [&](std::size_t i) {
    BatchResult &r = results[i];
    r.id = std::filesystem::path(emission_files[i]).stem().string();
    try {
      const EmissionMatrix emissions = read_emissions(emission_files[i]);
      emissions.check_normalized();
      const auto ranked = beam_search_decode(emissions, vocab, lm, params);
      r.text = ranked.empty() ? std::string() : ranked.front().text;
    } catch (const Error &e) {
      r.error = e.what();
    }
  });
  return results;
}

}  // namespace ctcfuse
