#include "ctcfuse/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <span>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "ctcfuse/error.hpp"
#include "ctcfuse/parallel.hpp"

namespace ctcfuse {

namespace {

// Lexicographic cost: (edits, deletions).
struct Cost {
  std::size_t edits = 0;
  std::size_t deletions = 0;
  bool operator<(const Cost &o) const { return edits != o.edits ? edits < o.edits : deletions < o.deletions; }
};

template <typename T>
EditCounts align(std::span<const T> ref, std::span<const T> hyp) {
  // Two rolling rows over the hypothesis axis.
  std::vector<Cost> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = {j, 0};
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = {i, i};
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      Cost diag = prev[j - 1];
      diag.edits += ref[i - 1] == hyp[j - 1] ? 0 : 1;
      Cost del = prev[j];
      ++del.edits;
      ++del.deletions;
      Cost ins = cur[j - 1];
      ++ins.edits;
      Cost best = diag;
      if (del < best) best = del;
      if (ins < best) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  const Cost &total = prev[hyp.size()];
  EditCounts out;
  out.reference_length = ref.size();
  out.deletions = total.deletions;
  // D - I = |ref| - |hyp| for every alignment.
  out.insertions = total.deletions + hyp.size() - ref.size();
  out.substitutions = total.edits - out.deletions - out.insertions;
  return out;
}

std::string single_spaced(std::string_view text) {
  std::string out;
  for (const auto &w : split_words(text)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::string format_rate(double percent) {
  if (std::isnan(percent)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", percent);
  return buf;
}

std::string group_key(const TranscriptRecord &r, std::string_view group_by) {
  if (group_by.empty()) return "all";
  if (group_by == "language") return std::string(to_string(r.language));
  if (group_by == "region") return r.region ? *r.region : "unknown";
  if (group_by == "split") return r.split ? std::string(to_string(*r.split)) : "unknown";
  throw InvalidInput("cannot group by '" + std::string(group_by) + "'; use language, region or split");
}

nlohmann::ordered_json score_json(const GroupScore &g) {
  nlohmann::ordered_json j;
  const double w = g.wer_percent(), c = g.cer_percent();
  j["wer"] = std::isnan(w) ? nlohmann::ordered_json() : nlohmann::ordered_json(w);
  j["cer"] = std::isnan(c) ? nlohmann::ordered_json() : nlohmann::ordered_json(c);
  j["substitutions"] = g.words.substitutions;
  j["deletions"] = g.words.deletions;
  j["insertions"] = g.words.insertions;
  j["ref_len"] = g.words.reference_length;
  j["char_errors"] = g.chars.errors();
  j["char_ref_len"] = g.chars.reference_length;
  return j;
}

}  // namespace

EditCounts edit_distance(const std::vector<std::string> &reference, const std::vector<std::string> &hypothesis) {
  return align<std::string>(reference, hypothesis);
}

EditCounts edit_distance(std::u32string_view reference, std::u32string_view hypothesis) {
  return align<char32_t>(std::span(reference.data(), reference.size()), std::span(hypothesis.data(), hypothesis.size()));
}

EditCounts word_edits(std::string_view reference, std::string_view hypothesis) {
  return edit_distance(split_words(reference), split_words(hypothesis));
}

EditCounts char_edits(std::string_view reference, std::string_view hypothesis) {
  return edit_distance(utf8_to_u32(single_spaced(reference)), utf8_to_u32(single_spaced(hypothesis)));
}

double error_rate_percent(const EditCounts &counts) {
  if (counts.reference_length == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 * static_cast<double>(counts.errors()) / static_cast<double>(counts.reference_length);
}

double wer(const std::vector<TextPair> &pairs) {
  EditCounts total;
  for (const auto &[ref, hyp] : pairs) total += word_edits(ref, hyp);
  if (total.reference_length == 0) throw InvalidInput("WER undefined: references contain no words");
  return error_rate_percent(total);
}

double cer(const std::vector<TextPair> &pairs) {
  EditCounts total;
  for (const auto &[ref, hyp] : pairs) total += char_edits(ref, hyp);
  if (total.reference_length == 0) throw InvalidInput("CER undefined: references contain no characters");
  return error_rate_percent(total);
}

EvalReport evaluate(const std::vector<TranscriptRecord> &references,
                    const std::vector<std::pair<std::string, std::string>> &hypotheses, std::string_view group_by,
                    const NormalizationConfig &config, unsigned jobs) {
  std::unordered_map<std::string, std::size_t> hyp_index;
  for (std::size_t i = 0; i < hypotheses.size(); ++i)
    if (!hyp_index.emplace(hypotheses[i].first, i).second)
      throw InvalidInput("duplicate hypothesis id '" + hypotheses[i].first + "'");
  std::set<std::string> ref_ids;
  for (const auto &r : references) {
    if (!ref_ids.insert(r.id).second) throw InvalidInput("duplicate reference id '" + r.id + "'");
    if (!hyp_index.contains(r.id)) throw InvalidInput("no hypothesis for reference id '" + r.id + "'");
  }
  for (const auto &[id, text] : hypotheses)
    if (!ref_ids.contains(id)) throw InvalidInput("hypothesis id '" + id + "' has no reference");

  EvalReport report;
  report.group_by = std::string(group_by);
  std::vector<std::string> keys;
  keys.reserve(references.size());
  for (const auto &r : references) keys.push_back(group_key(r, group_by));

  std::vector<GroupScore> scores(references.size());
  parallel_for(references.size(), jobs, [&](std::size_t i) {
    const std::string ref = normalize_transcript(references[i].text, config);
    const std::string hyp = normalize_transcript(hypotheses[hyp_index.at(references[i].id)].second, config);
    scores[i] = {word_edits(ref, hyp), char_edits(ref, hyp)};
  });
  // Integer sums: order of accumulation does not matter.
  for (std::size_t i = 0; i < scores.size(); ++i) {
    GroupScore &g = report.groups[keys[i]];
    g.words += scores[i].words;
    g.chars += scores[i].chars;
    report.overall.words += scores[i].words;
    report.overall.chars += scores[i].chars;
  }
  return report;
}

std::string render_report_tsv(const EvalReport &report) {
  std::ostringstream out;
  out << "group\twer\tcer\tS\tD\tI\tref_len\n";
  auto row = [&](const std::string &name, const GroupScore &g) {
    out << name << '\t' << format_rate(g.wer_percent()) << '\t' << format_rate(g.cer_percent()) << '\t'
        << g.words.substitutions << '\t' << g.words.deletions << '\t' << g.words.insertions << '\t'
        << g.words.reference_length << '\n';
  };
  if (!report.group_by.empty())
    for (const auto &[name, g] : report.groups) row(name, g);
  row("all", report.overall);
  return out.str();
}

std::string render_report_json(const EvalReport &report) {
  nlohmann::ordered_json j;
  j["group_by"] = report.group_by;
  j["overall"] = score_json(report.overall);
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  if (!report.group_by.empty())
    for (const auto &[name, g] : report.groups) groups[name] = score_json(g);
  j["groups"] = groups;
  return j.dump(2) + "\n";
}

}  // namespace ctcfuse
