#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "ctcfuse/error.hpp"
#include "ctcfuse/ngram_lm.hpp"

namespace ctcfuse {

namespace {

std::string format_g7(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.7g", value);
  return buf;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

double parse_number(std::string_view field, std::size_t line, const char *what) {
  const std::string copy(field);
  char *end = nullptr;
  const double value = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size())
    throw ParseError(line, std::string("non-numeric ") + what + " '" + copy + "'");
  return value;
}

class LineReader {
 public:
  explicit LineReader(std::istream &in) : in_(in) {}

  bool next(std::string &line) {
    if (!std::getline(in_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  // Skips blank lines; false at end of input.
  bool next_nonblank(std::string &line) {
    while (next(line))
      if (!split_fields(line).empty()) return true;
    return false;
  }
  std::size_t number() const { return number_; }

 private:
  std::istream &in_;
  std::size_t number_ = 0;
};

}  // namespace

void write_arpa(const ArpaModel &model, std::ostream &out) {
  if (model.empty()) throw InvalidInput("cannot write an empty language model");
  out << "\\data\\\n";
  for (int n = 1; n <= model.max_order(); ++n) out << "ngram " << n << '=' << model.size(n) << '\n';
  for (int n = 1; n <= model.max_order(); ++n) {
    out << "\n\\" << n << "-grams:\n";
    for (const auto &[ids, entry] : model.sorted_entries(n)) {
      out << format_g7(entry.log10_prob) << '\t';
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out << ' ';
        out << model.word(ids[i]);
      }
      if (entry.log10_backoff) out << '\t' << format_g7(*entry.log10_backoff);
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
  if (!out) throw IoError("failed writing ARPA output");
}

void write_arpa_file(const ArpaModel &model, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_arpa(model, out);
  out.flush();
  if (!out) throw IoError("failed writing " + path);
}

ArpaModel parse_arpa(std::istream &in) {
  LineReader reader(in);
  std::string line;

  // Anything before \data\ is a free-form preamble.
  bool found_data = false;
  while (reader.next(line)) {
    if (line == "\\data\\") {
      found_data = true;
      break;
    }
  }
  if (!found_data) throw ParseError(reader.number(), "missing \\data\\ header");

  std::vector<std::size_t> declared;
  while (true) {
    if (!reader.next_nonblank(line)) throw ParseError(reader.number(), "unexpected end of input in \\data\\ section");
    if (line.rfind("ngram ", 0) != 0) break;
    const std::string_view spec = std::string_view(line).substr(6);
    const std::size_t eq = spec.find('=');
    if (eq == std::string_view::npos) throw ParseError(reader.number(), "malformed ngram count line");
    const double order = parse_number(spec.substr(0, eq), reader.number(), "n-gram order");
    const double count = parse_number(spec.substr(eq + 1), reader.number(), "n-gram count");
    if (order != static_cast<double>(declared.size() + 1))
      throw ParseError(reader.number(), "n-gram orders must be declared as 1, 2, ...");
    if (count < 0 || count != static_cast<double>(static_cast<std::size_t>(count)))
      throw ParseError(reader.number(), "invalid n-gram count");
    declared.push_back(static_cast<std::size_t>(count));
  }
  if (declared.empty()) throw ParseError(reader.number(), "no ngram counts declared");
  if (declared.size() > static_cast<std::size_t>(kMaxOrder))
    throw ParseError(reader.number(), "order " + std::to_string(declared.size()) + " exceeds the supported maximum");

  ArpaModel model(static_cast<int>(declared.size()));
  std::vector<WordId> ids;
  // `line` now holds the first section header.
  for (std::size_t n = 1; n <= declared.size(); ++n) {
    const std::string expected = "\\" + std::to_string(n) + "-grams:";
    if (line != expected) throw ParseError(reader.number(), "expected '" + expected + "', got '" + line + "'");
    std::size_t seen = 0;
    bool more = false;
    while ((more = reader.next(line))) {
      const auto fields = split_fields(line);
      if (fields.empty() || line.front() == '\\') break;
      if (fields.size() != n + 1 && fields.size() != n + 2)
        throw ParseError(reader.number(), "expected " + std::to_string(n) + " words in a " + std::to_string(n) + "-gram line");
      ArpaEntry entry;
      entry.log10_prob = parse_number(fields[0], reader.number(), "probability");
      if (fields.size() == n + 2) entry.log10_backoff = parse_number(fields[n + 1], reader.number(), "backoff");
      ids.clear();
      for (std::size_t k = 1; k <= n; ++k) {
        if (n == 1) {
          ids.push_back(model.intern(fields[k]));
        } else if (auto id = model.find_word(fields[k])) {
          ids.push_back(*id);
        } else {
          throw ParseError(reader.number(), "word '" + std::string(fields[k]) + "' missing from the unigrams");
        }
      }
      model.set(ids, entry);
      ++seen;
    }
    if (seen != declared[n - 1] || model.size(static_cast<int>(n)) != declared[n - 1])
      throw ParseError(reader.number(), "declared ngram " + std::to_string(n) + "=" + std::to_string(declared[n - 1]) +
                                            " but found " + std::to_string(seen) + " entries");
    if (more && !split_fields(line).empty() && line.front() == '\\') continue;
    if (!reader.next_nonblank(line)) throw ParseError(reader.number(), "missing \\end\\ marker");
  }
  if (line != "\\end\\") throw ParseError(reader.number(), "expected \\end\\, got '" + line + "'");
  return model;
}

ArpaModel parse_arpa_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return parse_arpa(in);
}

}  // namespace ctcfuse
