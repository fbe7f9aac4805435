#include "ctcfuse/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ctcfuse/error.hpp"

namespace ctcfuse {

using ordered_json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kKnownKeys = {"id", "audio_path", "duration_seconds", "text", "language", "region", "split"};

std::string required_string(const ordered_json &obj, const char *key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line, std::string("missing required field '") + key + "'");
  if (!it->is_string()) throw ParseError(line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

TranscriptRecord parse_record(const std::string &line_text, std::size_t line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(line_text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line, "manifest line must be a JSON object");

  TranscriptRecord r;
  r.id = required_string(obj, "id", line);
  r.audio_path = required_string(obj, "audio_path", line);
  r.text = required_string(obj, "text", line);

  auto dur = obj.find("duration_seconds");
  if (dur == obj.end()) throw ParseError(line, "missing required field 'duration_seconds'");
  if (!dur->is_number()) throw ParseError(line, "field 'duration_seconds' must be a number");
  r.duration_seconds = dur->get<double>();
  if (!(r.duration_seconds >= 0.0)) throw ParseError(line, "field 'duration_seconds' must be non-negative");

  const std::string language = required_string(obj, "language", line);
  auto lang = parse_language(language);
  if (!lang) throw ParseError(line, "field 'language' must be \"nb\" or \"nn\", got \"" + language + "\"");
  r.language = *lang;

  if (auto it = obj.find("region"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(line, "field 'region' must be a string");
    r.region = it->get<std::string>();
  }
  if (auto it = obj.find("split"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(line, "field 'split' must be a string");
    auto split = parse_split(it->get<std::string>());
    if (!split) throw ParseError(line, "field 'split' must be train, validation or test");
    r.split = *split;
  }

  ordered_json extra = ordered_json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!kKnownKeys.contains(it.key())) extra[it.key()] = it.value();
  if (!extra.empty()) r.extra_json = extra.dump();
  return r;
}

std::string group_value(const TranscriptRecord &r, StatsField f) {
  switch (f) {
    case StatsField::Split: return r.split ? std::string(to_string(*r.split)) : "unknown";
    case StatsField::Language: return std::string(to_string(r.language));
    case StatsField::Region: return r.region ? *r.region : "unknown";
  }
  return "unknown";
}

std::string with_thousands(std::uint64_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string format_hours(double hours) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", hours);
  return buf;
}

template <typename T>
T from_le(const unsigned char *p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto *b = reinterpret_cast<unsigned char *>(&value);
    std::reverse(b, b + sizeof(T));
  }
  return value;
}

template <typename T>
void to_le(T value, unsigned char *p) {
  std::memcpy(p, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(p, p + sizeof(T));
}

std::string describe_bytes(const unsigned char *p, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] >= 0x20 && p[i] < 0x7F) {
      out.push_back(static_cast<char>(p[i]));
    } else {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\x%02X", p[i]);
      out += buf;
    }
  }
  return out;
}

constexpr char kMagic[4] = {'E', 'M', 'I', 'S'};
constexpr std::uint32_t kEmissionVersion = 1;

}  // namespace

// ---------------------------------------------------------------------------
// Manifests

Manifest parse_manifest(std::istream &in, std::string source_name) {
  Manifest m;
  m.source_name = std::move(source_name);
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    TranscriptRecord r = parse_record(line, line_no);
    if (!ids.insert(r.id).second) throw ParseError(line_no, "duplicate id '" + r.id + "'");
    m.records.push_back(std::move(r));
  }
  return m;
}

Manifest load_manifest(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path);
  try {
    return parse_manifest(in, std::filesystem::path(path).stem().string());
  } catch (const ParseError &e) {
    throw ParseError(e.line(), path + ": " + e.detail());
  }
}

std::string record_to_json(const TranscriptRecord &r) {
  ordered_json obj = ordered_json::object();
  obj["id"] = r.id;
  obj["audio_path"] = r.audio_path;
  obj["duration_seconds"] = r.duration_seconds;
  obj["text"] = r.text;
  obj["language"] = std::string(to_string(r.language));
  if (r.region) obj["region"] = *r.region;
  if (r.split) obj["split"] = std::string(to_string(*r.split));
  if (!r.extra_json.empty()) {
    const ordered_json extra = ordered_json::parse(r.extra_json);
    for (auto it = extra.begin(); it != extra.end(); ++it) obj[it.key()] = it.value();
  }
  return obj.dump();
}

void write_manifest(const Manifest &manifest, std::ostream &out) {
  for (const auto &r : manifest.records) out << record_to_json(r) << '\n';
  if (!out) throw IoError("failed writing manifest");
}

void save_manifest(const Manifest &manifest, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_manifest(manifest, out);
}

// ---------------------------------------------------------------------------
// Statistics

std::optional<StatsField> parse_stats_field(std::string_view name) {
  if (name == "split") return StatsField::Split;
  if (name == "language") return StatsField::Language;
  if (name == "region") return StatsField::Region;
  return std::nullopt;
}

std::string_view to_string(StatsField f) {
  switch (f) {
    case StatsField::Split: return "split";
    case StatsField::Language: return "language";
    case StatsField::Region: return "region";
  }
  return "";
}

DatasetStats dataset_stats(const Manifest &manifest, const std::vector<StatsField> &group_by) {
  DatasetStats stats;
  stats.group_by = group_by;
  std::map<std::vector<std::string>, StatsRow> groups;
  for (const auto &r : manifest.records) {
    std::vector<std::string> key;
    for (StatsField f : group_by) key.push_back(group_value(r, f));
    StatsRow &row = groups[key];
    row.key = key;
    row.seconds += r.duration_seconds;
    ++row.samples;
  }
  for (auto &[key, row] : groups) {
    stats.total.samples += row.samples;
    stats.rows.push_back(std::move(row));
  }
  // Sum per record, not per group, so the total does not depend on grouping.
  for (const auto &r : manifest.records) stats.total.seconds += r.duration_seconds;
  return stats;
}

std::string render_stats_tsv(const DatasetStats &stats) {
  std::ostringstream out;
  for (StatsField f : stats.group_by) out << to_string(f) << '\t';
  out << "hours\tsamples\n";
  for (const auto &row : stats.rows) {
    for (const auto &k : row.key) out << k << '\t';
    out << format_hours(row.hours()) << '\t' << with_thousands(row.samples) << '\n';
  }
  for (std::size_t i = 0; i < stats.group_by.size(); ++i) out << (i == 0 ? "Total" : "") << '\t';
  out << format_hours(stats.total.hours()) << '\t' << with_thousands(stats.total.samples) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// LM corpus

LmCorpusSummary build_lm_corpus(const std::vector<std::string> &manifest_paths,
                                const std::vector<std::string> &text_dirs, const NormalizationConfig &config,
                                std::ostream &target) {
  if (manifest_paths.empty() && text_dirs.empty()) throw InvalidInput("build_lm_corpus needs at least one source");
  NormalizationConfig text_rules = config;
  text_rules.min_duration_seconds = 0.0;

  LmCorpusSummary summary;
  auto emit = [&](const std::vector<TranscriptRecord> &records) {
    for (const auto &r : normalize_corpus(records, text_rules).kept) {
      target << r.text << '\n';
      ++summary.lines;
      summary.words += split_words(r.text).size();
    }
  };

  for (const auto &path : manifest_paths) {
    try {
      emit(load_manifest(path).records);
    } catch (const Error &e) {
      summary.errors.push_back(e.what());
    }
  }

  namespace fs = std::filesystem;
  for (const auto &dir : text_dirs) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
      if (it->is_regular_file() && it->path().extension() == ".txt") files.push_back(it->path());
    if (ec) {
      summary.errors.push_back("cannot read directory " + dir + ": " + ec.message());
      continue;
    }
    std::sort(files.begin(), files.end());
    for (const auto &file : files) {
      std::ifstream in(file, std::ios::binary);
      if (!in) {
        summary.errors.push_back("cannot open " + file.string());
        continue;
      }
      std::vector<TranscriptRecord> lines;
      std::string line;
      while (std::getline(in, line)) {
        TranscriptRecord r;
        r.id = file.filename().string() + ":" + std::to_string(lines.size() + 1);
        r.text = std::move(line);
        lines.push_back(std::move(r));
      }
      emit(lines);
    }
  }
  if (!target) throw IoError("failed writing the LM corpus");
  return summary;
}

// ---------------------------------------------------------------------------
// Hypotheses

std::vector<IdText> parse_hypotheses(std::istream &in) {
  std::vector<IdText> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError(line_no, "expected id<TAB>text");
    std::string id = line.substr(0, tab);
    if (!ids.insert(id).second) throw ParseError(line_no, "duplicate hypothesis id '" + id + "'");
    out.emplace_back(std::move(id), line.substr(tab + 1));
  }
  return out;
}

std::vector<IdText> load_hypotheses(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open hypotheses " + path);
  return parse_hypotheses(in);
}

void write_hypotheses(const std::vector<IdText> &hypotheses, std::ostream &out) {
  for (const auto &[id, text] : hypotheses) out << id << '\t' << text << '\n';
  if (!out) throw IoError("failed writing hypotheses");
}

std::vector<std::string> list_emission_files(const std::string &dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("emission directory " + dir + " does not exist");
  std::vector<std::string> files;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
    if (it->is_regular_file() && it->path().extension() == ".emis") files.push_back(it->path().string());
  if (ec) throw IoError("cannot list " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

// ---------------------------------------------------------------------------
// Emissions

EmissionMatrix read_emissions(std::istream &in) {
  unsigned char header[16];
  in.read(reinterpret_cast<char *>(header), sizeof(header));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got >= 4 && std::memcmp(header, kMagic, 4) != 0)
    throw FormatError("bad emission magic: expected \"EMIS\", found \"" + describe_bytes(header, 4) + "\"");
  if (got < sizeof(header))
    throw FormatError("truncated emission header: " + std::to_string(got) + " of 16 bytes");
  const auto version = from_le<std::uint32_t>(header + 4);
  if (version != kEmissionVersion)
    throw FormatError("unsupported emission format version " + std::to_string(version));
  const auto frames = from_le<std::uint32_t>(header + 8);
  const auto vocab = from_le<std::uint32_t>(header + 12);

  const std::uint64_t expected = static_cast<std::uint64_t>(frames) * vocab * sizeof(float);
  auto mismatch = [&](std::uint64_t found) {
    return FormatError("emission size mismatch: header declares " + std::to_string(frames) + "x" +
                       std::to_string(vocab) + " (" + std::to_string(expected) + " payload bytes), found " +
                       std::to_string(found));
  };
  // Check seekable inputs before allocating for a possibly corrupt header.
  if (const auto start = in.tellg(); start != std::streampos(-1)) {
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(start);
    if (end != std::streampos(-1) && static_cast<std::uint64_t>(end - start) != expected)
      throw mismatch(static_cast<std::uint64_t>(end - start));
  }
  std::vector<unsigned char> payload(expected);
  in.read(reinterpret_cast<char *>(payload.data()), static_cast<std::streamsize>(expected));
  const auto read = static_cast<std::uint64_t>(in.gcount());
  std::uint64_t extra = 0;
  if (read == expected) {
    char c;
    while (in.get(c)) ++extra;
  }
  if (read != expected || extra != 0) throw mismatch(read + extra);

  EmissionMatrix m(frames, vocab);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = from_le<float>(payload.data() + 4 * i);
  return m;
}

EmissionMatrix read_emissions(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open emission file " + path);
  try {
    return read_emissions(in);
  } catch (const FormatError &e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_emissions(const EmissionMatrix &matrix, std::ostream &out) {
  if (matrix.frames > 0xFFFFFFFFu || matrix.vocab_size > 0xFFFFFFFFu)
    throw InvalidInput("emission matrix too large for the binary format");
  if (matrix.values.size() != matrix.frames * matrix.vocab_size)
    throw InvalidInput("emission matrix storage does not match its shape");
  unsigned char header[16];
  std::memcpy(header, kMagic, 4);
  to_le<std::uint32_t>(kEmissionVersion, header + 4);
  to_le<std::uint32_t>(static_cast<std::uint32_t>(matrix.frames), header + 8);
  to_le<std::uint32_t>(static_cast<std::uint32_t>(matrix.vocab_size), header + 12);
  out.write(reinterpret_cast<const char *>(header), sizeof(header));
  std::vector<unsigned char> payload(matrix.values.size() * sizeof(float));
  for (std::size_t i = 0; i < matrix.values.size(); ++i) to_le<float>(matrix.values[i], payload.data() + 4 * i);
  out.write(reinterpret_cast<const char *>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("failed writing emissions");
}

void write_emissions(const EmissionMatrix &matrix, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_emissions(matrix, out);
  out.flush();
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace ctcfuse
