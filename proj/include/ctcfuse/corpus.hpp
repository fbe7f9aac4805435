#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctcfuse/ctc_decoder.hpp"
#include "ctcfuse/textnorm.hpp"

namespace ctcfuse {

// JSON-Lines manifest, one object per line:
//   {"id", "audio_path", "duration_seconds", "text", "language": "nb"|"nn",
//    "region"?, "split"?: "train"|"validation"|"test", ...}
// Other keys are carried through untouched.
struct Manifest {
  std::vector<TranscriptRecord> records;
  std::string source_name;
};

Manifest parse_manifest(std::istream &in, std::string source_name = {});
Manifest load_manifest(const std::string &path);
std::string record_to_json(const TranscriptRecord &record);
void write_manifest(const Manifest &manifest, std::ostream &out);
void save_manifest(const Manifest &manifest, const std::string &path);

enum class StatsField { Split, Language, Region };
std::optional<StatsField> parse_stats_field(std::string_view name);
std::string_view to_string(StatsField f);

struct StatsRow {
  std::vector<std::string> key;  // one value per grouping field
  double seconds = 0.0;
  std::uint64_t samples = 0;
  double hours() const { return seconds / 3600.0; }
};

struct DatasetStats {
  std::vector<StatsField> group_by;
  std::vector<StatsRow> rows;  // sorted by key
  StatsRow total;
};

// Missing optional fields group under "unknown".
DatasetStats dataset_stats(const Manifest &manifest, const std::vector<StatsField> &group_by);

// TSV: grouping columns, hours (2 decimals), samples (thousands separators),
// then a "Total" row.
std::string render_stats_tsv(const DatasetStats &stats);

struct LmCorpusSummary {
  std::size_t lines = 0;
  std::size_t words = 0;
  std::vector<std::string> errors;  // unreadable sources; processing continued
};

// Writes one normalized sentence per line: manifest transcripts first, then
// every line of every `.txt` file in each directory (files in name order).
// Text rules (digits, spelled words, empty results) apply; duration does not.
LmCorpusSummary build_lm_corpus(const std::vector<std::string> &manifest_paths,
                                const std::vector<std::string> &text_dirs, const NormalizationConfig &config,
                                std::ostream &target);

// Hypothesis interchange: `id<TAB>text` per line (text may be empty).
using IdText = std::pair<std::string, std::string>;
std::vector<IdText> parse_hypotheses(std::istream &in);
std::vector<IdText> load_hypotheses(const std::string &path);
void write_hypotheses(const std::vector<IdText> &hypotheses, std::ostream &out);

// Files with the `.emis` extension directly inside `dir`, sorted by name.
std::vector<std::string> list_emission_files(const std::string &dir);

// Binary emission format: "EMIS", u32 version (1), u32 T, u32 V, then T*V
// float32 values, all little-endian, row-major.
EmissionMatrix read_emissions(std::istream &in);
EmissionMatrix read_emissions(const std::string &path);
void write_emissions(const EmissionMatrix &matrix, std::ostream &out);
void write_emissions(const EmissionMatrix &matrix, const std::string &path);

}  // namespace ctcfuse
