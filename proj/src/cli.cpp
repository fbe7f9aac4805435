#include "ctcfuse/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "ctcfuse/corpus.hpp"
#include "ctcfuse/ctc_decoder.hpp"
#include "ctcfuse/error.hpp"
#include "ctcfuse/metrics.hpp"
#include "ctcfuse/ngram_lm.hpp"
#include "ctcfuse/parallel.hpp"
#include "ctcfuse/textnorm.hpp"
#include "ctcfuse/tuner.hpp"

namespace ctcfuse {

namespace {

struct Options {
  // shared
  unsigned jobs = 0;
  std::string config_path;
  std::string hesitation;

  // normalize
  std::string manifest;
  std::string out;
  std::string drops;

  // train-lm
  std::string corpus;
  std::vector<std::string> lm_manifests;
  std::vector<std::string> text_dirs;
  std::string corpus_out;
  int order = 5;
  double discount = -1.0;

  // decode / tune
  std::string emissions;
  std::string vocab;
  std::string lm;
  double alpha = 0.5;
  double beta = 0.001;
  std::size_t beam_width = 100;
  double prune_floor = 0.0;
  bool no_eos = false;
  std::string alpha_grid;
  std::string beta_grid;

  // evaluate / stats
  std::string refs;
  std::string hyps;
  std::string group_by;
  bool json = false;
};

unsigned resolve_jobs(unsigned requested) { return requested > 0 ? requested : default_jobs(); }

NormalizationConfig resolve_config(const Options &o) {
  NormalizationConfig config = o.config_path.empty() ? NormalizationConfig{} : load_normalization_config(o.config_path);
  if (!o.hesitation.empty()) {
    auto s = parse_hesitation_strategy(o.hesitation);
    if (!s) throw InvalidInput("--hesitation must be triple, single or shared");
    config.hesitation_strategy = *s;
  }
  config.validate();
  return config;
}

class OutputFile {
 public:
  // Empty path or "-" writes to `fallback`.
  OutputFile(const std::string &path, std::ostream &fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot open " + path + " for writing");
      stream_ = &file_;
    }
  }
  std::ostream &stream() { return *stream_; }
  void close(const std::string &path) {
    stream_->flush();
    if (!*stream_) throw IoError("failed writing " + (path.empty() ? std::string("output") : path));
  }

 private:
  std::ofstream file_;
  std::ostream *stream_;
};

DecoderParams decoder_params(const Options &o, const CLI::App &sub) {
  DecoderParams p;
  p.alpha = o.alpha;
  p.beta = o.beta;
  p.beam_width = o.beam_width;
  p.score_eos = !o.no_eos;
  if (sub.count("--prune-floor")) p.prune_log_floor = o.prune_floor;
  if (p.alpha < 0) throw InvalidInput("--alpha must be non-negative");
  if (p.beam_width < 1) throw InvalidInput("--beam-width must be at least 1");
  return p;
}

int cmd_normalize(const Options &o, std::ostream &out, std::ostream &err) {
  const NormalizationConfig config = resolve_config(o);
  const Manifest manifest = load_manifest(o.manifest);
  const NormalizedCorpus result = normalize_corpus(manifest.records, config, resolve_jobs(o.jobs));

  OutputFile cleaned(o.out, out);
  write_manifest({result.kept, manifest.source_name}, cleaned.stream());
  cleaned.close(o.out);

  const std::string drops_path = !o.drops.empty() ? o.drops : (o.out.empty() || o.out == "-" ? "" : o.out + ".drops.tsv");
  if (!drops_path.empty()) {
    OutputFile drops(drops_path, out);
    drops.stream() << "id\treason\n";
    for (const auto &[id, reason] : result.dropped) drops.stream() << id << '\t' << to_string(reason) << '\n';
    drops.close(drops_path);
  }
  err << "kept " << result.kept.size() << ", dropped " << result.dropped.size() << " of " << manifest.records.size()
      << " records\n";
  return kExitOk;
}

std::vector<std::vector<std::string>> read_sentences(std::istream &in) {
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) {
    auto words = split_words(line);
    if (!words.empty()) sentences.push_back(std::move(words));
  }
  return sentences;
}

int cmd_train_lm(const Options &o, std::ostream &out, std::ostream &err) {
  std::vector<std::vector<std::string>> sentences;
  if (!o.corpus.empty()) {
    if (!o.lm_manifests.empty() || !o.text_dirs.empty())
      throw InvalidInput("use either --corpus or --manifest/--text-dir, not both");
    std::ifstream in(o.corpus, std::ios::binary);
    if (!in) throw IoError("cannot open corpus " + o.corpus);
    sentences = read_sentences(in);
  } else {
    if (o.lm_manifests.empty() && o.text_dirs.empty())
      throw InvalidInput("train-lm needs --corpus, --manifest or --text-dir");
    std::stringstream buffer;
    const LmCorpusSummary summary = build_lm_corpus(o.lm_manifests, o.text_dirs, resolve_config(o), buffer);
    for (const auto &e : summary.errors) err << "warning: " << e << '\n';
    err << "LM corpus: " << summary.lines << " lines, " << summary.words << " words\n";
    if (!o.corpus_out.empty()) {
      OutputFile corpus(o.corpus_out, out);
      corpus.stream() << buffer.str();
      corpus.close(o.corpus_out);
    }
    buffer.seekg(0);
    sentences = read_sentences(buffer);
  }
  if (sentences.empty()) throw InvalidInput("the LM corpus contains no sentences");

  const NgramCounts counts = count_ngrams(sentences, o.order);
  const DiscountSpec discount = o.discount >= 0 ? DiscountSpec::fixed_value(o.discount) : DiscountSpec::estimated();
  const ArpaModel model = estimate_kneser_ney(counts, discount);
  OutputFile file(o.out, out);
  write_arpa(model, file.stream());
  file.close(o.out);
  err << "wrote order-" << o.order << " model:";
  for (int n = 1; n <= model.max_order(); ++n) err << ' ' << n << "-grams=" << model.size(n);
  err << '\n';
  return kExitOk;
}

std::optional<ArpaModel> maybe_load_lm(const std::string &path) {
  if (path.empty()) return std::nullopt;
  return parse_arpa_file(path);
}

int cmd_decode(const Options &o, const CLI::App &sub, std::ostream &out, std::ostream &err) {
  const Vocabulary vocab = load_vocabulary(o.vocab);
  const std::optional<ArpaModel> lm = maybe_load_lm(o.lm);
  const DecoderParams params = decoder_params(o, sub);
  const auto files = list_emission_files(o.emissions);

  const auto results = batch_decode(files, vocab, lm ? &*lm : nullptr, params, resolve_jobs(o.jobs));
  std::vector<IdText> hyps;
  std::size_t failures = 0;
  for (const auto &r : results) {
    if (r.text) {
      hyps.emplace_back(r.id, *r.text);
    } else {
      ++failures;
      err << "error: " << r.id << ": " << r.error << '\n';
    }
  }
  OutputFile file(o.out, out);
  write_hypotheses(hyps, file.stream());
  file.close(o.out);
  err << "decoded " << hyps.size() << " of " << results.size() << " utterances\n";
  return failures ? kExitData : kExitOk;
}

int cmd_evaluate(const Options &o, std::ostream &out, std::ostream &) {
  const NormalizationConfig config = resolve_config(o);
  const Manifest refs = load_manifest(o.refs);
  const auto hyps = load_hypotheses(o.hyps);
  const EvalReport report = evaluate(refs.records, hyps, o.group_by, config, resolve_jobs(o.jobs));
  OutputFile file(o.out, out);
  file.stream() << (o.json ? render_report_json(report) : render_report_tsv(report));
  file.close(o.out);
  return kExitOk;
}

int cmd_tune(const Options &o, const CLI::App &sub, std::ostream &out, std::ostream &err) {
  const NormalizationConfig config = resolve_config(o);
  const Vocabulary vocab = load_vocabulary(o.vocab);
  const ArpaModel lm = parse_arpa_file(o.lm);
  const Manifest refs = load_manifest(o.refs);
  DecoderParams base = decoder_params(o, sub);

  GridSpec grid = GridSpec::standard();
  if (!o.alpha_grid.empty()) grid.alpha_values = parse_grid_values(o.alpha_grid);
  if (!o.beta_grid.empty()) grid.beta_values = parse_grid_values(o.beta_grid);

  std::map<std::string, std::string> emission_by_id;
  for (const auto &f : list_emission_files(o.emissions))
    emission_by_id[std::filesystem::path(f).stem().string()] = f;
  std::vector<ValidationUtterance> validation;
  for (const auto &r : refs.records) {
    auto it = emission_by_id.find(r.id);
    if (it == emission_by_id.end()) throw InvalidInput("no emission file for reference id '" + r.id + "'");
    EmissionMatrix m = read_emissions(it->second);
    m.check_normalized();
    validation.push_back({r.id, std::move(m), r.text});
  }

  const GridSearchResult result = grid_search(validation, vocab, lm, grid, base, config, resolve_jobs(o.jobs));
  OutputFile file(o.out, out);
  file.stream() << emit_grid_report(result);
  file.close(o.out);
  err << "best alpha=" << result.best_alpha << " beta=" << result.best_beta << " wer=" << result.best_wer << "%\n";
  return kExitOk;
}

int cmd_stats(const Options &o, std::ostream &out) {
  const Manifest manifest = load_manifest(o.manifest);
  std::vector<StatsField> fields;
  if (!o.group_by.empty()) {
    std::stringstream ss(o.group_by);
    std::string name;
    while (std::getline(ss, name, ',')) {
      auto f = parse_stats_field(name);
      if (!f) throw InvalidInput("unknown stats field '" + name + "'; use split, language or region");
      fields.push_back(*f);
    }
  }
  OutputFile file(o.out, out);
  file.stream() << render_stats_tsv(dataset_stats(manifest, fields));
  file.close(o.out);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Options o;
  CLI::App app{"CTC decoding with n-gram shallow fusion, LM training and ASR evaluation", "ctcfuse"};
  app.require_subcommand(1);

  auto jobs = [&](CLI::App *sub) {
    sub->add_option("--jobs", o.jobs, "Worker threads (default: $CTC_FUSE_JOBS or all cores)")->check(CLI::PositiveNumber);
  };
  auto norm_flags = [&](CLI::App *sub) {
    sub->add_option("--config", o.config_path, "Normalization config file (key = value)");
    sub->add_option("--hesitation", o.hesitation, "Hesitation rewrite: triple, single or shared")
        ->check(CLI::IsMember({"triple", "single", "shared"}));
  };
  auto decoder_flags = [&](CLI::App *sub) {
    sub->add_option("--vocab", o.vocab, "Vocabulary file, one token per line")->required();
    sub->add_option("--beam-width", o.beam_width, "Beam width")->capture_default_str();
    sub->add_option("--prune-floor", o.prune_floor, "Skip tokens whose frame log-probability is below this");
    sub->add_flag("--no-eos", o.no_eos, "Do not score </s> at the end of an utterance");
  };

  CLI::App *normalize = app.add_subcommand("normalize", "Clean a manifest and report dropped records");
  normalize->add_option("--manifest", o.manifest, "Input manifest (JSON Lines)")->required();
  normalize->add_option("--out", o.out, "Cleaned manifest (default: stdout)");
  normalize->add_option("--drops", o.drops, "Drop report TSV (default: <out>.drops.tsv)");
  norm_flags(normalize);
  jobs(normalize);

  CLI::App *train = app.add_subcommand("train-lm", "Estimate a Kneser-Ney n-gram model and write ARPA");
  train->add_option("--corpus", o.corpus, "Normalized text, one sentence per line");
  train->add_option("--manifest", o.lm_manifests, "Manifests whose transcripts join the LM corpus");
  train->add_option("--text-dir", o.text_dirs, "Directories of extra .txt files for the LM corpus");
  train->add_option("--corpus-out", o.corpus_out, "Also write the assembled LM corpus here");
  train->add_option("--order", o.order, "N-gram order")->check(CLI::Range(1, kMaxOrder))->capture_default_str();
  train->add_option("--discount", o.discount, "Fixed discount in [0, 1] (default: estimated per order)")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--out", o.out, "ARPA output (default: stdout)");
  norm_flags(train);

  CLI::App *decode = app.add_subcommand("decode", "Decode a directory of .emis emission files");
  decode->add_option("--emissions", o.emissions, "Directory of .emis files")->required();
  decode->add_option("--lm", o.lm, "ARPA language model for shallow fusion");
  decode->add_option("--alpha", o.alpha, "LM weight")->capture_default_str();
  decode->add_option("--beta", o.beta, "Per-word bonus")->capture_default_str();
  decode->add_option("--out", o.out, "Hypothesis TSV (default: stdout)");
  decoder_flags(decode);
  jobs(decode);

  CLI::App *eval = app.add_subcommand("evaluate", "Score hypotheses against a reference manifest");
  eval->add_option("--refs", o.refs, "Reference manifest")->required();
  eval->add_option("--hyps", o.hyps, "Hypothesis TSV (id<TAB>text)")->required();
  eval->add_option("--group-by", o.group_by, "language, region or split")
      ->check(CLI::IsMember({"language", "region", "split"}));
  eval->add_flag("--json", o.json, "Print JSON instead of TSV");
  eval->add_option("--out", o.out, "Report file (default: stdout)");
  norm_flags(eval);
  jobs(eval);

  CLI::App *tune = app.add_subcommand("tune", "Grid-search alpha and beta on a validation set");
  tune->add_option("--emissions", o.emissions, "Directory of .emis files named <id>.emis")->required();
  tune->add_option("--refs", o.refs, "Reference manifest")->required();
  tune->add_option("--lm", o.lm, "ARPA language model")->required();
  tune->add_option("--alpha-grid", o.alpha_grid, "Comma-separated alpha values");
  tune->add_option("--beta-grid", o.beta_grid, "Comma-separated beta values");
  tune->add_option("--out", o.out, "Grid report TSV (default: stdout)");
  decoder_flags(tune);
  norm_flags(tune);
  jobs(tune);

  CLI::App *stats = app.add_subcommand("stats", "Hours and sample counts of a manifest");
  stats->add_option("--manifest", o.manifest, "Manifest (JSON Lines)")->required();
  stats->add_option("--group-by", o.group_by, "Comma-separated subset of split, language, region");
  stats->add_option("--out", o.out, "Output file (default: stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    if (!args.empty()) err << "error: " << e.what() << '\n';
    err << app.help();
    return kExitUsage;
  }

  try {
    if (normalize->parsed()) return cmd_normalize(o, out, err);
    if (train->parsed()) return cmd_train_lm(o, out, err);
    if (decode->parsed()) return cmd_decode(o, *decode, out, err);
    if (eval->parsed()) return cmd_evaluate(o, out, err);
    if (tune->parsed()) return cmd_tune(o, *tune, out, err);
    if (stats->parsed()) return cmd_stats(o, out);
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace ctcfuse
