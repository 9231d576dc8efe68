// Command-line surface for the annotated-data-generation pipeline. One
// subcommand per stage plus run-pipeline; artifacts are line-oriented files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "linguist/augment.hpp"
#include "linguist/corpus.hpp"
#include "linguist/digest.hpp"
#include "linguist/filters.hpp"
#include "linguist/generation.hpp"
#include "linguist/metrics.hpp"
#include "linguist/pipeline.hpp"
#include "linguist/prompt.hpp"

namespace fs = std::filesystem;
using namespace linguist;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitStageFailure = 2;
constexpr int kExitBackendUnreachable = 3;

Corpus load_by_format(const std::string& path, const std::string& format) {
  const auto parsed = corpus_format_from_string(format);
  if (!parsed) throw ConfigError("unknown corpus format: " + format);
  return load_corpus(path, *parsed);
}

std::vector<LinguistPrompt> parse_prompt_file(const std::string& path) {
  std::vector<LinguistPrompt> prompts;
  std::size_t line_no = 0;
  for (const std::string& line : load_prompt_lines(path)) {
    ++line_no;
    const PromptParse parsed = parse_prompt(line);
    if (!parsed.ok) {
      throw std::runtime_error("prompt line " + std::to_string(line_no) + ": " +
                               to_string(parsed.code) + " at byte " +
                               std::to_string(parsed.byte_offset) + ": " + parsed.message);
    }
    prompts.push_back(parsed.prompt);
  }
  return prompts;
}

int cmd_ingest(const std::string& corpus_path, const std::string& format,
               const std::string& out) {
  const Corpus corpus = load_by_format(corpus_path, format);
  save_corpus_jsonl(corpus, out);
  std::cout << "ingested " << corpus.size() << " rows across " << corpus.intents().size()
            << " intents -> " << out << "\n";
  return kExitOk;
}

int cmd_split_nifs(const std::string& corpus_path, const std::string& format,
                   const std::string& intent, std::size_t k, std::uint64_t seed,
                   const std::string& row_ids_path, const std::string& out_dir) {
  const Corpus corpus = load_by_format(corpus_path, format);
  NifsConfig cfg;
  cfg.target_intent = intent;
  cfg.k_starters = k;
  cfg.seed = seed;
  if (!row_ids_path.empty()) {
    const RowIdFile file = read_row_id_file(row_ids_path);
    verify_row_ids(file, corpus);
    cfg.explicit_row_ids = file.ids;
  }
  const NifsSplit split = nifs_split(corpus, cfg);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_utterances_jsonl(materialize(corpus, split.starter_rows),
                        (dir / "starters.jsonl").string());
  save_utterances_jsonl(materialize(corpus, split.remainder_rows),
                        (dir / "remainder.jsonl").string());
  save_utterances_jsonl(materialize(corpus, split.other_rows), (dir / "others.jsonl").string());
  write_row_id_file((dir / "row_ids.txt").string(), split.starter_rows, corpus);
  std::cout << "starters " << split.starter_rows.size() << ", remainder "
            << split.remainder_rows.size() << ", others " << split.other_rows.size() << " -> "
            << out_dir << "\n";
  return kExitOk;
}

int cmd_build_pairs(const std::string& corpus_path, const std::string& format,
                    std::uint64_t seed, double dropout, double geom_p, int max_examples,
                    const std::string& out) {
  const Corpus corpus = load_by_format(corpus_path, format);
  FormatConfig cfg;
  cfg.rng_seed = seed;
  cfg.label_dropout_rate = dropout;
  cfg.wildcard_geom_p = geom_p;
  cfg.max_examples = max_examples;
  if (auto violation = format_config_violation(cfg)) throw ConfigError(*violation);
  const std::vector<TrainingPair> pairs = build_training_pairs(corpus, cfg);
  write_training_pairs_jsonl(pairs, seed, out);
  std::cout << "wrote " << pairs.size() << " training pairs -> " << out << "\n";
  return kExitOk;
}

int cmd_build_prompts(const std::string& starters_path, const std::string& strategy,
                      const std::string& language, const std::string& translations_path,
                      const std::string& out) {
  const std::vector<AnnotatedUtterance> starters = load_utterances_jsonl(starters_path);
  const auto parsed_strategy = strategy_from_string(strategy);
  if (!parsed_strategy) throw ConfigError("unknown prompt strategy: " + strategy);
  std::optional<std::string> target_language;
  if (!language.empty()) target_language = language;
  TranslationTable table;
  const TranslationTable* table_ptr = nullptr;
  if (!translations_path.empty()) {
    table = load_translation_table(translations_path);
    table_ptr = &table;
  }
  const std::vector<LinguistPrompt> prompts =
      build_inference_prompts(starters, *parsed_strategy, target_language, table_ptr);
  std::vector<std::string> lines;
  lines.reserve(prompts.size());
  for (const LinguistPrompt& p : prompts) lines.push_back(render_prompt(p));
  save_prompt_lines(lines, out);
  std::cout << "wrote " << prompts.size() << " prompts -> " << out << "\n";
  return kExitOk;
}

int cmd_generate(const std::string& prompts_path, const BackendSettings& settings,
                 const SamplingParams& params, std::uint64_t seed, const std::string& out) {
  const std::vector<std::string> prompts = load_prompt_lines(prompts_path);
  const std::unique_ptr<GenerationBackend> backend = make_backend(settings, seed);
  const GenerationRun run = generate(prompts, params, *backend, settings.max_in_flight);
  save_outputs_jsonl(run, out);
  std::cout << "generated " << run.outputs.size() << " outputs for " << prompts.size()
            << " prompts -> " << out << "\n";
  return kExitOk;
}

int cmd_parse(const std::string& outputs_path, const std::string& prompts_path,
              const std::string& out) {
  const std::vector<LinguistPrompt> prompts = parse_prompt_file(prompts_path);
  const GenerationRun run = load_outputs_jsonl(outputs_path);
  std::ofstream out_file(out);
  if (!out_file) throw std::runtime_error("cannot write parse results: " + out);
  std::size_t ok_count = 0;
  for (const GenerationOutput& o : run.outputs) {
    if (o.prompt_index < 0 || static_cast<std::size_t>(o.prompt_index) >= prompts.size()) {
      throw std::runtime_error("output prompt_index " + std::to_string(o.prompt_index) +
                               " out of range");
    }
    const LinguistPrompt& prompt = prompts[static_cast<std::size_t>(o.prompt_index)];
    const BracketParse parsed = bracket_to_spans(o.text, prompt.labels);
    nlohmann::json record;
    record["prompt_index"] = o.prompt_index;
    record["text"] = o.text;
    record["ok"] = parsed.ok;
    if (parsed.ok) {
      ++ok_count;
      AnnotatedUtterance utt = parsed.utterance;
      utt.intent = prompt.intent;
      utt.language = prompt.language;
      utt.domain = prompt.domain;
      utt.provenance = Provenance::Generated;
      record["utterance"] = nlohmann::json::parse(utterance_to_json_line(utt));
    } else {
      record["reason"] = to_string(parsed.code);
      record["message"] = parsed.message;
    }
    out_file << record.dump() << '\n';
  }
  std::cout << ok_count << "/" << run.outputs.size() << " outputs parsed -> " << out << "\n";
  return kExitOk;
}

int cmd_filter(const std::string& outputs_path, const std::string& prompts_path,
               const FilterSettings& settings, const std::string& classifier_train_path,
               const std::string& out_kept, const std::string& out_report) {
  const std::vector<LinguistPrompt> prompts = parse_prompt_file(prompts_path);
  const GenerationRun run = load_outputs_jsonl(outputs_path);
  CentroidIntentClassifier classifier;
  if (settings.ic) {
    if (classifier_train_path.empty()) {
      throw ConfigError("--classifier-train is required when the intent filter is on");
    }
    classifier.fit(load_utterances_jsonl(classifier_train_path));
  }
  const CascadeResult cascade =
      filter_cascade(prompts, run.outputs, settings, settings.ic ? &classifier : nullptr,
                     nullptr, nullptr);
  save_utterances_jsonl(cascade.kept, out_kept);
  if (!out_report.empty()) {
    std::ofstream report(out_report);
    report << cascade.report.to_table();
  }
  std::cout << "kept " << cascade.kept.size() << "/" << run.outputs.size() << " outputs -> "
            << out_kept << "\n";
  return kExitOk;
}

int cmd_balance(const std::string& kept_path, const std::string& source_path,
                const std::string& targets_path, const std::string& out) {
  std::map<std::string, std::vector<AnnotatedUtterance>> kept;
  for (const AnnotatedUtterance& u : load_utterances_jsonl(kept_path)) {
    kept[u.intent].push_back(u);
  }
  std::map<std::string, std::vector<AnnotatedUtterance>> source;
  for (const AnnotatedUtterance& u : load_utterances_jsonl(source_path)) {
    source[u.intent].push_back(u);
  }
  std::ifstream targets_file(targets_path);
  if (!targets_file) throw ConfigError("cannot open targets file: " + targets_path);
  const nlohmann::json targets_json = nlohmann::json::parse(targets_file);
  std::map<std::string, std::size_t> targets;
  for (const auto& [intent, count] : targets_json.items()) {
    targets[intent] = count.get<std::size_t>();
  }
  const BalanceResult balanced = balance_classes(kept, source, targets);
  save_utterances_jsonl(balanced.dataset, out);
  std::size_t copied = 0;
  for (const auto& [intent, count] : balanced.copied_per_intent) {
    (void)intent;
    copied += count;
  }
  std::cout << "balanced dataset: " << balanced.dataset.size() << " rows (" << copied
            << " copied) -> " << out << "\n";
  return kExitOk;
}

int cmd_mix(const std::string& starters_path, const std::string& generated_path, double weight,
            std::size_t target_size, std::uint64_t seed, const std::string& out) {
  const std::vector<AnnotatedUtterance> starters = load_utterances_jsonl(starters_path);
  std::vector<AnnotatedUtterance> generated;
  if (!generated_path.empty()) generated = load_utterances_jsonl(generated_path);
  MixSpec spec;
  spec.starter_weight = weight;
  spec.target_size = target_size;
  Rng rng(seed);
  const std::vector<AnnotatedUtterance> mixed = upsample_mix(starters, generated, spec, rng);
  save_utterances_jsonl(mixed, out);
  std::cout << "mixed " << mixed.size() << " rows -> " << out << "\n";
  return kExitOk;
}

int cmd_resample_catalog(const std::string& corpus_path, const std::string& catalogs_path,
                         std::size_t n, std::uint64_t seed, const std::string& out) {
  const std::vector<AnnotatedUtterance> rows = load_utterances_jsonl(corpus_path);
  const SlotCatalog catalog = load_slot_catalog(catalogs_path);
  Rng rng(seed);
  const std::vector<AnnotatedUtterance> resampled = catalog_resample(rows, catalog, n, rng);
  save_utterances_jsonl(resampled, out);
  std::cout << "resampled " << resampled.size() << " rows -> " << out << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& predictions_path, const std::string& target_intent,
                 const std::string& out) {
  const std::vector<PredictionPair> pairs = load_prediction_pairs_jsonl(predictions_path);
  std::optional<std::string> target;
  if (!target_intent.empty()) target = target_intent;
  const EvalReport report = eval_report(pairs, target);
  if (!out.empty()) {
    std::ofstream json_out(out);
    json_out << report.to_json_string() << '\n';
  }
  std::cout << report.to_text();
  return kExitOk;
}

int cmd_report(const std::string& dir) {
  const std::vector<std::string> problems = verify_manifest_chain(dir);
  for (const StageManifest& m : load_manifests(dir)) {
    std::cout << m.stage << ":";
    for (const auto& [name, count] : m.counts) std::cout << " " << name << "=" << count;
    std::cout << "\n";
  }
  if (!problems.empty()) {
    for (const std::string& p : problems) std::cerr << "chain problem: " << p << "\n";
    return kExitStageFailure;
  }
  std::cout << "manifest chain verified (" << load_manifests(dir).size() << " stages)\n";
  const fs::path report_path = fs::path(dir) / "06_report.txt";
  if (fs::exists(report_path)) {
    std::ifstream in(report_path);
    std::cout << in.rdbuf();
  }
  return kExitOk;
}

int cmd_run_pipeline(RunConfig cfg) {
  const PipelineResult result = run_pipeline(cfg);
  std::cout << result.report.to_text();
  std::cout << "artifacts under " << cfg.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LINGUIST-style annotated-data-generation toolkit"};
  app.require_subcommand(1);

  std::string corpus_path;
  std::string corpus_format = "jsonl";
  std::string out_path;
  std::string out_dir;
  std::string intent;
  std::string row_ids_path;
  std::string strategy = "copy-all";
  std::string language;
  std::string translations_path;
  std::string prompts_path;
  std::string outputs_path;
  std::string classifier_train_path;
  std::string report_path;
  std::string kept_path;
  std::string source_path;
  std::string targets_path;
  std::string generated_path;
  std::string catalogs_path;
  std::string predictions_path;
  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t k_starters = 10;
  std::size_t n_per_utterance = 1;
  std::size_t target_size = 1;
  double dropout = 0.2;
  double geom_p = 0.5;
  double weight = 0.5;
  int max_examples = 10;
  BackendSettings backend;
  SamplingParams sampling;
  FilterSettings filters;

  auto* ingest = app.add_subcommand("ingest", "Load a corpus and write canonical JSONL");
  ingest->add_option("--corpus", corpus_path, "Input corpus file")->required();
  ingest->add_option("--format", corpus_format, "jsonl or snips-json");
  ingest->add_option("--out", out_path, "Output JSONL path")->required();

  auto* split = app.add_subcommand("split-nifs", "New-intent few-shot split");
  split->add_option("--corpus", corpus_path)->required();
  split->add_option("--format", corpus_format);
  split->add_option("--intent", intent, "Target intent")->required();
  split->add_option("--k", k_starters, "Starter count");
  split->add_option("--seed", seed);
  split->add_option("--row-ids", row_ids_path, "Explicit 0-based row-ID file");
  split->add_option("--out-dir", out_dir)->required();

  auto* pairs = app.add_subcommand("build-pairs", "Training pairs for fine-tuning");
  pairs->add_option("--corpus", corpus_path)->required();
  pairs->add_option("--format", corpus_format);
  pairs->add_option("--seed", seed);
  pairs->add_option("--dropout", dropout, "Label-name dropout rate");
  pairs->add_option("--geom-p", geom_p, "Wildcard geometric parameter");
  pairs->add_option("--max-examples", max_examples);
  pairs->add_option("--out", out_path)->required();

  auto* build_prompts = app.add_subcommand("build-prompts", "Inference prompts from starters");
  build_prompts->add_option("--starters", corpus_path, "Starter utterances JSONL")->required();
  build_prompts->add_option("--strategy", strategy, "copy-all, sample-each, or lno");
  build_prompts->add_option("--language", language, "Cross-lingual target language");
  build_prompts->add_option("--translations", translations_path,
                            "Translated slot values JSON");
  build_prompts->add_option("--out", out_path)->required();

  auto* gen = app.add_subcommand("generate", "Run a generation backend over prompts");
  gen->add_option("--prompts", prompts_path)->required();
  gen->add_option("--backend", backend.kind, "mock or http");
  gen->add_option("--endpoint", backend.endpoint);
  gen->add_option("--auth-token", backend.auth_token);
  gen->add_option("--timeout-ms", backend.timeout_ms);
  gen->add_option("--retries", backend.retries);
  gen->add_option("--max-in-flight", backend.max_in_flight);
  gen->add_option("--corruption", backend.corruption, "Mock defect probability");
  gen->add_option("--defect", backend.defect, "Mock defect class");
  gen->add_option("--top-k", sampling.top_k);
  gen->add_option("--temperature", sampling.temperature);
  gen->add_option("--num-outputs", sampling.num_outputs);
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_path)->required();

  auto* parse = app.add_subcommand("parse", "Parse generated outputs into utterances");
  parse->add_option("--outputs", outputs_path)->required();
  parse->add_option("--prompts", prompts_path)->required();
  parse->add_option("--out", out_path)->required();

  auto* filter = app.add_subcommand("filter", "Reason-coded filter cascade");
  filter->add_option("--outputs", outputs_path)->required();
  filter->add_option("--prompts", prompts_path)->required();
  filter->add_flag("!--no-valid", filters.valid, "Disable the valid filter");
  filter->add_flag("!--no-heuristic", filters.heuristic, "Disable heuristic checks");
  filter->add_flag("!--no-dedup", filters.dedup, "Disable de-duplication");
  filter->add_option("--block", filters.ngram_blocklist, "Blocked phrase (repeatable)");
  filter->add_flag("--select-lowest-perplexity", filters.select_lowest_perplexity);
  filter->add_flag("!--no-ic", filters.ic, "Disable the intent filter");
  filter->add_option("--classifier-train", classifier_train_path,
                     "JSONL training data for the intent filter");
  filter->add_option("--out-kept", kept_path)->required();
  filter->add_option("--report", report_path, "Pass-rate table path");

  auto* balance = app.add_subcommand("balance", "Restore per-intent class distribution");
  balance->add_option("--kept", kept_path)->required();
  balance->add_option("--source", source_path)->required();
  balance->add_option("--targets", targets_path, "JSON object intent -> count")->required();
  balance->add_option("--out", out_path)->required();

  auto* mix = app.add_subcommand("mix", "Up-sample starters and mix with generated data");
  mix->add_option("--starters", source_path)->required();
  mix->add_option("--generated", generated_path);
  mix->add_option("--weight", weight, "Starter weight");
  mix->add_option("--target-size", target_size)->required();
  mix->add_option("--seed", seed);
  mix->add_option("--out", out_path)->required();

  auto* resample = app.add_subcommand("resample-catalog", "Slot-catalog resampling baseline");
  resample->add_option("--corpus", corpus_path, "Utterances JSONL")->required();
  resample->add_option("--catalogs", catalogs_path, "JSON label -> values")->required();
  resample->add_option("--n", n_per_utterance, "Variants per utterance");
  resample->add_option("--seed", seed);
  resample->add_option("--out", out_path)->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score reference/hypothesis pairs");
  evaluate->add_option("--predictions", predictions_path)->required();
  evaluate->add_option("--target-intent", intent);
  evaluate->add_option("--out", out_path, "Report JSON path");

  auto* report = app.add_subcommand("report", "Verify manifests and print the run report");
  report->add_option("--dir", out_dir)->required();

  auto* run = app.add_subcommand("run-pipeline", "Execute every stage end to end");
  run->add_option("--config", config_path, "JSON run config")->required();
  run->add_option("--corpus", corpus_path, "Override corpus path");
  run->add_option("--out-dir", out_dir, "Override output dir");
  run->add_option("--intent", intent, "Override target intent");
  std::int64_t seed_override = -1;
  run->add_option("--seed", seed_override, "Override seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(corpus_path, corpus_format, out_path);
    if (split->parsed()) {
      return cmd_split_nifs(corpus_path, corpus_format, intent, k_starters, seed, row_ids_path,
                            out_dir);
    }
    if (pairs->parsed()) {
      return cmd_build_pairs(corpus_path, corpus_format, seed, dropout, geom_p, max_examples,
                             out_path);
    }
    if (build_prompts->parsed()) {
      return cmd_build_prompts(corpus_path, strategy, language, translations_path, out_path);
    }
    if (gen->parsed()) return cmd_generate(prompts_path, backend, sampling, seed, out_path);
    if (parse->parsed()) return cmd_parse(outputs_path, prompts_path, out_path);
    if (filter->parsed()) {
      return cmd_filter(outputs_path, prompts_path, filters, classifier_train_path, kept_path,
                        report_path);
    }
    if (balance->parsed()) return cmd_balance(kept_path, source_path, targets_path, out_path);
    if (mix->parsed()) {
      return cmd_mix(source_path, generated_path, weight, target_size, seed, out_path);
    }
    if (resample->parsed()) {
      return cmd_resample_catalog(corpus_path, catalogs_path, n_per_utterance, seed, out_path);
    }
    if (evaluate->parsed()) return cmd_evaluate(predictions_path, intent, out_path);
    if (report->parsed()) return cmd_report(out_dir);
    if (run->parsed()) {
      RunConfig cfg = load_run_config(config_path);
      if (!corpus_path.empty()) cfg.corpus_path = corpus_path;
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (!intent.empty()) cfg.target_intent = intent;
      if (seed_override >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed_override);
        cfg.format.rng_seed = cfg.seed;
      }
      return cmd_run_pipeline(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const BackendError& e) {
    if (e.kind() == BackendError::Kind::Transport) {
      std::cerr << "backend unreachable: " << e.what() << "\n";
      return kExitBackendUnreachable;
    }
    std::cerr << "backend protocol error: " << e.what() << "\n";
    return kExitStageFailure;
  } catch (const StageError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "completed stages:";
    for (const std::string& s : e.completed_stages()) std::cerr << " " << s;
    std::cerr << "\n";
    return kExitStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageFailure;
  }
  return kExitValidation;
}
