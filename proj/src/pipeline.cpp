#include "linguist/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "linguist/digest.hpp"

namespace fs = std::filesystem;

namespace linguist {

namespace {

void expect_keys(const nlohmann::json& j, const std::string& where,
                 const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

}  // namespace

RunConfig run_config_from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  expect_keys(j, "config",
              {"seed", "corpus", "out_dir", "nifs", "prompts", "sampling", "backend",
               "filters", "mix", "format"});
  RunConfig cfg;
  read_into(j, "seed", cfg.seed);
  read_into(j, "out_dir", cfg.out_dir);
  if (j.contains("corpus")) {
    expect_keys(j["corpus"], "corpus", {"path", "format"});
    read_into(j["corpus"], "path", cfg.corpus_path);
    read_into(j["corpus"], "format", cfg.corpus_format);
  }
  if (j.contains("nifs")) {
    expect_keys(j["nifs"], "nifs", {"target_intent", "k_starters", "row_ids_path"});
    read_into(j["nifs"], "target_intent", cfg.target_intent);
    read_into(j["nifs"], "k_starters", cfg.k_starters);
    read_into(j["nifs"], "row_ids_path", cfg.row_ids_path);
  }
  if (j.contains("prompts")) {
    expect_keys(j["prompts"], "prompts", {"strategy", "target_language", "translations_path"});
    read_into(j["prompts"], "strategy", cfg.strategy);
    read_into(j["prompts"], "target_language", cfg.target_language);
    read_into(j["prompts"], "translations_path", cfg.translations_path);
  }
  if (j.contains("sampling")) {
    expect_keys(j["sampling"], "sampling", {"top_k", "temperature", "num_outputs", "hard_cap"});
    read_into(j["sampling"], "top_k", cfg.sampling.top_k);
    read_into(j["sampling"], "temperature", cfg.sampling.temperature);
    read_into(j["sampling"], "num_outputs", cfg.sampling.num_outputs);
    read_into(j["sampling"], "hard_cap", cfg.sampling.hard_cap);
  }
  if (j.contains("backend")) {
    expect_keys(j["backend"], "backend",
                {"kind", "endpoint", "auth_token", "timeout_ms", "retries", "retry_base_ms",
                 "max_in_flight", "corruption", "defect"});
    read_into(j["backend"], "kind", cfg.backend.kind);
    read_into(j["backend"], "endpoint", cfg.backend.endpoint);
    read_into(j["backend"], "auth_token", cfg.backend.auth_token);
    read_into(j["backend"], "timeout_ms", cfg.backend.timeout_ms);
    read_into(j["backend"], "retries", cfg.backend.retries);
    read_into(j["backend"], "retry_base_ms", cfg.backend.retry_base_ms);
    read_into(j["backend"], "max_in_flight", cfg.backend.max_in_flight);
    read_into(j["backend"], "corruption", cfg.backend.corruption);
    read_into(j["backend"], "defect", cfg.backend.defect);
  }
  if (j.contains("filters")) {
    expect_keys(j["filters"], "filters",
                {"valid", "heuristic", "dedup", "ngram_blocklist", "select_lowest_perplexity",
                 "ic", "balance"});
    read_into(j["filters"], "valid", cfg.filters.valid);
    read_into(j["filters"], "heuristic", cfg.filters.heuristic);
    read_into(j["filters"], "dedup", cfg.filters.dedup);
    read_into(j["filters"], "ngram_blocklist", cfg.filters.ngram_blocklist);
    read_into(j["filters"], "select_lowest_perplexity", cfg.filters.select_lowest_perplexity);
    read_into(j["filters"], "ic", cfg.filters.ic);
    read_into(j["filters"], "balance", cfg.filters.balance);
  }
  if (j.contains("mix")) {
    expect_keys(j["mix"], "mix", {"starter_weight", "target_size"});
    read_into(j["mix"], "starter_weight", cfg.starter_weight);
    read_into(j["mix"], "target_size", cfg.mix_target);
  }
  if (j.contains("format")) {
    expect_keys(j["format"], "format",
                {"label_dropout_rate", "wildcard_geom_p", "max_examples"});
    read_into(j["format"], "label_dropout_rate", cfg.format.label_dropout_rate);
    read_into(j["format"], "wildcard_geom_p", cfg.format.wildcard_geom_p);
    read_into(j["format"], "max_examples", cfg.format.max_examples);
  }
  cfg.format.rng_seed = cfg.seed;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return run_config_from_json_string(text);
}

std::vector<std::string> validate_run_config(const RunConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.corpus_path.empty()) {
    problems.push_back("corpus.path is required");
  } else if (!fs::exists(cfg.corpus_path)) {
    problems.push_back("corpus path does not exist: " + cfg.corpus_path);
  }
  if (!corpus_format_from_string(cfg.corpus_format)) {
    problems.push_back("unknown corpus format: " + cfg.corpus_format);
  }
  if (cfg.out_dir.empty()) problems.push_back("out_dir is required");
  if (cfg.target_intent.empty()) problems.push_back("nifs.target_intent is required");
  if (!cfg.row_ids_path.empty() && !fs::exists(cfg.row_ids_path)) {
    problems.push_back("row-ID file does not exist: " + cfg.row_ids_path);
  }
  if (!strategy_from_string(cfg.strategy)) {
    problems.push_back("unknown prompt strategy: " + cfg.strategy);
  }
  if (!cfg.translations_path.empty() && !fs::exists(cfg.translations_path)) {
    problems.push_back("translations file does not exist: " + cfg.translations_path);
  }
  if (auto violation = sampling_params_violation(cfg.sampling)) {
    problems.push_back("sampling: " + *violation);
  }
  if (cfg.backend.kind != "mock" && cfg.backend.kind != "http") {
    problems.push_back("backend.kind must be mock or http");
  }
  if (cfg.backend.kind == "http" && cfg.backend.endpoint.empty()) {
    problems.push_back("backend.endpoint is required for the http backend");
  }
  if (cfg.backend.kind == "mock" && !mock_defect_from_string(cfg.backend.defect)) {
    problems.push_back("unknown mock defect: " + cfg.backend.defect);
  }
  if (cfg.starter_weight < 0.0 || cfg.starter_weight > 1.0) {
    problems.push_back("mix.starter_weight outside [0,1]");
  }
  if (auto violation = format_config_violation(cfg.format)) {
    problems.push_back("format: " + *violation);
  }
  return problems;
}

std::unique_ptr<GenerationBackend> make_backend(const BackendSettings& settings,
                                                std::uint64_t seed) {
  if (settings.kind == "mock") {
    MockConfig config;
    config.seed = seed;
    config.corruption = settings.corruption;
    const auto defect = mock_defect_from_string(settings.defect);
    if (!defect) throw ConfigError("unknown mock defect: " + settings.defect);
    config.defect = *defect;
    return std::make_unique<MockBackend>(config);
  }
  if (settings.kind == "http") {
    HttpBackendConfig config;
    config.endpoint = settings.endpoint;
    config.auth_token = settings.auth_token;
    config.timeout_ms = settings.timeout_ms;
    config.max_retries = settings.retries;
    config.retry_base_ms = settings.retry_base_ms;
    return std::make_unique<HttpBackend>(config);
  }
  throw ConfigError("unknown backend kind: " + settings.kind);
}

// ---- manifests -----------------------------------------------------------------

void write_manifest(const StageManifest& manifest, const std::string& dir) {
  nlohmann::json j;
  j["stage"] = manifest.stage;
  j["inputs"] = manifest.inputs;
  j["outputs"] = manifest.outputs;
  j["seed"] = manifest.seed;
  j["counts"] = manifest.counts;
  const fs::path path = fs::path(dir) / ("manifest_" + manifest.stage + ".json");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<StageManifest> load_manifests(const std::string& dir) {
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("manifest_", 0) == 0 && entry.path().extension() == ".json") {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<StageManifest> manifests;
  for (const fs::path& path : paths) {
    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    StageManifest m;
    m.stage = j["stage"].get<std::string>();
    m.inputs = j["inputs"].get<std::map<std::string, std::string>>();
    m.outputs = j["outputs"].get<std::map<std::string, std::string>>();
    m.seed = j["seed"].get<std::uint64_t>();
    m.counts = j["counts"].get<std::map<std::string, std::size_t>>();
    manifests.push_back(std::move(m));
  }
  return manifests;
}

std::vector<std::string> verify_manifest_chain(const std::string& dir) {
  std::vector<std::string> problems;
  const std::vector<StageManifest> manifests = load_manifests(dir);
  std::map<std::string, std::pair<std::string, std::string>> produced;  // name -> (stage, md5)
  for (const StageManifest& m : manifests) {
    for (const auto& [name, md5] : m.inputs) {
      const auto it = produced.find(name);
      if (it != produced.end() && it->second.second != md5) {
        problems.push_back("stage '" + m.stage + "' read '" + name + "' with hash " + md5 +
                           " but stage '" + it->second.first + "' produced hash " +
                           it->second.second);
      }
    }
    for (const auto& [name, md5] : m.outputs) {
      produced[name] = {m.stage, md5};
      const fs::path path = fs::path(dir) / name;
      if (fs::exists(path)) {
        const std::string actual = md5_file_hex(path.string());
        if (actual != md5) {
          problems.push_back("artifact '" + name + "' on disk hashes to " + actual +
                             " but manifest of stage '" + m.stage + "' recorded " + md5);
        }
      }
    }
  }
  return problems;
}

// ---- filter cascade --------------------------------------------------------------

namespace {

struct CascadeTally {
  PassRateReport* report;
  const std::vector<LinguistPrompt>* prompts;
  const std::vector<GenerationOutput>* outputs;

  void record(const std::string& stage, std::size_t output_index, const FilterVerdict& v) {
    const LinguistPrompt& prompt =
        (*prompts)[static_cast<std::size_t>((*outputs)[output_index].prompt_index)];
    StageVerdict sv{stage, v};
    tally(report->stages, sv);
    tally(report->per_language[prompt.language].stages, sv);
    tally(report->per_intent[prompt.intent].stages, sv);
  }

  static void tally(std::vector<StageTally>& stages, const StageVerdict& sv) {
    StageTally* t = nullptr;
    for (StageTally& s : stages) {
      if (s.name == sv.stage) t = &s;
    }
    if (t == nullptr) {
      stages.push_back(StageTally{sv.stage, 0, 0, {}});
      t = &stages.back();
    }
    ++t->evaluated;
    if (sv.verdict.passed) {
      ++t->passed;
    } else if (sv.verdict.reason) {
      ++t->reasons[*sv.verdict.reason];
    }
  }
};

}  // namespace

CascadeResult filter_cascade(
    const std::vector<LinguistPrompt>& prompts, const std::vector<GenerationOutput>& outputs,
    const FilterSettings& settings, const IntentClassifier* classifier,
    const std::map<std::string, std::vector<AnnotatedUtterance>>* balance_source,
    const std::map<std::string, std::size_t>* balance_targets) {
  CascadeResult result;
  result.report.total = outputs.size();
  for (const GenerationOutput& o : outputs) {
    if (o.prompt_index < 0 || static_cast<std::size_t>(o.prompt_index) >= prompts.size()) {
      throw std::invalid_argument("output prompt_index " + std::to_string(o.prompt_index) +
                                  " out of range (" + std::to_string(prompts.size()) +
                                  " prompts)");
    }
    const LinguistPrompt& p = prompts[static_cast<std::size_t>(o.prompt_index)];
    ++result.report.per_language[p.language].total;
    ++result.report.per_intent[p.intent].total;
  }

  CascadeTally tally{&result.report, &prompts, &outputs};
  std::vector<std::size_t> survivors(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) survivors[i] = i;

  auto apply = [&](const std::string& stage, auto&& verdict_of) {
    std::vector<std::size_t> next;
    next.reserve(survivors.size());
    for (std::size_t idx : survivors) {
      const FilterVerdict v = verdict_of(idx);
      tally.record(stage, idx, v);
      if (v.passed) next.push_back(idx);
    }
    survivors = std::move(next);
  };

  const auto prompt_of = [&](std::size_t idx) -> const LinguistPrompt& {
    return prompts[static_cast<std::size_t>(outputs[idx].prompt_index)];
  };

  if (settings.valid) {
    apply("valid", [&](std::size_t idx) {
      return valid_filter(outputs[idx].text, prompt_of(idx));
    });
  }
  if (settings.heuristic) {
    apply("heuristic", [&](std::size_t idx) {
      return heuristic_filter(outputs[idx].text, prompt_of(idx));
    });
  }
  if (settings.dedup) {
    std::vector<std::string> texts;
    texts.reserve(survivors.size());
    for (std::size_t idx : survivors) texts.push_back(outputs[idx].text);
    const std::vector<FilterVerdict> verdicts = dedup_verdicts(texts);
    std::size_t cursor = 0;
    apply("dedup", [&](std::size_t) { return verdicts[cursor++]; });
  }
  if (!settings.ngram_blocklist.empty()) {
    apply("ngram", [&](std::size_t idx) {
      return ngram_verdict(outputs[idx].text, settings.ngram_blocklist);
    });
  }
  if (settings.select_lowest_perplexity) {
    std::map<int, std::vector<std::size_t>> by_prompt;
    for (std::size_t idx : survivors) by_prompt[outputs[idx].prompt_index].push_back(idx);
    std::vector<std::size_t> selected;
    for (const auto& [prompt_index, indices] : by_prompt) {
      std::vector<GenerationOutput> group;
      group.reserve(indices.size());
      for (std::size_t idx : indices) group.push_back(outputs[idx]);
      const auto chosen = select_lowest_perplexity(
          group, prompts[static_cast<std::size_t>(prompt_index)]);
      if (!chosen) continue;
      for (std::size_t pos = 0; pos < group.size(); ++pos) {
        if (group[pos] == *chosen) {
          selected.push_back(indices[pos]);
          break;
        }
      }
    }
    std::sort(selected.begin(), selected.end());
    StageTally select_tally{"perplexity-select", survivors.size(), selected.size(), {}};
    result.report.stages.push_back(select_tally);
    survivors = std::move(selected);
  }
  if (settings.ic) {
    if (classifier == nullptr) {
      throw std::invalid_argument("intent filter enabled but no classifier provided");
    }
    apply("intent", [&](std::size_t idx) {
      const NumberedParse parsed = parse_numbered_brackets(outputs[idx].text);
      const std::string text =
          parsed.ok ? join_tokens(parsed.tokens) : normalize_whitespace(outputs[idx].text);
      const auto [predicted, score] = classifier->classify(text);
      (void)score;
      return predicted == prompt_of(idx).intent ? FilterVerdict::pass()
                                                : FilterVerdict::fail(FilterReason::IntentMismatch);
    });
  }

  result.report.cascaded_passed = survivors.size();
  for (auto& [language, group] : result.report.per_language) {
    (void)language;
    group.cascaded_passed = 0;
  }
  for (auto& [intent, group] : result.report.per_intent) {
    (void)intent;
    group.cascaded_passed = 0;
  }
  for (std::size_t idx : survivors) {
    const LinguistPrompt& p = prompt_of(idx);
    ++result.report.per_language[p.language].cascaded_passed;
    ++result.report.per_intent[p.intent].cascaded_passed;
  }

  for (std::size_t idx : survivors) {
    const LinguistPrompt& p = prompt_of(idx);
    const BracketParse parsed = bracket_to_spans(outputs[idx].text, p.labels);
    if (!parsed.ok) continue;  // only reachable when the valid filter is off
    AnnotatedUtterance utt = parsed.utterance;
    utt.intent = p.intent;
    utt.language = p.language;
    utt.domain = p.domain;
    utt.provenance = Provenance::Generated;
    result.kept.push_back(std::move(utt));
  }

  if (settings.balance) {
    if (balance_source == nullptr || balance_targets == nullptr) {
      throw std::invalid_argument("balance enabled but no source/targets provided");
    }
    std::map<std::string, std::vector<AnnotatedUtterance>> kept_by_intent;
    for (const AnnotatedUtterance& u : result.kept) kept_by_intent[u.intent].push_back(u);
    const BalanceResult balanced =
        balance_classes(kept_by_intent, *balance_source, *balance_targets);
    result.kept = balanced.dataset;
    std::size_t copied = 0;
    for (const auto& [intent, count] : balanced.copied_per_intent) {
      (void)intent;
      copied += count;
    }
    result.report.copied = copied;
    result.report.stages.push_back(StageTally{
        "balance", balanced.dataset.size(), balanced.dataset.size(), {}});
  }
  return result;
}

// ---- pipeline ---------------------------------------------------------------------

namespace {

std::string artifact_hash(const fs::path& dir, const std::string& name) {
  return md5_file_hex((dir / name).string());
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg) {
  const std::vector<std::string> problems = validate_run_config(cfg);
  if (!problems.empty()) {
    std::string joined;
    for (const std::string& p : problems) {
      if (!joined.empty()) joined += "; ";
      joined += p;
    }
    throw ConfigError(joined);
  }

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);

  PipelineResult result;
  std::vector<std::string> completed;

  auto stage = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const ConfigError&) {
      throw;
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what(), completed);
    }
    completed.push_back(name);
  };

  // 00: ingest
  Corpus corpus;
  stage("00_ingest", [&] {
    corpus = load_corpus(cfg.corpus_path, *corpus_format_from_string(cfg.corpus_format));
    save_corpus_jsonl(corpus, (out_dir / "00_corpus.jsonl").string());
    StageManifest m;
    m.stage = "00_ingest";
    m.seed = cfg.seed;
    m.inputs["source_corpus"] = md5_file_hex(cfg.corpus_path);
    m.outputs["00_corpus.jsonl"] = artifact_hash(out_dir, "00_corpus.jsonl");
    m.counts["rows"] = corpus.size();
    m.counts["intents"] = corpus.intents().size();
    write_manifest(m, out_dir.string());
  });
  result.artifacts["corpus"] = (out_dir / "00_corpus.jsonl").string();

  // 01: split
  NifsSplit split;
  stage("01_split", [&] {
    NifsConfig nifs;
    nifs.target_intent = cfg.target_intent;
    nifs.k_starters = cfg.k_starters;
    nifs.seed = cfg.seed;
    if (!cfg.row_ids_path.empty()) {
      const RowIdFile file = read_row_id_file(cfg.row_ids_path);
      verify_row_ids(file, corpus);
      nifs.explicit_row_ids = file.ids;
    }
    split = nifs_split(corpus, nifs);
    save_utterances_jsonl(materialize(corpus, split.starter_rows),
                          (out_dir / "01_starters.jsonl").string());
    save_utterances_jsonl(materialize(corpus, split.remainder_rows),
                          (out_dir / "01_remainder.jsonl").string());
    save_utterances_jsonl(materialize(corpus, split.other_rows),
                          (out_dir / "01_others.jsonl").string());
    write_row_id_file((out_dir / "01_row_ids.txt").string(), split.starter_rows, corpus);
    StageManifest m;
    m.stage = "01_split";
    m.seed = cfg.seed;
    m.inputs["00_corpus.jsonl"] = artifact_hash(out_dir, "00_corpus.jsonl");
    for (const char* name :
         {"01_starters.jsonl", "01_remainder.jsonl", "01_others.jsonl", "01_row_ids.txt"}) {
      m.outputs[name] = artifact_hash(out_dir, name);
    }
    m.counts["starters"] = split.starter_rows.size();
    m.counts["remainder"] = split.remainder_rows.size();
    m.counts["others"] = split.other_rows.size();
    write_manifest(m, out_dir.string());
  });

  // 02: build inference prompts
  std::vector<LinguistPrompt> prompts;
  stage("02_build_prompts", [&] {
    const std::vector<AnnotatedUtterance> starters = materialize(corpus, split.starter_rows);
    std::optional<std::string> language;
    if (!cfg.target_language.empty()) language = cfg.target_language;
    TranslationTable table;
    const TranslationTable* table_ptr = nullptr;
    if (!cfg.translations_path.empty()) {
      table = load_translation_table(cfg.translations_path);
      table_ptr = &table;
    }
    prompts = build_inference_prompts(starters, *strategy_from_string(cfg.strategy), language,
                                      table_ptr);
    std::vector<std::string> lines;
    lines.reserve(prompts.size());
    for (const LinguistPrompt& p : prompts) lines.push_back(render_prompt(p));
    save_prompt_lines(lines, (out_dir / "02_prompts.txt").string());
    StageManifest m;
    m.stage = "02_build_prompts";
    m.seed = cfg.seed;
    m.inputs["01_starters.jsonl"] = artifact_hash(out_dir, "01_starters.jsonl");
    m.outputs["02_prompts.txt"] = artifact_hash(out_dir, "02_prompts.txt");
    m.counts["prompts"] = prompts.size();
    write_manifest(m, out_dir.string());
  });

  // 03: generate
  GenerationRun generation;
  stage("03_generate", [&] {
    const std::unique_ptr<GenerationBackend> backend = make_backend(cfg.backend, cfg.seed);
    std::vector<std::string> lines;
    lines.reserve(prompts.size());
    for (const LinguistPrompt& p : prompts) lines.push_back(render_prompt(p));
    generation = generate(lines, cfg.sampling, *backend, cfg.backend.max_in_flight);
    save_outputs_jsonl(generation, (out_dir / "03_outputs.jsonl").string());
    StageManifest m;
    m.stage = "03_generate";
    m.seed = cfg.seed;
    m.inputs["02_prompts.txt"] = artifact_hash(out_dir, "02_prompts.txt");
    m.outputs["03_outputs.jsonl"] = artifact_hash(out_dir, "03_outputs.jsonl");
    m.counts["outputs"] = generation.outputs.size();
    m.counts["truncated_prompts"] = generation.truncated_prompts.size();
    write_manifest(m, out_dir.string());
  });

  // 04: parse + filter cascade (+ balance)
  CascadeResult cascade;
  stage("04_filter", [&] {
    CentroidIntentClassifier classifier;
    if (cfg.filters.ic) {
      std::vector<AnnotatedUtterance> train = materialize(corpus, split.starter_rows);
      const std::vector<AnnotatedUtterance> others = materialize(corpus, split.other_rows);
      train.insert(train.end(), others.begin(), others.end());
      classifier.fit(train);
    }
    std::map<std::string, std::vector<AnnotatedUtterance>> balance_source;
    std::map<std::string, std::size_t> balance_targets;
    if (cfg.filters.balance) {
      balance_source[cfg.target_intent] = materialize(corpus, split.starter_rows);
      std::size_t target_prompts = 0;
      for (const LinguistPrompt& p : prompts) {
        if (p.intent == cfg.target_intent) ++target_prompts;
      }
      balance_targets[cfg.target_intent] = target_prompts;
    }
    cascade = filter_cascade(prompts, generation.outputs, cfg.filters,
                             cfg.filters.ic ? &classifier : nullptr,
                             cfg.filters.balance ? &balance_source : nullptr,
                             cfg.filters.balance ? &balance_targets : nullptr);
    save_utterances_jsonl(cascade.kept, (out_dir / "04_kept.jsonl").string());
    std::ofstream table(out_dir / "04_passrate.txt");
    table << cascade.report.to_table();
    table.close();
    StageManifest m;
    m.stage = "04_filter";
    m.seed = cfg.seed;
    m.inputs["02_prompts.txt"] = artifact_hash(out_dir, "02_prompts.txt");
    m.inputs["03_outputs.jsonl"] = artifact_hash(out_dir, "03_outputs.jsonl");
    m.outputs["04_kept.jsonl"] = artifact_hash(out_dir, "04_kept.jsonl");
    m.outputs["04_passrate.txt"] = artifact_hash(out_dir, "04_passrate.txt");
    m.counts["evaluated"] = cascade.report.total;
    m.counts["kept"] = cascade.kept.size();
    m.counts["copied"] = cascade.report.copied;
    write_manifest(m, out_dir.string());
  });

  // 05: mix
  std::vector<AnnotatedUtterance> dataset;
  stage("05_mix", [&] {
    const std::vector<AnnotatedUtterance> starters = materialize(corpus, split.starter_rows);
    std::vector<AnnotatedUtterance> generated_pool;
    for (const AnnotatedUtterance& u : cascade.kept) {
      if (u.intent == cfg.target_intent) generated_pool.push_back(u);
    }
    MixSpec spec;
    spec.starter_weight = cfg.starter_weight;
    spec.target_size = cfg.mix_target != 0
                           ? cfg.mix_target
                           : corpus.rows_with_intent(cfg.target_intent).size();
    Rng rng = Rng::substream(cfg.seed, 0x5u);
    dataset = upsample_mix(starters, generated_pool, spec, rng);
    const std::vector<AnnotatedUtterance> others = materialize(corpus, split.other_rows);
    dataset.insert(dataset.end(), others.begin(), others.end());
    save_utterances_jsonl(dataset, (out_dir / "05_dataset.jsonl").string());
    StageManifest m;
    m.stage = "05_mix";
    m.seed = cfg.seed;
    m.inputs["01_starters.jsonl"] = artifact_hash(out_dir, "01_starters.jsonl");
    m.inputs["04_kept.jsonl"] = artifact_hash(out_dir, "04_kept.jsonl");
    m.outputs["05_dataset.jsonl"] = artifact_hash(out_dir, "05_dataset.jsonl");
    m.counts["dataset"] = dataset.size();
    m.counts["mixed_target_rows"] = spec.target_size;
    write_manifest(m, out_dir.string());
  });

  // 06: evaluate with the naive stand-in classifier on the held-out rows
  stage("06_evaluate", [&] {
    CentroidIntentClassifier model;
    model.fit(dataset);
    std::vector<PredictionPair> pairs;
    auto add_pairs = [&](const std::vector<std::size_t>& rows) {
      for (std::size_t row : rows) {
        PredictionPair pair;
        pair.reference = corpus.row(row);
        pair.hypothesis = pair.reference;
        pair.hypothesis.intent = model.classify(pair.reference.text()).first;
        pairs.push_back(std::move(pair));
      }
    };
    add_pairs(split.remainder_rows);
    add_pairs(split.other_rows);
    result.report = eval_report(pairs, cfg.target_intent);
    result.report.pass_rates = cascade.report;
    std::ofstream json_out(out_dir / "06_report.json");
    json_out << result.report.to_json_string() << '\n';
    json_out.close();
    std::ofstream text_out(out_dir / "06_report.txt");
    text_out << result.report.to_text();
    text_out.close();
    StageManifest m;
    m.stage = "06_evaluate";
    m.seed = cfg.seed;
    m.inputs["05_dataset.jsonl"] = artifact_hash(out_dir, "05_dataset.jsonl");
    m.inputs["01_remainder.jsonl"] = artifact_hash(out_dir, "01_remainder.jsonl");
    m.inputs["01_others.jsonl"] = artifact_hash(out_dir, "01_others.jsonl");
    m.outputs["06_report.json"] = artifact_hash(out_dir, "06_report.json");
    m.outputs["06_report.txt"] = artifact_hash(out_dir, "06_report.txt");
    m.counts["pairs"] = pairs.size();
    write_manifest(m, out_dir.string());
  });

  result.pass_rates = cascade.report;
  for (const char* name :
       {"01_starters.jsonl", "01_remainder.jsonl", "01_others.jsonl", "01_row_ids.txt",
        "02_prompts.txt", "03_outputs.jsonl", "04_kept.jsonl", "04_passrate.txt",
        "05_dataset.jsonl", "06_report.json", "06_report.txt"}) {
    result.artifacts[name] = (out_dir / name).string();
  }
  return result;
}

}  // namespace linguist
