#pragma once
// Run configuration, the end-to-end pipeline (split -> prompts -> generate ->
// parse/filter -> mix -> evaluate), and per-stage manifests.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "linguist/augment.hpp"
#include "linguist/corpus.hpp"
#include "linguist/filters.hpp"
#include "linguist/generation.hpp"
#include "linguist/metrics.hpp"

namespace linguist {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& message,
             std::vector<std::string> completed)
      : std::runtime_error("stage '" + stage + "' failed: " + message),
        stage_(stage),
        completed_(std::move(completed)) {}

  const std::string& stage() const { return stage_; }
  const std::vector<std::string>& completed_stages() const { return completed_; }

 private:
  std::string stage_;
  std::vector<std::string> completed_;
};

struct BackendSettings {
  std::string kind = "mock";  // mock | http
  std::string endpoint;
  std::string auth_token;
  int timeout_ms = 30000;
  int retries = 3;
  int retry_base_ms = 100;
  int max_in_flight = 1;
  double corruption = 0.0;
  std::string defect = "none";
};

struct FilterSettings {
  bool valid = true;
  bool heuristic = true;
  bool dedup = true;
  std::vector<std::string> ngram_blocklist;
  bool select_lowest_perplexity = false;
  bool ic = true;
  bool balance = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string corpus_path;
  std::string corpus_format = "jsonl";
  std::string out_dir;

  std::string target_intent;
  std::size_t k_starters = 10;
  std::string row_ids_path;

  std::string strategy = "sample-each";
  std::string target_language;
  std::string translations_path;

  SamplingParams sampling{50, 0.3, 100, 1000};  // the SNIPS generation setting
  BackendSettings backend;
  FilterSettings filters;

  double starter_weight = 0.5;
  std::size_t mix_target = 0;  // 0 means the original target-intent row count

  FormatConfig format;  // used by the build-pairs stage
};

// JSON with // and /* */ comments allowed; unknown keys rejected.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_string(const std::string& text);
std::vector<std::string> validate_run_config(const RunConfig& cfg);

std::unique_ptr<GenerationBackend> make_backend(const BackendSettings& settings,
                                                std::uint64_t seed);

// ---- stage manifests ---------------------------------------------------------

struct StageManifest {
  std::string stage;
  std::map<std::string, std::string> inputs;   // artifact file name -> md5
  std::map<std::string, std::string> outputs;  // artifact file name -> md5
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> counts;
};

void write_manifest(const StageManifest& manifest, const std::string& dir);
std::vector<StageManifest> load_manifests(const std::string& dir);
// Each stage input previously produced by another stage must hash identically.
// Returns human-readable problems; empty means the chain is intact.
std::vector<std::string> verify_manifest_chain(const std::string& dir);

// ---- filter cascade ------------------------------------------------------------

struct CascadeResult {
  std::vector<AnnotatedUtterance> kept;  // parsed survivors, provenance generated
  PassRateReport report;
};

// Fixed stage order: valid -> heuristic -> dedup -> ngram -> perplexity
// selection -> intent filter -> balance.
CascadeResult filter_cascade(
    const std::vector<LinguistPrompt>& prompts, const std::vector<GenerationOutput>& outputs,
    const FilterSettings& settings, const IntentClassifier* classifier,
    const std::map<std::string, std::vector<AnnotatedUtterance>>* balance_source,
    const std::map<std::string, std::size_t>* balance_targets);

// ---- pipeline ------------------------------------------------------------------

struct PipelineResult {
  EvalReport report;
  PassRateReport pass_rates;
  std::map<std::string, std::string> artifacts;  // artifact name -> path
};

PipelineResult run_pipeline(const RunConfig& cfg);

}  // namespace linguist
