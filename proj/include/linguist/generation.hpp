#pragma once
// Pluggable text-generation backends: remote HTTP client, deterministic mock,
// and order-stable batched generation.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "linguist/prompt.hpp"

namespace linguist {

struct SamplingParams {
  int top_k = 50;
  double temperature = 0.3;
  int num_outputs = 1;
  int hard_cap = 1000;  // safety limit on outputs per prompt
};

std::optional<std::string> sampling_params_violation(const SamplingParams& params);

struct GenerationOutput {
  std::string text;
  std::optional<double> perplexity;
  int prompt_index = 0;

  bool operator==(const GenerationOutput&) const = default;
};

struct BackendOutput {
  std::string text;
  std::optional<double> perplexity;
};

struct BackendBatch {
  std::vector<BackendOutput> outputs;
  bool truncated = false;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind { Transport, Protocol };

  BackendError(Kind kind, const std::string& message, int prompt_index = -1)
      : std::runtime_error(message), kind_(kind), prompt_index_(prompt_index) {}

  Kind kind() const { return kind_; }
  int prompt_index() const { return prompt_index_; }
  void set_prompt_index(int index) { prompt_index_ = index; }

 private:
  Kind kind_;
  int prompt_index_;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  // Must be safe to call from multiple threads.
  virtual BackendBatch run(const std::string& prompt, const SamplingParams& params) = 0;
};

struct GenerationRun {
  std::vector<GenerationOutput> outputs;  // grouped and ordered by prompt_index
  std::vector<int> truncated_prompts;
};

// Exactly num_outputs outputs per prompt unless the backend truncates (then
// the prompt index is recorded). Output order is a pure function of the
// request, never of backend timing.
GenerationRun generate(const std::vector<std::string>& prompts, const SamplingParams& params,
                       GenerationBackend& backend, int max_in_flight = 1);

// ---- deterministic mock backend ---------------------------------------------

enum class MockDefect {
  None,
  VerbatimCopy,
  MalformedBrackets,
  MissingSlot,
  ExtraSlot,
  RepeatedSlot,
  ValueNotCopied,
  LiteralWildcard,
  ForbiddenPunctuation,
};

std::optional<MockDefect> mock_defect_from_string(std::string_view s);

struct MockConfig {
  std::uint64_t seed = 0;
  double corruption = 0.0;          // probability an output carries the defect
  MockDefect defect = MockDefect::None;
};

// Emits syntactically valid bracket text recombining the prompt's examples
// and include items: explicit values copied verbatim, wildcards filled from a
// seed-derived word list. Pure function of (prompt, params, seed, corruption).
class MockBackend : public GenerationBackend {
 public:
  explicit MockBackend(MockConfig config) : config_(config) {}
  BackendBatch run(const std::string& prompt, const SamplingParams& params) override;

 private:
  MockConfig config_;
};

std::vector<GenerationOutput> mock_generate(const std::string& prompt,
                                            const SamplingParams& params,
                                            const MockConfig& config);

// ---- remote HTTP backend -----------------------------------------------------

// Request {prompt, top_k, temperature, num_outputs}; response
// {outputs: [{text, perplexity?}], truncated?}.
struct HttpBackendConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/generate
  std::string auth_token;
  int timeout_ms = 30000;
  int max_retries = 3;
  int retry_base_ms = 100;  // doubled per attempt
};

class HttpBackend : public GenerationBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);  // throws on malformed endpoint
  BackendBatch run(const std::string& prompt, const SamplingParams& params) override;

 private:
  HttpBackendConfig config_;
  std::string host_;
  int port_ = 80;
  std::string path_;
};

// One rendered prompt per line.
std::vector<std::string> load_prompt_lines(const std::string& path);
void save_prompt_lines(const std::vector<std::string>& prompts, const std::string& path);

void save_outputs_jsonl(const GenerationRun& run, const std::string& path);
GenerationRun load_outputs_jsonl(const std::string& path);

}  // namespace linguist
