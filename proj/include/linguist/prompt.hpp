#pragma once
// Instruction-prompt grammar: structured five-block prompts, canonical text
// rendering/parsing, and training-pair construction (example sampling,
// label-name dropout, wildcard assignment).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "linguist/corpus.hpp"
#include "linguist/rng.hpp"

namespace linguist {

inline constexpr std::size_t kMaxPromptExamples = 10;

struct IncludeItem {
  int number = 0;
  std::vector<std::string> value;  // empty means the wildcard "*"

  static IncludeItem wildcard(int number) { return {number, {}}; }
  static IncludeItem with_value(int number, std::vector<std::string> value);

  bool is_wildcard() const { return value.empty(); }
  bool operator==(const IncludeItem&) const = default;
};

struct LinguistPrompt {
  std::string language;
  std::optional<std::string> domain;
  std::string intent;
  std::vector<IncludeItem> include;
  LabelMap labels;
  std::vector<std::string> examples;  // bracket text, single-space canonical form

  bool operator==(const LinguistPrompt&) const = default;
};

// nullopt when all invariants hold: at most 10 pairwise-distinct examples,
// include values non-empty, every bracket number used in include or examples
// declared in the label map.
std::optional<std::string> prompt_violation(const LinguistPrompt& p);

// Canonical single-line serialization; blocks in fixed order language,
// (domain), intent, include, labels, examples.
std::string render_prompt(const LinguistPrompt& p);

enum class PromptErrorCode {
  MissingBlock,
  DuplicateBlock,
  UnclosedBlock,
  MalformedLabelEntry,
  MalformedIncludeItem,
  MalformedExample,
  TooManyExamples,
  DuplicateExample,
  UndeclaredSlotNumber,
  TrailingContent,
};

const char* to_string(PromptErrorCode code);

struct PromptParse {
  bool ok = false;
  LinguistPrompt prompt;
  PromptErrorCode code{};
  std::size_t byte_offset = 0;  // first violating byte in the input
  std::string message;
};

PromptParse parse_prompt(std::string_view text);

struct FormatConfig {
  double label_dropout_rate = 0.2;
  double wildcard_geom_p = 0.5;
  int max_examples = 10;
  std::uint64_t rng_seed = 0;
};

std::optional<std::string> format_config_violation(const FormatConfig& cfg);

struct TrainingPair {
  LinguistPrompt prompt;  // post dropout/wildcarding
  std::string target;     // bracket text of the target utterance
  std::string source_intent;
  std::string source_language;
};

// Uniform k in {0..min(max_examples, available)} rows sharing the target's
// intent, never the target itself, no duplicates. Returns row indices.
std::vector<std::size_t> sample_examples(const Corpus& corpus, std::size_t target_index,
                                         const FormatConfig& cfg, Rng& rng);

// Kept explicit-value count follows Geometric(p) truncated at the item count;
// replaced positions chosen uniformly; order preserved.
std::vector<IncludeItem> assign_wildcards(std::vector<IncludeItem> items, double p, Rng& rng);

// Independently per label name (intent and slot labels), with probability
// `rate` replaces the name everywhere in the prompt with a fresh mask of 1-5
// underscore-joined uppercase letters. Bracket numbers and the target text
// are never touched.
std::pair<LinguistPrompt, std::string> apply_label_dropout(LinguistPrompt prompt,
                                                           std::string target, double rate,
                                                           Rng& rng);

// Label map for one pair: target span labels in span order, then labels that
// appear only in the examples, in first-appearance order.
LabelMap pair_label_map(const AnnotatedUtterance& target,
                        const std::vector<const AnnotatedUtterance*>& examples);

// Stable first-occurrence de-duplication on (intent, tokens, spans).
Corpus dedup_corpus(const Corpus& corpus);

// One pair per de-duplicated corpus row; pure function of (corpus, cfg).
std::vector<TrainingPair> build_training_pairs(const Corpus& corpus, const FormatConfig& cfg);

// JSONL records {prompt_text, target_text, metadata{intent, language, seed}}.
void write_training_pairs_jsonl(const std::vector<TrainingPair>& pairs, std::uint64_t seed,
                                const std::string& path);

}  // namespace linguist
