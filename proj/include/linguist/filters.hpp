#pragma once
// Reason-coded validation and filtering of generated outputs: prompt
// compliance, heuristic defect checks, de-duplication, n-gram blocking,
// intent-consistency filtering, perplexity selection, class balancing, and
// pass-rate accounting.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "linguist/generation.hpp"
#include "linguist/prompt.hpp"

namespace linguist {

enum class FilterReason {
  VerbatimCopy,
  MalformedBrackets,
  MissingSlot,
  ExtraSlot,
  RepeatedSlot,
  ValueNotCopied,
  LiteralWildcard,
  ForbiddenPunctuation,
  Duplicate,
  BlockedNgram,
  IntentMismatch,
};

const char* to_string(FilterReason reason);

struct FilterVerdict {
  bool passed = false;
  std::optional<FilterReason> reason;  // set exactly when !passed

  static FilterVerdict pass() { return {true, std::nullopt}; }
  static FilterVerdict fail(FilterReason r) { return {false, r}; }
  bool operator==(const FilterVerdict&) const = default;
};

// Bracket well-formedness, slot-number multiset compliance against the
// prompt's include block, and copy checks for explicit values.
FilterVerdict valid_filter(const std::string& output_text, const LinguistPrompt& prompt);

// Verbatim example copies, literal wildcard values, and content words
// carrying a character from {_ < > [ ] ( ) { } ;}.
FilterVerdict heuristic_filter(const std::string& output_text, const LinguistPrompt& prompt);

// Stable first-occurrence de-duplication on whitespace-normalized text.
std::vector<GenerationOutput> dedup(const std::vector<GenerationOutput>& outputs);
std::vector<FilterVerdict> dedup_verdicts(const std::vector<std::string>& texts);

// Case-insensitive token-boundary phrase blocking on the surface text.
FilterVerdict ngram_verdict(const std::string& output_text,
                            const std::vector<std::string>& blocked_phrases);
std::vector<GenerationOutput> ngram_block(const std::vector<GenerationOutput>& outputs,
                                          const std::vector<std::string>& blocked_phrases);

class IntentClassifier {
 public:
  virtual ~IntentClassifier() = default;
  // Returns (intent, score); deterministic for fixed model state.
  virtual std::pair<std::string, double> classify(const std::string& text) const = 0;
};

// Naive reference implementation standing in for a fine-tuned encoder:
// centroid bag-of-words cosine over the training texts, ties broken by
// intent order.
class CentroidIntentClassifier : public IntentClassifier {
 public:
  void fit(const std::vector<std::pair<std::string, std::string>>& text_and_intent);
  void fit(const std::vector<AnnotatedUtterance>& utterances);
  std::pair<std::string, double> classify(const std::string& text) const override;
  bool trained() const { return !centroids_.empty(); }

 private:
  std::vector<std::pair<std::string, std::map<std::string, double>>> centroids_;
};

struct IcFilterResult {
  std::vector<GenerationOutput> kept;
  std::vector<std::pair<GenerationOutput, std::string>> dropped;  // with predicted intent
};

IcFilterResult ic_filter(const std::vector<GenerationOutput>& outputs,
                         const std::string& expected_intent,
                         const IntentClassifier& classifier);

// Among outputs passing valid_filter: the one with minimal perplexity, ties
// broken by lowest index; without perplexities, the first passing output.
std::optional<GenerationOutput> select_lowest_perplexity(
    const std::vector<GenerationOutput>& outputs_for_prompt, const LinguistPrompt& prompt);

struct BalanceResult {
  std::vector<AnnotatedUtterance> dataset;
  std::map<std::string, std::size_t> copied_per_intent;
  std::map<std::string, std::size_t> kept_per_intent;
};

// Tops up every intent below its target with cyclic copies from the source
// utterances (provenance copied-for-balance); never removes kept outputs.
BalanceResult balance_classes(const std::map<std::string, std::vector<AnnotatedUtterance>>& kept,
                              const std::map<std::string, std::vector<AnnotatedUtterance>>& source,
                              const std::map<std::string, std::size_t>& target_dist);

// ---- pass-rate accounting ------------------------------------------------------

struct StageVerdict {
  std::string stage;
  FilterVerdict verdict;
};

// One generated output's walk through the cascade; the walk stops at the
// first failing stage.
struct FilterTrace {
  std::string language;
  std::string intent;
  std::vector<StageVerdict> stages;

  bool passed_all() const;
};

struct StageTally {
  std::string name;
  std::size_t evaluated = 0;
  std::size_t passed = 0;
  std::map<FilterReason, std::size_t> reasons;

  std::optional<double> rate() const;
};

struct GroupTally {
  std::vector<StageTally> stages;
  std::size_t total = 0;
  std::size_t cascaded_passed = 0;

  std::optional<double> cascaded_rate() const;
};

struct PassRateReport {
  std::vector<StageTally> stages;
  std::size_t total = 0;
  std::size_t cascaded_passed = 0;
  std::map<std::string, GroupTally> per_language;
  std::map<std::string, GroupTally> per_intent;
  std::size_t copied = 0;  // filled by the balance stage when it runs

  std::optional<double> cascaded_rate() const;
  std::string to_table() const;
};

PassRateReport pass_rate_report(const std::vector<FilterTrace>& traces);

}  // namespace linguist
