#pragma once
// Evaluation of IC+ST predictions: Local/Global intent metrics, chunk-based
// slot F1 ignoring O, and SemER.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "linguist/corpus.hpp"
#include "linguist/filters.hpp"

namespace linguist {

struct PredictionPair {
  AnnotatedUtterance reference;
  AnnotatedUtterance hypothesis;
};

struct IntentMetrics {
  std::optional<double> local_recall;  // absent when the target subset is empty
  double global_accuracy = 0.0;
  std::size_t target_support = 0;
};

IntentMetrics intent_metrics(const std::vector<PredictionPair>& pairs,
                             const std::optional<std::string>& target_intent);

struct SlotF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t ref_total = 0;
  std::size_t hyp_total = 0;
};

// Micro-averaged exact-match over (label, start, end) chunks; empty hypothesis
// and reference scores 1.0. Throws on token-count mismatch within a pair.
SlotF1 slot_f1(const std::vector<PredictionPair>& pairs);

struct SemerCounts {
  std::size_t correct = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t substitutions = 0;  // slot substitutions plus intent errors
};

struct SemerResult {
  SemerCounts counts;
  std::size_t intent_substitutions = 0;
  double semer = 0.0;
  bool defined = true;  // false when the denominator is 0 but insertions > 0
};

SemerResult semer(const std::vector<PredictionPair>& pairs);

// Signed percentage change, e.g. baseline 0.20 -> updated 0.15 gives -25.0.
double relative_change_percent(double baseline, double updated);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& values);

struct EvalReport {
  std::optional<std::string> target_intent;
  std::size_t num_pairs = 0;
  IntentMetrics intent;
  SlotF1 global_slot;
  std::optional<SlotF1> local_slot;  // pairs whose reference intent is the target
  SemerResult semer;
  std::optional<PassRateReport> pass_rates;

  std::string to_text() const;
  std::string to_json_string() const;
};

EvalReport eval_report(const std::vector<PredictionPair>& pairs,
                       const std::optional<std::string>& target_intent);

// Feature-by-language table of relative SemER changes with per-language
// averages; missing cells render as "-".
std::string render_relative_semer_table(
    const std::vector<std::string>& languages,
    const std::map<std::string, std::map<std::string, double>>& rows);

// JSONL of {"reference": {...}, "hypothesis": {...}} records.
std::vector<PredictionPair> load_prediction_pairs_jsonl(const std::string& path);
void save_prediction_pairs_jsonl(const std::vector<PredictionPair>& pairs,
                                 const std::string& path);

}  // namespace linguist
