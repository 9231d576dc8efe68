#include "linguist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace linguist {

IntentMetrics intent_metrics(const std::vector<PredictionPair>& pairs,
                             const std::optional<std::string>& target_intent) {
  IntentMetrics metrics;
  std::size_t correct = 0;
  std::size_t target_total = 0;
  std::size_t target_correct = 0;
  for (const PredictionPair& pair : pairs) {
    const bool match = pair.reference.intent == pair.hypothesis.intent;
    if (match) ++correct;
    if (target_intent && pair.reference.intent == *target_intent) {
      ++target_total;
      if (match) ++target_correct;
    }
  }
  metrics.global_accuracy =
      pairs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pairs.size());
  metrics.target_support = target_total;
  if (target_intent && target_total > 0) {
    metrics.local_recall = static_cast<double>(target_correct) /
                           static_cast<double>(target_total);
  }
  return metrics;
}

namespace {

std::vector<SlotSpan> sorted_chunks(const AnnotatedUtterance& utt) {
  std::vector<SlotSpan> chunks = utt.spans;
  std::sort(chunks.begin(), chunks.end(), [](const SlotSpan& a, const SlotSpan& b) {
    return std::tie(a.label, a.start, a.end) < std::tie(b.label, b.start, b.end);
  });
  return chunks;
}

}  // namespace

SlotF1 slot_f1(const std::vector<PredictionPair>& pairs) {
  SlotF1 result;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const PredictionPair& pair = pairs[i];
    if (pair.reference.tokens.size() != pair.hypothesis.tokens.size()) {
      throw std::invalid_argument(
          "pair " + std::to_string(i) + ": token count mismatch (" +
          std::to_string(pair.reference.tokens.size()) + " vs " +
          std::to_string(pair.hypothesis.tokens.size()) + ")");
    }
    const std::vector<SlotSpan> ref = sorted_chunks(pair.reference);
    const std::vector<SlotSpan> hyp = sorted_chunks(pair.hypothesis);
    result.ref_total += ref.size();
    result.hyp_total += hyp.size();
    std::size_t a = 0;
    std::size_t b = 0;
    while (a < ref.size() && b < hyp.size()) {
      const auto ka = std::tie(ref[a].label, ref[a].start, ref[a].end);
      const auto kb = std::tie(hyp[b].label, hyp[b].start, hyp[b].end);
      if (ka == kb) {
        ++result.true_positives;
        ++a;
        ++b;
      } else if (ka < kb) {
        ++a;
      } else {
        ++b;
      }
    }
  }
  if (result.ref_total == 0 && result.hyp_total == 0) {
    result.precision = result.recall = result.f1 = 1.0;
    return result;
  }
  result.precision = result.hyp_total == 0
                         ? 0.0
                         : static_cast<double>(result.true_positives) /
                               static_cast<double>(result.hyp_total);
  result.recall = result.ref_total == 0
                      ? 0.0
                      : static_cast<double>(result.true_positives) /
                            static_cast<double>(result.ref_total);
  const double denom = result.precision + result.recall;
  result.f1 = denom == 0.0 ? 0.0 : 2.0 * result.precision * result.recall / denom;
  return result;
}

namespace {

std::vector<std::string> span_value(const AnnotatedUtterance& utt, const SlotSpan& span) {
  return {utt.tokens.begin() + static_cast<long>(span.start),
          utt.tokens.begin() + static_cast<long>(span.end)};
}

}  // namespace

SemerResult semer(const std::vector<PredictionPair>& pairs) {
  SemerResult result;
  for (const PredictionPair& pair : pairs) {
    if (pair.reference.intent != pair.hypothesis.intent) {
      ++result.counts.substitutions;
      ++result.intent_substitutions;
    }
    // Slots aligned by label: equal-value matches consumed first as Correct,
    // remaining same-label pairs as Substitution, leftovers as Del/Ins.
    std::vector<std::string> labels;
    for (const SlotSpan& s : pair.reference.spans) {
      if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) {
        labels.push_back(s.label);
      }
    }
    for (const SlotSpan& s : pair.hypothesis.spans) {
      if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) {
        labels.push_back(s.label);
      }
    }
    for (const std::string& label : labels) {
      std::vector<std::vector<std::string>> ref_values;
      std::vector<std::vector<std::string>> hyp_values;
      for (const SlotSpan& s : pair.reference.spans) {
        if (s.label == label) ref_values.push_back(span_value(pair.reference, s));
      }
      for (const SlotSpan& s : pair.hypothesis.spans) {
        if (s.label == label) hyp_values.push_back(span_value(pair.hypothesis, s));
      }
      std::vector<bool> hyp_used(hyp_values.size(), false);
      std::vector<bool> ref_used(ref_values.size(), false);
      for (std::size_t r = 0; r < ref_values.size(); ++r) {
        for (std::size_t h = 0; h < hyp_values.size(); ++h) {
          if (!hyp_used[h] && hyp_values[h] == ref_values[r]) {
            hyp_used[h] = true;
            ref_used[r] = true;
            ++result.counts.correct;
            break;
          }
        }
      }
      std::size_t ref_left = 0;
      std::size_t hyp_left = 0;
      for (bool used : ref_used) {
        if (!used) ++ref_left;
      }
      for (bool used : hyp_used) {
        if (!used) ++hyp_left;
      }
      const std::size_t paired = std::min(ref_left, hyp_left);
      result.counts.substitutions += paired;
      result.counts.deletions += ref_left - paired;
      result.counts.insertions += hyp_left - paired;
    }
  }
  const std::size_t denominator =
      result.counts.correct + result.counts.deletions + result.counts.substitutions;
  if (denominator == 0) {
    if (result.counts.insertions == 0) {
      result.semer = 0.0;
      result.defined = true;
    } else {
      result.semer = 0.0;
      result.defined = false;
    }
    return result;
  }
  result.semer = static_cast<double>(result.counts.deletions + result.counts.insertions +
                                     result.counts.substitutions) /
                 static_cast<double>(denominator);
  result.defined = true;
  return result;
}

double relative_change_percent(double baseline, double updated) {
  if (baseline == 0.0) {
    throw std::invalid_argument("relative change needs a non-zero baseline");
  }
  return (updated - baseline) / baseline * 100.0;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  return out;
}

EvalReport eval_report(const std::vector<PredictionPair>& pairs,
                       const std::optional<std::string>& target_intent) {
  EvalReport report;
  report.target_intent = target_intent;
  report.num_pairs = pairs.size();
  report.intent = intent_metrics(pairs, target_intent);
  report.global_slot = slot_f1(pairs);
  if (target_intent) {
    std::vector<PredictionPair> local;
    for (const PredictionPair& pair : pairs) {
      if (pair.reference.intent == *target_intent) local.push_back(pair);
    }
    if (!local.empty()) report.local_slot = slot_f1(local);
  }
  report.semer = semer(pairs);
  return report;
}

namespace {

std::string fmt(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::string out;
  out += "Pairs evaluated: " + std::to_string(num_pairs) + "\n";
  if (target_intent) out += "Target intent: " + *target_intent + "\n";
  out += "Global Intent Accuracy: " + fmt(intent.global_accuracy) + "\n";
  if (intent.local_recall) {
    out += "Local Intent Recall: " + fmt(*intent.local_recall) + " (support " +
           std::to_string(intent.target_support) + ")\n";
  }
  out += "Global ST F1 Score: " + fmt(global_slot.f1) + " (P " + fmt(global_slot.precision) +
         ", R " + fmt(global_slot.recall) + ")\n";
  if (local_slot) {
    out += "Local ST F1 Score: " + fmt(local_slot->f1) + " (P " + fmt(local_slot->precision) +
           ", R " + fmt(local_slot->recall) + ")\n";
  }
  out += "SemER: " + std::string(semer.defined ? fmt(semer.semer) : "undefined") + " (Cor " +
         std::to_string(semer.counts.correct) + ", Del " +
         std::to_string(semer.counts.deletions) + ", Ins " +
         std::to_string(semer.counts.insertions) + ", Sub " +
         std::to_string(semer.counts.substitutions) + ")\n";
  if (pass_rates) {
    out += "\n";
    out += pass_rates->to_table();
  }
  return out;
}

std::string EvalReport::to_json_string() const {
  nlohmann::json j;
  j["num_pairs"] = num_pairs;
  if (target_intent) j["target_intent"] = *target_intent;
  j["global_intent_accuracy"] = intent.global_accuracy;
  if (intent.local_recall) j["local_intent_recall"] = *intent.local_recall;
  j["target_support"] = intent.target_support;
  j["global_slot_f1"] = {{"precision", global_slot.precision},
                         {"recall", global_slot.recall},
                         {"f1", global_slot.f1}};
  if (local_slot) {
    j["local_slot_f1"] = {{"precision", local_slot->precision},
                          {"recall", local_slot->recall},
                          {"f1", local_slot->f1}};
  }
  j["semer"] = {{"value", semer.semer},
                {"defined", semer.defined},
                {"correct", semer.counts.correct},
                {"deletions", semer.counts.deletions},
                {"insertions", semer.counts.insertions},
                {"substitutions", semer.counts.substitutions},
                {"intent_substitutions", semer.intent_substitutions}};
  if (pass_rates) {
    nlohmann::json stages = nlohmann::json::array();
    for (const StageTally& s : pass_rates->stages) {
      stages.push_back({{"name", s.name}, {"evaluated", s.evaluated}, {"passed", s.passed}});
    }
    j["pass_rates"] = {{"stages", stages},
                       {"total", pass_rates->total},
                       {"cascaded_passed", pass_rates->cascaded_passed},
                       {"copied", pass_rates->copied}};
  }
  return j.dump(2);
}

std::string render_relative_semer_table(
    const std::vector<std::string>& languages,
    const std::map<std::string, std::map<std::string, double>>& rows) {
  std::string out = "Feature/Lang";
  for (const std::string& lang : languages) out += "\t" + lang;
  out += "\n";
  std::map<std::string, std::vector<double>> by_language;
  for (const auto& [feature, cells] : rows) {
    out += feature;
    for (const std::string& lang : languages) {
      const auto it = cells.find(lang);
      if (it == cells.end()) {
        out += "\t-";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%+.1f%%", it->second);
        out += "\t";
        out += buf;
        by_language[lang].push_back(it->second);
      }
    }
    out += "\n";
  }
  out += "Average";
  for (const std::string& lang : languages) {
    const auto it = by_language.find(lang);
    if (it == by_language.end() || it->second.empty()) {
      out += "\t-";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%+.1f%%", mean_std(it->second).mean);
      out += "\t";
      out += buf;
    }
  }
  out += "\n";
  return out;
}

std::vector<PredictionPair> load_prediction_pairs_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions file: " + path);
  std::vector<PredictionPair> pairs;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(std::string("invalid JSON: ") + e.what(), row);
    }
    if (!j.contains("reference") || !j.contains("hypothesis")) {
      throw CorpusError("prediction record needs reference and hypothesis", row);
    }
    PredictionPair pair;
    pair.reference = utterance_from_json_line(j["reference"].dump(), row);
    pair.hypothesis = utterance_from_json_line(j["hypothesis"].dump(), row);
    pairs.push_back(std::move(pair));
    ++row;
  }
  return pairs;
}

void save_prediction_pairs_jsonl(const std::vector<PredictionPair>& pairs,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions file: " + path);
  for (const PredictionPair& pair : pairs) {
    nlohmann::json j;
    j["reference"] = nlohmann::json::parse(utterance_to_json_line(pair.reference));
    j["hypothesis"] = nlohmann::json::parse(utterance_to_json_line(pair.hypothesis));
    out << j.dump() << '\n';
  }
}

}  // namespace linguist
