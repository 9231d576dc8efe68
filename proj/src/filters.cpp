#include "linguist/filters.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

namespace linguist {

namespace {

constexpr std::string_view kForbiddenChars = "_<>[](){};";

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> surface_tokens(const std::string& text) {
  const NumberedParse parsed = parse_numbered_brackets(text);
  if (parsed.ok) return parsed.tokens;
  // Fall back to stripping bracket markers from the raw token stream.
  std::vector<std::string> out;
  for (const std::string& tok : split_whitespace(text)) {
    if (tok == "]" || (tok.size() >= 2 && tok[0] == '[')) continue;
    out.push_back(tok);
  }
  return out;
}

std::map<int, std::size_t> number_counts(const std::vector<NumberedSpan>& spans) {
  std::map<int, std::size_t> counts;
  for (const NumberedSpan& s : spans) ++counts[s.number];
  return counts;
}

}  // namespace

const char* to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::VerbatimCopy: return "VerbatimCopy";
    case FilterReason::MalformedBrackets: return "MalformedBrackets";
    case FilterReason::MissingSlot: return "MissingSlot";
    case FilterReason::ExtraSlot: return "ExtraSlot";
    case FilterReason::RepeatedSlot: return "RepeatedSlot";
    case FilterReason::ValueNotCopied: return "ValueNotCopied";
    case FilterReason::LiteralWildcard: return "LiteralWildcard";
    case FilterReason::ForbiddenPunctuation: return "ForbiddenPunctuation";
    case FilterReason::Duplicate: return "Duplicate";
    case FilterReason::BlockedNgram: return "BlockedNgram";
    case FilterReason::IntentMismatch: return "IntentMismatch";
  }
  return "MalformedBrackets";
}

FilterVerdict valid_filter(const std::string& output_text, const LinguistPrompt& prompt) {
  const NumberedParse parsed = parse_numbered_brackets(output_text);
  if (!parsed.ok) return FilterVerdict::fail(FilterReason::MalformedBrackets);

  const std::map<int, std::size_t> produced = number_counts(parsed.spans);
  std::map<int, std::size_t> requested;
  for (const IncludeItem& item : prompt.include) ++requested[item.number];

  for (const auto& [number, count] : requested) {
    const auto it = produced.find(number);
    if (it == produced.end() || it->second < count) {
      return FilterVerdict::fail(FilterReason::MissingSlot);
    }
  }
  for (const auto& [number, count] : produced) {
    const auto it = requested.find(number);
    if (it == requested.end()) return FilterVerdict::fail(FilterReason::ExtraSlot);
    if (count > it->second) return FilterVerdict::fail(FilterReason::RepeatedSlot);
  }

  // Each explicit value must be contained in a distinct slot of its number.
  std::map<int, std::vector<std::size_t>> spans_by_number;
  for (std::size_t i = 0; i < parsed.spans.size(); ++i) {
    spans_by_number[parsed.spans[i].number].push_back(i);
  }
  std::set<std::size_t> consumed;
  for (const IncludeItem& item : prompt.include) {
    if (item.is_wildcard()) continue;
    bool matched = false;
    for (std::size_t span_index : spans_by_number[item.number]) {
      if (consumed.count(span_index) > 0) continue;
      const NumberedSpan& span = parsed.spans[span_index];
      const std::vector<std::string> slot_tokens(
          parsed.tokens.begin() + static_cast<long>(span.start),
          parsed.tokens.begin() + static_cast<long>(span.end));
      if (contains_token_subsequence(slot_tokens, item.value)) {
        consumed.insert(span_index);
        matched = true;
        break;
      }
    }
    if (!matched) return FilterVerdict::fail(FilterReason::ValueNotCopied);
  }
  return FilterVerdict::pass();
}

FilterVerdict heuristic_filter(const std::string& output_text, const LinguistPrompt& prompt) {
  const std::string normalized = normalize_whitespace(output_text);
  for (const std::string& example : prompt.examples) {
    if (normalized == normalize_whitespace(example)) {
      return FilterVerdict::fail(FilterReason::VerbatimCopy);
    }
  }

  const NumberedParse parsed = parse_numbered_brackets(output_text);
  if (parsed.ok) {
    for (const NumberedSpan& span : parsed.spans) {
      if (span.end - span.start == 1 && parsed.tokens[span.start] == "*") {
        return FilterVerdict::fail(FilterReason::LiteralWildcard);
      }
    }
    for (const std::string& tok : parsed.tokens) {
      if (tok.find_first_of(kForbiddenChars) != std::string::npos) {
        return FilterVerdict::fail(FilterReason::ForbiddenPunctuation);
      }
    }
    return FilterVerdict::pass();
  }

  // Unparseable text (valid_filter is responsible for rejecting it); still
  // scan raw tokens so the filter works standalone.
  for (const std::string& tok : split_whitespace(output_text)) {
    if (tok == "*") return FilterVerdict::fail(FilterReason::LiteralWildcard);
  }
  for (const std::string& tok : split_whitespace(output_text)) {
    if (tok == "]" || (tok.size() >= 2 && tok[0] == '[')) continue;
    if (tok.find_first_of(kForbiddenChars) != std::string::npos) {
      return FilterVerdict::fail(FilterReason::ForbiddenPunctuation);
    }
  }
  return FilterVerdict::pass();
}

std::vector<FilterVerdict> dedup_verdicts(const std::vector<std::string>& texts) {
  std::vector<FilterVerdict> verdicts;
  verdicts.reserve(texts.size());
  std::set<std::string> seen;
  for (const std::string& text : texts) {
    if (seen.insert(normalize_whitespace(text)).second) {
      verdicts.push_back(FilterVerdict::pass());
    } else {
      verdicts.push_back(FilterVerdict::fail(FilterReason::Duplicate));
    }
  }
  return verdicts;
}

std::vector<GenerationOutput> dedup(const std::vector<GenerationOutput>& outputs) {
  std::vector<std::string> texts;
  texts.reserve(outputs.size());
  for (const GenerationOutput& o : outputs) texts.push_back(o.text);
  const std::vector<FilterVerdict> verdicts = dedup_verdicts(texts);
  std::vector<GenerationOutput> kept;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (verdicts[i].passed) kept.push_back(outputs[i]);
  }
  return kept;
}

FilterVerdict ngram_verdict(const std::string& output_text,
                            const std::vector<std::string>& blocked_phrases) {
  if (blocked_phrases.empty()) return FilterVerdict::pass();
  std::vector<std::string> tokens = surface_tokens(output_text);
  for (std::string& tok : tokens) tok = lowercase(tok);
  for (const std::string& phrase : blocked_phrases) {
    std::vector<std::string> needle = split_whitespace(phrase);
    for (std::string& tok : needle) tok = lowercase(tok);
    if (contains_token_subsequence(tokens, needle)) {
      return FilterVerdict::fail(FilterReason::BlockedNgram);
    }
  }
  return FilterVerdict::pass();
}

std::vector<GenerationOutput> ngram_block(const std::vector<GenerationOutput>& outputs,
                                          const std::vector<std::string>& blocked_phrases) {
  std::vector<GenerationOutput> kept;
  for (const GenerationOutput& o : outputs) {
    if (ngram_verdict(o.text, blocked_phrases).passed) kept.push_back(o);
  }
  return kept;
}

void CentroidIntentClassifier::fit(
    const std::vector<std::pair<std::string, std::string>>& text_and_intent) {
  std::map<std::string, std::map<std::string, double>> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& [text, intent] : text_and_intent) {
    std::map<std::string, double> vec;
    for (const std::string& tok : split_whitespace(text)) vec[lowercase(tok)] += 1.0;
    double norm = 0.0;
    for (const auto& [word, count] : vec) norm += count * count;
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (const auto& [word, count] : vec) sums[intent][word] += count / norm;
    ++counts[intent];
  }
  centroids_.clear();
  for (auto& [intent, sum] : sums) {
    double norm = 0.0;
    for (const auto& [word, weight] : sum) norm += weight * weight;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (auto& [word, weight] : sum) weight /= norm;
    }
    centroids_.emplace_back(intent, std::move(sum));
  }
}

void CentroidIntentClassifier::fit(const std::vector<AnnotatedUtterance>& utterances) {
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(utterances.size());
  for (const AnnotatedUtterance& u : utterances) pairs.emplace_back(u.text(), u.intent);
  fit(pairs);
}

std::pair<std::string, double> CentroidIntentClassifier::classify(
    const std::string& text) const {
  if (centroids_.empty()) {
    throw std::logic_error("centroid classifier used before fit()");
  }
  std::map<std::string, double> vec;
  for (const std::string& tok : split_whitespace(text)) vec[lowercase(tok)] += 1.0;
  double norm = 0.0;
  for (const auto& [word, count] : vec) norm += count * count;
  norm = std::sqrt(norm);

  std::string best_intent = centroids_.front().first;
  double best_score = -1.0;
  for (const auto& [intent, centroid] : centroids_) {
    double dot = 0.0;
    for (const auto& [word, count] : vec) {
      const auto it = centroid.find(word);
      if (it != centroid.end()) dot += count * it->second;
    }
    const double score = norm > 0.0 ? dot / norm : 0.0;
    if (score > best_score) {
      best_score = score;
      best_intent = intent;
    }
  }
  return {best_intent, best_score};
}

IcFilterResult ic_filter(const std::vector<GenerationOutput>& outputs,
                         const std::string& expected_intent,
                         const IntentClassifier& classifier) {
  IcFilterResult result;
  for (const GenerationOutput& o : outputs) {
    const auto [predicted, score] = classifier.classify(join_tokens(surface_tokens(o.text)));
    (void)score;
    if (predicted == expected_intent) {
      result.kept.push_back(o);
    } else {
      result.dropped.emplace_back(o, predicted);
    }
  }
  return result;
}

std::optional<GenerationOutput> select_lowest_perplexity(
    const std::vector<GenerationOutput>& outputs_for_prompt, const LinguistPrompt& prompt) {
  std::optional<std::size_t> best_with_ppl;
  std::optional<std::size_t> first_passing;
  for (std::size_t i = 0; i < outputs_for_prompt.size(); ++i) {
    const GenerationOutput& o = outputs_for_prompt[i];
    if (!valid_filter(o.text, prompt).passed) continue;
    if (!first_passing) first_passing = i;
    if (o.perplexity) {
      if (!best_with_ppl ||
          *o.perplexity < *outputs_for_prompt[*best_with_ppl].perplexity) {
        best_with_ppl = i;
      }
    }
  }
  if (best_with_ppl) return outputs_for_prompt[*best_with_ppl];
  if (first_passing) return outputs_for_prompt[*first_passing];
  return std::nullopt;
}

BalanceResult balance_classes(const std::map<std::string, std::vector<AnnotatedUtterance>>& kept,
                              const std::map<std::string, std::vector<AnnotatedUtterance>>& source,
                              const std::map<std::string, std::size_t>& target_dist) {
  BalanceResult result;
  for (const auto& [intent, target] : target_dist) {
    const auto kept_it = kept.find(intent);
    const std::vector<AnnotatedUtterance> empty;
    const std::vector<AnnotatedUtterance>& kept_rows =
        kept_it != kept.end() ? kept_it->second : empty;
    for (const AnnotatedUtterance& u : kept_rows) result.dataset.push_back(u);
    result.kept_per_intent[intent] = kept_rows.size();

    if (kept_rows.size() >= target) {
      result.copied_per_intent[intent] = 0;
      continue;
    }
    const std::size_t deficit = target - kept_rows.size();
    const auto source_it = source.find(intent);
    if (source_it == source.end() || source_it->second.empty()) {
      throw std::invalid_argument("balance_classes: no source utterances for intent '" +
                                  intent + "'");
    }
    const std::vector<AnnotatedUtterance>& pool = source_it->second;
    for (std::size_t i = 0; i < deficit; ++i) {
      AnnotatedUtterance copy = pool[i % pool.size()];
      copy.provenance = Provenance::CopiedForBalance;
      result.dataset.push_back(std::move(copy));
    }
    result.copied_per_intent[intent] = deficit;
  }
  return result;
}

// ---- pass-rate accounting ---------------------------------------------------

bool FilterTrace::passed_all() const {
  for (const StageVerdict& sv : stages) {
    if (!sv.verdict.passed) return false;
  }
  return true;
}

std::optional<double> StageTally::rate() const {
  if (evaluated == 0) return std::nullopt;
  return static_cast<double>(passed) / static_cast<double>(evaluated);
}

std::optional<double> GroupTally::cascaded_rate() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(cascaded_passed) / static_cast<double>(total);
}

std::optional<double> PassRateReport::cascaded_rate() const {
  if (total == 0) return std::nullopt;
  return static_cast<double>(cascaded_passed) / static_cast<double>(total);
}

namespace {

void tally_stage(std::vector<StageTally>& stages, const StageVerdict& sv) {
  StageTally* tally = nullptr;
  for (StageTally& s : stages) {
    if (s.name == sv.stage) {
      tally = &s;
      break;
    }
  }
  if (tally == nullptr) {
    stages.push_back(StageTally{sv.stage, 0, 0, {}});
    tally = &stages.back();
  }
  ++tally->evaluated;
  if (sv.verdict.passed) {
    ++tally->passed;
  } else if (sv.verdict.reason) {
    ++tally->reasons[*sv.verdict.reason];
  }
}

std::string format_rate(std::optional<double> rate) {
  if (!rate) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", *rate * 100.0);
  return buf;
}

}  // namespace

PassRateReport pass_rate_report(const std::vector<FilterTrace>& traces) {
  PassRateReport report;
  report.total = traces.size();
  for (const FilterTrace& trace : traces) {
    GroupTally& by_lang = report.per_language[trace.language];
    GroupTally& by_intent = report.per_intent[trace.intent];
    ++by_lang.total;
    ++by_intent.total;
    for (const StageVerdict& sv : trace.stages) {
      tally_stage(report.stages, sv);
      tally_stage(by_lang.stages, sv);
      tally_stage(by_intent.stages, sv);
    }
    if (trace.passed_all()) {
      ++report.cascaded_passed;
      ++by_lang.cascaded_passed;
      ++by_intent.cascaded_passed;
    }
  }
  return report;
}

std::string PassRateReport::to_table() const {
  std::string out;
  out += "Group";
  for (const StageTally& s : stages) out += "\t" + s.name + " Pass Rate";
  out += "\tCascaded Pass Rate\tKept\tCopied\tTotal\n";

  auto emit_row = [&](const std::string& name, const std::vector<StageTally>& row_stages,
                      std::size_t row_total, std::size_t row_passed,
                      std::optional<std::size_t> row_copied) {
    out += name;
    for (const StageTally& s : stages) {
      const StageTally* found = nullptr;
      for (const StageTally& rs : row_stages) {
        if (rs.name == s.name) found = &rs;
      }
      out += "\t" + (found ? format_rate(found->rate()) : std::string("-"));
    }
    if (row_total == 0) {
      out += "\t-";
    } else {
      out += "\t" + format_rate(static_cast<double>(row_passed) /
                                static_cast<double>(row_total));
    }
    out += "\t" + std::to_string(row_passed);
    // Copied counts are tracked for the run as a whole, not per group.
    out += "\t" + (row_copied ? std::to_string(*row_copied) : std::string("-"));
    out += "\t" + (row_copied ? std::to_string(row_passed + *row_copied) : std::string("-"));
    out += "\n";
  };

  for (const auto& [language, tally] : per_language) {
    emit_row(language, tally.stages, tally.total, tally.cascaded_passed, std::nullopt);
  }
  emit_row("all", stages, total, cascaded_passed, copied);
  return out;
}

}  // namespace linguist
