#include "linguist/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "linguist/digest.hpp"

namespace linguist {

namespace {

constexpr std::size_t kMaxCoverageAttempts = 1000;

std::set<std::string> slot_types_of(const Corpus& corpus,
                                    const std::vector<std::size_t>& rows) {
  std::set<std::string> types;
  for (std::size_t row : rows) {
    for (const SlotSpan& span : corpus.row(row).spans) types.insert(span.label);
  }
  return types;
}

}  // namespace

NifsSplit nifs_split(const Corpus& corpus, const NifsConfig& cfg) {
  const std::vector<std::size_t> pool = corpus.rows_with_intent(cfg.target_intent);
  if (pool.empty()) {
    throw CorpusError("target intent '" + cfg.target_intent + "' not present in corpus");
  }

  NifsSplit split;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.row(i).intent != cfg.target_intent) split.other_rows.push_back(i);
  }

  if (cfg.explicit_row_ids) {
    std::set<std::size_t> chosen;
    for (std::size_t id : *cfg.explicit_row_ids) {
      if (id >= corpus.size()) {
        throw CorpusError("explicit row ID " + std::to_string(id) + " out of range (size " +
                          std::to_string(corpus.size()) + ")");
      }
      if (corpus.row(id).intent != cfg.target_intent) {
        throw CorpusError("explicit row carries intent '" + corpus.row(id).intent +
                              "', expected '" + cfg.target_intent + "'",
                          id);
      }
      if (!chosen.insert(id).second) {
        throw CorpusError("explicit row ID " + std::to_string(id) + " listed twice");
      }
      split.starter_rows.push_back(id);
    }
    for (std::size_t row : pool) {
      if (chosen.count(row) == 0) split.remainder_rows.push_back(row);
    }
    return split;
  }

  const std::size_t k = cfg.k_starters;
  if (k > pool.size()) {
    throw CorpusError("K=" + std::to_string(k) + " starters requested but intent '" +
                      cfg.target_intent + "' has only " + std::to_string(pool.size()) +
                      " rows");
  }
  const std::set<std::string> required = slot_types_of(corpus, pool);
  if (required.size() > k) {
    throw CorpusError("coverage unsatisfiable: intent '" + cfg.target_intent + "' has " +
                      std::to_string(required.size()) + " slot types but K=" +
                      std::to_string(k));
  }

  for (std::size_t attempt = 0; attempt < kMaxCoverageAttempts; ++attempt) {
    Rng rng = Rng::substream(cfg.seed, attempt);
    std::vector<std::size_t> candidates = pool;
    rng.shuffle(candidates);
    candidates.resize(k);
    if (slot_types_of(corpus, candidates) == required) {
      std::sort(candidates.begin(), candidates.end());
      split.starter_rows = candidates;
      const std::set<std::size_t> chosen(candidates.begin(), candidates.end());
      for (std::size_t row : pool) {
        if (chosen.count(row) == 0) split.remainder_rows.push_back(row);
      }
      return split;
    }
  }
  throw CorpusError("slot-type coverage not satisfied after " +
                    std::to_string(kMaxCoverageAttempts) + " resampling attempts for intent '" +
                    cfg.target_intent + "'");
}

std::vector<AnnotatedUtterance> materialize(const Corpus& corpus,
                                            const std::vector<std::size_t>& rows) {
  std::vector<AnnotatedUtterance> out;
  out.reserve(rows.size());
  for (std::size_t row : rows) out.push_back(corpus.row(row));
  return out;
}

std::optional<PromptStrategy> strategy_from_string(std::string_view s) {
  if (s == "copy-all" || s == "copy_all") return PromptStrategy::CopyAll;
  if (s == "sample-each" || s == "sample_each") return PromptStrategy::SampleEach;
  if (s == "lno" || s == "label-names-only") return PromptStrategy::LabelNamesOnly;
  return std::nullopt;
}

const char* to_string(PromptStrategy strategy) {
  switch (strategy) {
    case PromptStrategy::CopyAll: return "copy-all";
    case PromptStrategy::SampleEach: return "sample-each";
    case PromptStrategy::LabelNamesOnly: return "lno";
  }
  return "copy-all";
}

TranslationTable load_translation_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open translations file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("invalid translations JSON: ") + e.what());
  }
  if (!doc.is_array()) {
    throw std::runtime_error("translations file must be an array of {label, source, target}");
  }
  TranslationTable table;
  for (const auto& item : doc) {
    if (!item.contains("label") || !item.contains("source") || !item.contains("target")) {
      throw std::runtime_error("translation record needs label/source/target");
    }
    table[{item["label"].get<std::string>(),
           normalize_whitespace(item["source"].get<std::string>())}] =
        split_whitespace(item["target"].get<std::string>());
  }
  return table;
}

namespace {

std::vector<IncludeItem> explicit_include(const AnnotatedUtterance& starter,
                                          const LabelMap& map) {
  std::vector<IncludeItem> include;
  include.reserve(starter.spans.size());
  for (const SlotSpan& span : starter.spans) {
    std::vector<std::string> value(starter.tokens.begin() + static_cast<long>(span.start),
                                   starter.tokens.begin() + static_cast<long>(span.end));
    include.push_back(IncludeItem::with_value(*map.number_of(span.label), std::move(value)));
  }
  return include;
}

void translate_include(std::vector<IncludeItem>& include, const LabelMap& map,
                       const TranslationTable& table) {
  for (IncludeItem& item : include) {
    if (item.is_wildcard()) continue;
    const std::string label = *map.label_of(item.number);
    const auto it = table.find({label, join_tokens(item.value)});
    if (it == table.end()) {
      throw std::invalid_argument("no translated value for slot '" + label + "' value '" +
                                  join_tokens(item.value) + "'");
    }
    item.value = it->second;
  }
}

// Distinct slot types of one starter, in first-occurrence span order.
std::vector<std::string> starter_label_list(const AnnotatedUtterance& starter) {
  std::vector<std::string> labels;
  for (const SlotSpan& span : starter.spans) {
    if (std::find(labels.begin(), labels.end(), span.label) == labels.end()) {
      labels.push_back(span.label);
    }
  }
  return labels;
}

}  // namespace

std::vector<LinguistPrompt> build_inference_prompts(
    const std::vector<AnnotatedUtterance>& starters, PromptStrategy strategy,
    const std::optional<std::string>& target_language,
    const TranslationTable* translated_values) {
  if (starters.empty()) {
    throw std::invalid_argument("cannot build inference prompts from zero starters");
  }
  const std::string intent = starters.front().intent;
  for (const AnnotatedUtterance& s : starters) {
    if (s.intent != intent) {
      throw std::invalid_argument("starters mix intents '" + intent + "' and '" + s.intent +
                                  "'");
    }
  }

  std::vector<LinguistPrompt> prompts;

  if (strategy == PromptStrategy::LabelNamesOnly) {
    std::set<std::vector<std::string>> seen_sets;
    for (const AnnotatedUtterance& starter : starters) {
      const std::vector<std::string> labels = starter_label_list(starter);
      if (labels.empty()) continue;
      std::vector<std::string> key = labels;
      std::sort(key.begin(), key.end());
      if (!seen_sets.insert(key).second) continue;
      LinguistPrompt prompt;
      prompt.language = target_language.value_or(starter.language);
      prompt.domain = starter.domain;
      prompt.intent = intent;
      prompt.labels = LabelMap::for_labels(labels);
      for (const LabelEntry& e : prompt.labels.entries()) {
        prompt.include.push_back(IncludeItem::wildcard(e.number));
      }
      prompts.push_back(std::move(prompt));
    }
    if (prompts.empty()) {
      throw std::invalid_argument("label-names-only: no slot-label combinations in starters");
    }
    return prompts;
  }

  for (std::size_t i = 0; i < starters.size(); ++i) {
    const AnnotatedUtterance& starter = starters[i];
    std::vector<const AnnotatedUtterance*> example_ptrs;
    for (std::size_t j = 0; j < starters.size() && example_ptrs.size() < kMaxPromptExamples;
         ++j) {
      if (j != i) example_ptrs.push_back(&starters[j]);
    }
    const LabelMap map = pair_label_map(starter, example_ptrs);

    // Starters may repeat content; examples within one prompt must not.
    std::vector<std::string> examples;
    examples.reserve(example_ptrs.size());
    for (const AnnotatedUtterance* e : example_ptrs) {
      std::string text = spans_to_bracket(*e, map);
      if (std::find(examples.begin(), examples.end(), text) == examples.end()) {
        examples.push_back(std::move(text));
      }
    }

    LinguistPrompt base;
    base.language = target_language.value_or(starter.language);
    base.domain = starter.domain;
    base.intent = intent;
    base.include = explicit_include(starter, map);
    base.labels = map;
    base.examples = examples;
    if (translated_values != nullptr) {
      translate_include(base.include, map, *translated_values);
    }
    prompts.push_back(base);

    if (strategy == PromptStrategy::SampleEach) {
      for (const std::string& slot_type : starter_label_list(starter)) {
        LinguistPrompt variant = base;
        const int number = *map.number_of(slot_type);
        for (IncludeItem& item : variant.include) {
          if (item.number == number) item = IncludeItem::wildcard(number);
        }
        prompts.push_back(std::move(variant));
      }
    }
  }
  return prompts;
}

std::vector<AnnotatedUtterance> upsample_mix(const std::vector<AnnotatedUtterance>& starters,
                                             const std::vector<AnnotatedUtterance>& generated,
                                             const MixSpec& spec, Rng& rng) {
  if (starters.empty()) throw std::invalid_argument("upsample_mix: starters are empty");
  if (spec.target_size < 1) throw std::invalid_argument("upsample_mix: target_size must be >= 1");
  if (spec.starter_weight < 0.0 || spec.starter_weight > 1.0) {
    throw std::invalid_argument("upsample_mix: starter_weight outside [0,1]");
  }
  std::size_t n_starter;
  if (generated.empty()) {
    n_starter = spec.target_size;
  } else {
    n_starter = static_cast<std::size_t>(
        std::floor(spec.starter_weight * static_cast<double>(spec.target_size) + 0.5));
    n_starter = std::min(n_starter, spec.target_size);
  }
  std::vector<AnnotatedUtterance> out;
  out.reserve(spec.target_size);
  for (std::size_t i = 0; i < n_starter; ++i) {
    AnnotatedUtterance copy = starters[i % starters.size()];
    copy.provenance = Provenance::Upsampled;
    out.push_back(std::move(copy));
  }
  for (std::size_t i = n_starter; i < spec.target_size; ++i) {
    // Drawn rows keep their own provenance (generated or copied-for-balance).
    out.push_back(generated[rng.uniform_index(generated.size())]);
  }
  return out;
}

SlotCatalog load_slot_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open catalog file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("invalid catalog JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("catalog must map labels to value arrays");
  SlotCatalog catalog;
  for (const auto& [label, values] : doc.items()) {
    if (!values.is_array() || values.empty()) {
      throw std::runtime_error("catalog entry '" + label + "' must be a non-empty array");
    }
    for (const auto& v : values) {
      const auto tokens = split_whitespace(v.get<std::string>());
      if (tokens.empty()) {
        throw std::runtime_error("catalog entry '" + label + "' contains an empty value");
      }
      catalog.values[label].push_back(tokens);
    }
  }
  return catalog;
}

std::vector<AnnotatedUtterance> catalog_resample(
    const std::vector<AnnotatedUtterance>& utterances, const SlotCatalog& catalogs,
    std::size_t n_per_utterance, Rng& rng) {
  std::vector<AnnotatedUtterance> out;
  out.reserve(utterances.size() * n_per_utterance);
  for (const AnnotatedUtterance& utt : utterances) {
    for (std::size_t variant = 0; variant < n_per_utterance; ++variant) {
      AnnotatedUtterance fresh;
      fresh.intent = utt.intent;
      fresh.language = utt.language;
      fresh.domain = utt.domain;
      fresh.provenance = Provenance::Generated;
      std::size_t cursor = 0;
      for (const SlotSpan& span : utt.spans) {
        for (std::size_t t = cursor; t < span.start; ++t) fresh.tokens.push_back(utt.tokens[t]);
        const auto catalog_it = catalogs.values.find(span.label);
        std::vector<std::string> value;
        if (catalog_it != catalogs.values.end()) {
          value = catalog_it->second[rng.uniform_index(catalog_it->second.size())];
        } else {
          value.assign(utt.tokens.begin() + static_cast<long>(span.start),
                       utt.tokens.begin() + static_cast<long>(span.end));
        }
        const std::size_t start = fresh.tokens.size();
        fresh.tokens.insert(fresh.tokens.end(), value.begin(), value.end());
        fresh.spans.push_back({span.label, start, fresh.tokens.size()});
        cursor = span.end;
      }
      for (std::size_t t = cursor; t < utt.tokens.size(); ++t) {
        fresh.tokens.push_back(utt.tokens[t]);
      }
      out.push_back(std::move(fresh));
    }
  }
  return out;
}

RowIdFile read_row_id_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open row-ID file: " + path);
  RowIdFile file;
  std::string line;
  while (std::getline(in, line)) {
    const std::string trimmed = normalize_whitespace(line);
    if (trimmed.empty()) continue;
    if (trimmed.rfind("#md5:", 0) == 0) {
      file.md5 = trimmed.substr(5);
      continue;
    }
    if (trimmed[0] == '#') continue;
    try {
      file.ids.push_back(static_cast<std::size_t>(std::stoull(trimmed)));
    } catch (const std::exception&) {
      throw CorpusError("invalid row ID line: '" + trimmed + "'");
    }
  }
  return file;
}

std::string starter_checksum(const Corpus& corpus, const std::vector<std::size_t>& ids) {
  std::string payload;
  for (std::size_t id : ids) {
    const AnnotatedUtterance& utt = corpus.row(id);
    payload += spans_to_bracket(utt, natural_label_map(utt));
    payload += '\n';
  }
  return md5_hex(payload);
}

void write_row_id_file(const std::string& path, const std::vector<std::size_t>& ids,
                       const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write row-ID file: " + path);
  for (std::size_t id : ids) out << id << '\n';
  out << "#md5:" << starter_checksum(corpus, ids) << '\n';
}

void verify_row_ids(const RowIdFile& file, const Corpus& corpus) {
  for (std::size_t id : file.ids) {
    if (id >= corpus.size()) {
      throw CorpusError("row ID " + std::to_string(id) + " out of range (size " +
                        std::to_string(corpus.size()) + ")");
    }
  }
  if (file.md5) {
    const std::string actual = starter_checksum(corpus, file.ids);
    if (actual != *file.md5) {
      throw CorpusError("row-ID checksum mismatch: file says " + *file.md5 + ", corpus gives " +
                        actual);
    }
  }
}

}  // namespace linguist
