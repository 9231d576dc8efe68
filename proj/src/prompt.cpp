#include "linguist/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "json.hpp"

namespace linguist {

namespace {

const char* kOpenTags[] = {"<language>", "<domain>", "<intent>",
                           "<include>",  "<labels>", "<examples>"};

bool is_known_open_tag(std::string_view tok) {
  for (const char* tag : kOpenTags) {
    if (tok == tag) return true;
  }
  return false;
}

bool is_reserved_token(std::string_view tok) {
  if (is_known_open_tag(tok) || tok == "<br>") return true;
  for (const char* tag : kOpenTags) {
    std::string close = std::string("</") + (tag + 1);
    if (tok == close) return true;
  }
  return false;
}

std::optional<int> include_opener_number(std::string_view tok) {
  if (tok.size() < 2 || tok[0] != '[') return std::nullopt;
  const std::string_view digits = tok.substr(1);
  if (digits.empty() || digits.size() > 6) return std::nullopt;
  if (!std::all_of(digits.begin(), digits.end(),
                   [](unsigned char c) { return std::isdigit(c) != 0; })) {
    return std::nullopt;
  }
  int value = 0;
  for (char c : digits) value = value * 10 + (c - '0');
  if (value <= 0) return std::nullopt;
  return value;
}

struct Token {
  std::string text;
  std::size_t offset = 0;
};

std::vector<Token> tokenize_with_offsets(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back({std::string(text.substr(start, i - start)), start});
  }
  return out;
}

void append_block(std::string& out, const char* tag, const std::string& content) {
  if (!out.empty()) out += ' ';
  out += '<';
  out += tag;
  out += "> ";
  if (!content.empty()) {
    out += content;
    out += ' ';
  }
  out += "</";
  out += tag;
  out += '>';
}

std::string render_include(const std::vector<IncludeItem>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += " , ";
    out += '[' + std::to_string(items[i].number) + ' ';
    out += items[i].is_wildcard() ? "*" : join_tokens(items[i].value);
    out += " ]";
  }
  return out;
}

std::string render_labels(const LabelMap& labels) {
  std::string out;
  const auto& entries = labels.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0) out += " , ";
    out += '[' + std::to_string(entries[i].number) + '=' + entries[i].label;
  }
  return out;
}

// Bracket numbers appearing in an example's canonical text.
std::vector<int> example_numbers(std::string_view example) {
  std::vector<int> out;
  for (const std::string& tok : split_whitespace(example)) {
    if (const auto number = include_opener_number(tok)) out.push_back(*number);
  }
  return out;
}

}  // namespace

IncludeItem IncludeItem::with_value(int number, std::vector<std::string> value) {
  if (value.empty()) throw std::invalid_argument("explicit include value must be non-empty");
  return {number, std::move(value)};
}

std::optional<std::string> prompt_violation(const LinguistPrompt& p) {
  if (p.examples.size() > kMaxPromptExamples) {
    return "more than " + std::to_string(kMaxPromptExamples) + " examples";
  }
  for (std::size_t i = 0; i < p.examples.size(); ++i) {
    if (normalize_whitespace(p.examples[i]) != p.examples[i]) {
      return "example " + std::to_string(i) + " is not whitespace-canonical";
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (p.examples[j] == p.examples[i]) {
        return "duplicate example at index " + std::to_string(i);
      }
    }
    for (int number : example_numbers(p.examples[i])) {
      if (!p.labels.label_of(number)) {
        return "example " + std::to_string(i) + " uses slot number " +
               std::to_string(number) + " absent from labels";
      }
    }
  }
  for (const IncludeItem& item : p.include) {
    if (!p.labels.label_of(item.number)) {
      return "include item uses slot number " + std::to_string(item.number) +
             " absent from labels";
    }
    for (const std::string& tok : item.value) {
      if (is_reserved_token(tok)) return "include value contains reserved token " + tok;
    }
  }
  const std::string fields[] = {p.language, p.domain.value_or(""), p.intent};
  for (const std::string& field : fields) {
    if (normalize_whitespace(field) != field) return "block content is not whitespace-canonical";
    for (const std::string& tok : split_whitespace(field)) {
      if (is_reserved_token(tok)) return "block content contains reserved token " + tok;
    }
  }
  for (const std::string& e : p.examples) {
    for (const std::string& tok : split_whitespace(e)) {
      if (is_reserved_token(tok)) return "example contains reserved token " + tok;
    }
  }
  return std::nullopt;
}

std::string render_prompt(const LinguistPrompt& p) {
  std::string out;
  append_block(out, "language", p.language);
  if (p.domain) append_block(out, "domain", *p.domain);
  append_block(out, "intent", p.intent);
  append_block(out, "include", render_include(p.include));
  append_block(out, "labels", render_labels(p.labels));
  std::string examples;
  for (std::size_t i = 0; i < p.examples.size(); ++i) {
    if (i > 0) examples += " <br> ";
    examples += p.examples[i];
  }
  append_block(out, "examples", examples);
  return out;
}

const char* to_string(PromptErrorCode code) {
  switch (code) {
    case PromptErrorCode::MissingBlock: return "MissingBlock";
    case PromptErrorCode::DuplicateBlock: return "DuplicateBlock";
    case PromptErrorCode::UnclosedBlock: return "UnclosedBlock";
    case PromptErrorCode::MalformedLabelEntry: return "MalformedLabelEntry";
    case PromptErrorCode::MalformedIncludeItem: return "MalformedIncludeItem";
    case PromptErrorCode::MalformedExample: return "MalformedExample";
    case PromptErrorCode::TooManyExamples: return "TooManyExamples";
    case PromptErrorCode::DuplicateExample: return "DuplicateExample";
    case PromptErrorCode::UndeclaredSlotNumber: return "UndeclaredSlotNumber";
    case PromptErrorCode::TrailingContent: return "TrailingContent";
  }
  return "MissingBlock";
}

namespace {

struct BlockReader {
  const std::vector<Token>& toks;
  std::string_view text;
  std::size_t pos = 0;
  PromptParse& result;
  std::vector<std::string> seen_open_tags;

  bool fail(PromptErrorCode code, std::size_t offset, std::string message) {
    result.ok = false;
    result.code = code;
    result.byte_offset = offset;
    result.message = std::move(message);
    return false;
  }

  std::size_t offset_here() const {
    return pos < toks.size() ? toks[pos].offset : text.size();
  }

  // Reads "<tag> content </tag>"; content tokens returned via out.
  bool read_block(const std::string& tag, std::vector<Token>& out) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    if (pos >= toks.size() || toks[pos].text != open) {
      if (pos < toks.size() && is_known_open_tag(toks[pos].text) &&
          std::find(seen_open_tags.begin(), seen_open_tags.end(), toks[pos].text) !=
              seen_open_tags.end()) {
        return fail(PromptErrorCode::DuplicateBlock, toks[pos].offset,
                    "duplicate block " + toks[pos].text);
      }
      return fail(PromptErrorCode::MissingBlock, offset_here(), "expected " + open);
    }
    const std::size_t open_offset = toks[pos].offset;
    seen_open_tags.push_back(open);
    ++pos;
    out.clear();
    while (pos < toks.size() && toks[pos].text != close) {
      if (toks[pos].text == open) {
        return fail(PromptErrorCode::DuplicateBlock, toks[pos].offset,
                    "block " + open + " reopened");
      }
      out.push_back(toks[pos]);
      ++pos;
    }
    if (pos >= toks.size()) {
      return fail(PromptErrorCode::UnclosedBlock, open_offset, "missing " + close);
    }
    ++pos;  // consume close tag
    return true;
  }

  bool peek_open(const std::string& tag) const {
    return pos < toks.size() && toks[pos].text == "<" + tag + ">";
  }
};

std::string join_token_texts(const std::vector<Token>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i > 0) out += ' ';
    out += toks[i].text;
  }
  return out;
}

bool parse_include_block(BlockReader& reader, const std::vector<Token>& toks,
                         std::vector<IncludeItem>& items,
                         std::vector<std::size_t>& item_offsets) {
  std::size_t i = 0;
  while (i < toks.size()) {
    const auto number = include_opener_number(toks[i].text);
    if (!number) {
      return reader.fail(PromptErrorCode::MalformedIncludeItem, toks[i].offset,
                         "expected '[<number>' opener, got '" + toks[i].text + "'");
    }
    const std::size_t opener_offset = toks[i].offset;
    ++i;
    std::vector<std::string> value;
    while (i < toks.size() && toks[i].text != "]") {
      const std::string& tok = toks[i].text;
      if (tok.find('[') != std::string::npos || tok.find(']') != std::string::npos) {
        return reader.fail(PromptErrorCode::MalformedIncludeItem, toks[i].offset,
                           "bracket character inside include value");
      }
      value.push_back(tok);
      ++i;
    }
    if (i >= toks.size()) {
      return reader.fail(PromptErrorCode::MalformedIncludeItem, opener_offset,
                         "include item missing closing ']'");
    }
    ++i;  // ']'
    if (value.empty()) {
      return reader.fail(PromptErrorCode::MalformedIncludeItem, opener_offset,
                         "include item has empty value");
    }
    if (value.size() == 1 && value[0] == "*") {
      items.push_back(IncludeItem::wildcard(*number));
    } else {
      items.push_back({*number, std::move(value)});
    }
    item_offsets.push_back(opener_offset);
    if (i < toks.size() && toks[i].text == ",") {
      const std::size_t comma_offset = toks[i].offset;
      ++i;
      if (i >= toks.size()) {
        return reader.fail(PromptErrorCode::MalformedIncludeItem, comma_offset,
                           "trailing ',' in include block");
      }
    }
  }
  return true;
}

bool parse_labels_block(BlockReader& reader, const std::vector<Token>& toks, LabelMap& map) {
  std::vector<LabelEntry> entries;
  std::size_t i = 0;
  int previous = 0;
  while (i < toks.size()) {
    const std::string& tok = toks[i].text;
    const std::size_t offset = toks[i].offset;
    if (tok.size() < 4 || tok[0] != '[') {
      return reader.fail(PromptErrorCode::MalformedLabelEntry, offset,
                         "expected '[<number>=<label>', got '" + tok + "'");
    }
    const std::size_t eq = tok.find('=');
    if (eq == std::string::npos || eq < 2 || eq + 1 >= tok.size()) {
      return reader.fail(PromptErrorCode::MalformedLabelEntry, offset,
                         "label entry missing '=<label>': '" + tok + "'");
    }
    const std::string digits = tok.substr(1, eq - 1);
    if (digits.size() > 6 ||
        !std::all_of(digits.begin(), digits.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; })) {
      return reader.fail(PromptErrorCode::MalformedLabelEntry, offset,
                         "label entry number is not numeric: '" + tok + "'");
    }
    int number = 0;
    for (char c : digits) number = number * 10 + (c - '0');
    const std::string label = tok.substr(eq + 1);
    if (entries.empty() && number != 1) {
      return reader.fail(PromptErrorCode::MalformedLabelEntry, offset,
                         "label numbering must start at 1");
    }
    if (number <= previous) {
      return reader.fail(PromptErrorCode::MalformedLabelEntry, offset,
                         "label numbers must increase strictly");
    }
    for (const LabelEntry& e : entries) {
      if (e.label == label) {
        return reader.fail(PromptErrorCode::MalformedLabelEntry, offset,
                           "duplicate label '" + label + "'");
      }
    }
    entries.push_back({number, label});
    previous = number;
    ++i;
    if (i < toks.size() && toks[i].text == ",") {
      const std::size_t comma_offset = toks[i].offset;
      ++i;
      if (i >= toks.size()) {
        return reader.fail(PromptErrorCode::MalformedLabelEntry, comma_offset,
                           "trailing ',' in labels block");
      }
    }
  }
  map = LabelMap(std::move(entries));
  return true;
}

bool parse_examples_block(BlockReader& reader, const std::vector<Token>& toks,
                          std::vector<std::string>& examples,
                          std::vector<std::size_t>& example_offsets) {
  if (toks.empty()) return true;
  std::vector<Token> segment;
  std::size_t segment_start = toks.empty() ? 0 : toks[0].offset;
  auto flush = [&](std::size_t boundary_offset) -> bool {
    if (segment.empty()) {
      return reader.fail(PromptErrorCode::MalformedExample, boundary_offset,
                         "empty example segment");
    }
    examples.push_back(join_token_texts(segment));
    example_offsets.push_back(segment_start);
    segment.clear();
    return true;
  };
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].text == "<br>") {
      if (!flush(toks[i].offset)) return false;
      segment_start = i + 1 < toks.size() ? toks[i + 1].offset : toks[i].offset;
    } else {
      if (segment.empty()) segment_start = toks[i].offset;
      segment.push_back(toks[i]);
    }
  }
  if (!flush(toks.empty() ? 0 : toks.back().offset)) return false;
  return true;
}

}  // namespace

PromptParse parse_prompt(std::string_view text) {
  PromptParse result;
  const std::vector<Token> toks = tokenize_with_offsets(text);
  BlockReader reader{toks, text, 0, result, {}};

  std::vector<Token> content;
  if (!reader.read_block("language", content)) return result;
  result.prompt.language = join_token_texts(content);

  if (reader.peek_open("domain")) {
    if (!reader.read_block("domain", content)) return result;
    result.prompt.domain = join_token_texts(content);
  }

  if (!reader.read_block("intent", content)) return result;
  result.prompt.intent = join_token_texts(content);

  if (!reader.read_block("include", content)) return result;
  std::vector<std::size_t> include_offsets;
  if (!parse_include_block(reader, content, result.prompt.include, include_offsets)) {
    return result;
  }

  if (!reader.read_block("labels", content)) return result;
  try {
    if (!parse_labels_block(reader, content, result.prompt.labels)) return result;
  } catch (const std::invalid_argument& e) {
    reader.fail(PromptErrorCode::MalformedLabelEntry,
                content.empty() ? 0 : content[0].offset, e.what());
    return result;
  }

  if (!reader.read_block("examples", content)) return result;
  std::vector<std::size_t> example_offsets;
  if (!parse_examples_block(reader, content, result.prompt.examples, example_offsets)) {
    return result;
  }

  if (reader.pos < toks.size()) {
    const Token& extra = toks[reader.pos];
    if (is_known_open_tag(extra.text)) {
      reader.fail(PromptErrorCode::DuplicateBlock, extra.offset,
                  "block " + extra.text + " out of order or duplicated");
    } else {
      reader.fail(PromptErrorCode::TrailingContent, extra.offset,
                  "unexpected content after </examples>");
    }
    return result;
  }

  if (result.prompt.examples.size() > kMaxPromptExamples) {
    reader.fail(PromptErrorCode::TooManyExamples,
                example_offsets[kMaxPromptExamples],
                std::to_string(result.prompt.examples.size()) + " examples (max " +
                    std::to_string(kMaxPromptExamples) + ")");
    return result;
  }
  for (std::size_t i = 0; i < result.prompt.examples.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (result.prompt.examples[j] == result.prompt.examples[i]) {
        reader.fail(PromptErrorCode::DuplicateExample, example_offsets[i],
                    "example " + std::to_string(i) + " duplicates example " +
                        std::to_string(j));
        return result;
      }
    }
  }
  for (std::size_t i = 0; i < result.prompt.include.size(); ++i) {
    if (!result.prompt.labels.label_of(result.prompt.include[i].number)) {
      reader.fail(PromptErrorCode::UndeclaredSlotNumber, include_offsets[i],
                  "include slot number " +
                      std::to_string(result.prompt.include[i].number) +
                      " not declared in labels");
      return result;
    }
  }
  for (std::size_t i = 0; i < result.prompt.examples.size(); ++i) {
    for (int number : example_numbers(result.prompt.examples[i])) {
      if (!result.prompt.labels.label_of(number)) {
        reader.fail(PromptErrorCode::UndeclaredSlotNumber, example_offsets[i],
                    "example slot number " + std::to_string(number) +
                        " not declared in labels");
        return result;
      }
    }
  }

  result.ok = true;
  return result;
}

std::optional<std::string> format_config_violation(const FormatConfig& cfg) {
  if (cfg.label_dropout_rate < 0.0 || cfg.label_dropout_rate > 1.0) {
    return "label_dropout_rate outside [0,1]";
  }
  if (cfg.wildcard_geom_p < 0.0 || cfg.wildcard_geom_p > 1.0) {
    return "wildcard_geom_p outside [0,1]";
  }
  if (cfg.max_examples < 0) return "max_examples negative";
  return std::nullopt;
}

std::vector<std::size_t> sample_examples(const Corpus& corpus, std::size_t target_index,
                                         const FormatConfig& cfg, Rng& rng) {
  const AnnotatedUtterance& target = corpus.row(target_index);
  std::vector<std::size_t> pool;
  for (std::size_t i : corpus.rows_with_intent(target.intent)) {
    if (i != target_index) pool.push_back(i);
  }
  std::size_t cap = kMaxPromptExamples;
  cap = std::min(cap, static_cast<std::size_t>(std::max(cfg.max_examples, 0)));
  const std::size_t kmax = std::min(pool.size(), cap);
  const std::size_t k = rng.uniform_index(kmax + 1);
  rng.shuffle(pool);
  pool.resize(k);
  return pool;
}

std::vector<IncludeItem> assign_wildcards(std::vector<IncludeItem> items, double p, Rng& rng) {
  if (p <= 0.0) return items;
  std::vector<std::size_t> explicit_positions;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].is_wildcard()) explicit_positions.push_back(i);
  }
  const std::size_t n = explicit_positions.size();
  if (n == 0) return items;
  std::size_t kept = 0;
  while (kept < n && !rng.bernoulli(p)) ++kept;
  rng.shuffle(explicit_positions);
  for (std::size_t i = kept; i < n; ++i) {
    items[explicit_positions[i]] = IncludeItem::wildcard(items[explicit_positions[i]].number);
  }
  return items;
}

namespace {

std::string random_mask(Rng& rng) {
  const std::size_t letters = 1 + rng.uniform_index(5);
  std::string mask;
  for (std::size_t i = 0; i < letters; ++i) {
    if (i > 0) mask += '_';
    mask += static_cast<char>('A' + rng.uniform_index(26));
  }
  return mask;
}

}  // namespace

std::pair<LinguistPrompt, std::string> apply_label_dropout(LinguistPrompt prompt,
                                                           std::string target, double rate,
                                                           Rng& rng) {
  std::vector<std::string> names;
  names.push_back(prompt.intent);
  for (const LabelEntry& e : prompt.labels.entries()) {
    if (std::find(names.begin(), names.end(), e.label) == names.end()) {
      names.push_back(e.label);
    }
  }
  std::set<std::string> taken(names.begin(), names.end());
  std::vector<std::pair<std::string, std::string>> masks;  // name -> mask
  for (const std::string& name : names) {
    if (!rng.bernoulli(rate)) continue;
    std::string mask = random_mask(rng);
    while (taken.count(mask) > 0) mask = random_mask(rng);
    taken.insert(mask);
    masks.emplace_back(name, mask);
  }
  auto masked = [&](const std::string& name) -> const std::string& {
    for (const auto& [original, mask] : masks) {
      if (original == name) return mask;
    }
    return name;
  };
  prompt.intent = masked(prompt.intent);
  std::vector<LabelEntry> entries = prompt.labels.entries();
  for (LabelEntry& e : entries) e.label = masked(e.label);
  prompt.labels = LabelMap(std::move(entries));
  return {std::move(prompt), std::move(target)};
}

LabelMap pair_label_map(const AnnotatedUtterance& target,
                        const std::vector<const AnnotatedUtterance*>& examples) {
  std::vector<std::string> labels;
  auto add = [&](const std::string& label) {
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) {
      labels.push_back(label);
    }
  };
  for (const SlotSpan& span : target.spans) add(span.label);
  for (const AnnotatedUtterance* e : examples) {
    for (const SlotSpan& span : e->spans) add(span.label);
  }
  return LabelMap::for_labels(labels);
}

Corpus dedup_corpus(const Corpus& corpus) {
  std::set<std::string> seen;
  std::vector<AnnotatedUtterance> rows;
  for (const AnnotatedUtterance& u : corpus.rows()) {
    std::string key = u.intent + '\x1f' + u.text();
    for (const SlotSpan& span : u.spans) {
      key += '\x1f' + span.label + ':' + std::to_string(span.start) + '-' +
             std::to_string(span.end);
    }
    if (seen.insert(std::move(key)).second) rows.push_back(u);
  }
  return Corpus(std::move(rows));
}

std::vector<TrainingPair> build_training_pairs(const Corpus& corpus, const FormatConfig& cfg) {
  if (auto violation = format_config_violation(cfg)) {
    throw std::invalid_argument("format config: " + *violation);
  }
  const Corpus deduped = dedup_corpus(corpus);
  std::vector<TrainingPair> pairs;
  pairs.reserve(deduped.size());
  for (std::size_t i = 0; i < deduped.size(); ++i) {
    Rng rng = Rng::substream(cfg.rng_seed, i);
    const AnnotatedUtterance& target = deduped.row(i);

    const std::vector<std::size_t> example_rows = sample_examples(deduped, i, cfg, rng);
    std::vector<const AnnotatedUtterance*> example_ptrs;
    example_ptrs.reserve(example_rows.size());
    for (std::size_t row : example_rows) example_ptrs.push_back(&deduped.row(row));

    const LabelMap map = pair_label_map(target, example_ptrs);

    std::vector<IncludeItem> include;
    include.reserve(target.spans.size());
    for (const SlotSpan& span : target.spans) {
      std::vector<std::string> value(target.tokens.begin() + static_cast<long>(span.start),
                                     target.tokens.begin() + static_cast<long>(span.end));
      include.push_back(IncludeItem::with_value(*map.number_of(span.label), std::move(value)));
    }
    include = assign_wildcards(std::move(include), cfg.wildcard_geom_p, rng);

    std::vector<std::string> examples;
    examples.reserve(example_ptrs.size());
    for (const AnnotatedUtterance* e : example_ptrs) {
      examples.push_back(spans_to_bracket(*e, map));
    }

    LinguistPrompt prompt;
    prompt.language = target.language;
    prompt.domain = target.domain;
    prompt.intent = target.intent;
    prompt.include = std::move(include);
    prompt.labels = map;
    prompt.examples = std::move(examples);

    std::string target_text = spans_to_bracket(target, map);
    auto [dropped_prompt, dropped_target] =
        apply_label_dropout(std::move(prompt), std::move(target_text),
                            cfg.label_dropout_rate, rng);
    pairs.push_back({std::move(dropped_prompt), std::move(dropped_target), target.intent,
                     target.language});
  }
  return pairs;
}

void write_training_pairs_jsonl(const std::vector<TrainingPair>& pairs, std::uint64_t seed,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write training pairs file: " + path);
  for (const TrainingPair& pair : pairs) {
    nlohmann::json j;
    j["prompt_text"] = render_prompt(pair.prompt);
    j["target_text"] = pair.target;
    j["metadata"] = {{"intent", pair.source_intent},
                     {"language", pair.source_language},
                     {"seed", seed}};
    out << j.dump() << '\n';
  }
}

}  // namespace linguist
