#include "linguist/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace linguist {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

// Opening token "[<digits>"; returns the number or nullopt.
std::optional<int> bracket_open_number(std::string_view tok) {
  if (tok.size() < 2 || tok[0] != '[') return std::nullopt;
  const std::string_view digits = tok.substr(1);
  if (!all_digits(digits)) return std::nullopt;
  if (digits.size() > 6) return std::nullopt;  // guards int overflow
  int value = 0;
  for (char c : digits) value = value * 10 + (c - '0');
  if (value <= 0) return std::nullopt;
  return value;
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Original: return "original";
    case Provenance::Upsampled: return "upsampled";
    case Provenance::Generated: return "generated";
    case Provenance::CopiedForBalance: return "copied-for-balance";
  }
  return "original";
}

std::optional<Provenance> provenance_from_string(std::string_view s) {
  if (s == "original") return Provenance::Original;
  if (s == "upsampled") return Provenance::Upsampled;
  if (s == "generated") return Provenance::Generated;
  if (s == "copied-for-balance") return Provenance::CopiedForBalance;
  return std::nullopt;
}

std::string AnnotatedUtterance::text() const { return join_tokens(tokens); }

std::optional<std::string> utterance_violation(const AnnotatedUtterance& utt) {
  std::size_t previous_end = 0;
  for (std::size_t i = 0; i < utt.spans.size(); ++i) {
    const SlotSpan& span = utt.spans[i];
    if (span.label.empty()) return "span " + std::to_string(i) + " has empty label";
    if (span.start >= span.end) {
      return "span " + std::to_string(i) + " is empty or inverted (start " +
             std::to_string(span.start) + ", end " + std::to_string(span.end) + ")";
    }
    if (span.end > utt.tokens.size()) {
      return "span " + std::to_string(i) + " ends at " + std::to_string(span.end) +
             " past " + std::to_string(utt.tokens.size()) + " tokens";
    }
    if (i > 0 && span.start < previous_end) {
      return "span " + std::to_string(i) + " overlaps previous span";
    }
    if (i > 0 && span.start < utt.spans[i - 1].start) {
      return "spans not sorted by start index";
    }
    previous_end = span.end;
  }
  for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
    if (utt.tokens[i].empty()) return "token " + std::to_string(i) + " is empty";
  }
  return std::nullopt;
}

LabelMap::LabelMap(std::vector<LabelEntry> entries) : entries_(std::move(entries)) {
  int previous = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const LabelEntry& e = entries_[i];
    if (i == 0 && e.number != 1) {
      throw std::invalid_argument("label map must start at number 1");
    }
    if (e.number <= previous) {
      throw std::invalid_argument("label map numbers must increase strictly");
    }
    if (e.label.empty()) throw std::invalid_argument("label map entry has empty label");
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[j].label == e.label) {
        throw std::invalid_argument("duplicate label in map: " + e.label);
      }
    }
    previous = e.number;
  }
}

LabelMap LabelMap::for_labels(const std::vector<std::string>& labels) {
  std::vector<LabelEntry> entries;
  entries.reserve(labels.size());
  int number = 1;
  for (const std::string& label : labels) entries.push_back({number++, label});
  return LabelMap(std::move(entries));
}

std::optional<std::string> LabelMap::label_of(int number) const {
  for (const LabelEntry& e : entries_) {
    if (e.number == number) return e.label;
  }
  return std::nullopt;
}

std::optional<int> LabelMap::number_of(std::string_view label) const {
  for (const LabelEntry& e : entries_) {
    if (e.label == label) return e.number;
  }
  return std::nullopt;
}

LabelMap natural_label_map(const AnnotatedUtterance& utt) {
  std::vector<std::string> labels;
  for (const SlotSpan& span : utt.spans) {
    if (std::find(labels.begin(), labels.end(), span.label) == labels.end()) {
      labels.push_back(span.label);
    }
  }
  return LabelMap::for_labels(labels);
}

CorpusError::CorpusError(const std::string& message, std::optional<std::size_t> row)
    : std::runtime_error(row ? "row " + std::to_string(*row) + ": " + message : message),
      row_(row) {}

Corpus::Corpus(std::vector<AnnotatedUtterance> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (auto violation = utterance_violation(rows_[i])) {
      throw CorpusError(*violation, i);
    }
  }
}

const AnnotatedUtterance& Corpus::row(std::size_t i) const {
  if (i >= rows_.size()) {
    throw CorpusError("row index " + std::to_string(i) + " out of range (size " +
                      std::to_string(rows_.size()) + ")");
  }
  return rows_[i];
}

std::vector<std::string> Corpus::intents() const {
  std::vector<std::string> out;
  for (const AnnotatedUtterance& u : rows_) {
    if (std::find(out.begin(), out.end(), u.intent) == out.end()) out.push_back(u.intent);
  }
  return out;
}

std::vector<std::string> Corpus::slot_labels(std::string_view intent) const {
  std::vector<std::string> out;
  for (const AnnotatedUtterance& u : rows_) {
    if (u.intent != intent) continue;
    for (const SlotSpan& span : u.spans) {
      if (std::find(out.begin(), out.end(), span.label) == out.end()) {
        out.push_back(span.label);
      }
    }
  }
  return out;
}

std::vector<std::size_t> Corpus::rows_with_intent(std::string_view intent) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].intent == intent) out.push_back(i);
  }
  return out;
}

std::optional<CorpusFormat> corpus_format_from_string(std::string_view s) {
  if (s == "jsonl") return CorpusFormat::Jsonl;
  if (s == "snips-json") return CorpusFormat::SnipsJson;
  return std::nullopt;
}

namespace {

AnnotatedUtterance utterance_from_json(const nlohmann::json& j, std::size_t row) {
  if (!j.is_object()) throw CorpusError("record is not a JSON object", row);
  AnnotatedUtterance utt;
  if (!j.contains("tokens") || !j["tokens"].is_array()) {
    throw CorpusError("missing or non-array 'tokens' field", row);
  }
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) throw CorpusError("non-string token", row);
    utt.tokens.push_back(t.get<std::string>());
  }
  if (j.contains("spans")) {
    if (!j["spans"].is_array()) throw CorpusError("'spans' is not an array", row);
    for (const auto& s : j["spans"]) {
      if (!s.is_object() || !s.contains("label") || !s.contains("start") || !s.contains("end")) {
        throw CorpusError("span needs label/start/end", row);
      }
      SlotSpan span;
      span.label = s["label"].get<std::string>();
      const long long start = s["start"].get<long long>();
      const long long end = s["end"].get<long long>();
      if (start < 0 || end < 0) throw CorpusError("negative span index", row);
      span.start = static_cast<std::size_t>(start);
      span.end = static_cast<std::size_t>(end);
      utt.spans.push_back(span);
    }
  }
  if (!j.contains("intent") || !j["intent"].is_string()) {
    throw CorpusError("missing or non-string 'intent' field", row);
  }
  utt.intent = j["intent"].get<std::string>();
  if (!j.contains("language") || !j["language"].is_string()) {
    throw CorpusError("missing or non-string 'language' field", row);
  }
  utt.language = j["language"].get<std::string>();
  if (j.contains("domain") && !j["domain"].is_null()) {
    utt.domain = j["domain"].get<std::string>();
  }
  if (j.contains("provenance")) {
    const auto p = provenance_from_string(j["provenance"].get<std::string>());
    if (!p) throw CorpusError("unknown provenance '" + j["provenance"].get<std::string>() + "'", row);
    utt.provenance = *p;
  }
  if (auto violation = utterance_violation(utt)) throw CorpusError(*violation, row);
  return utt;
}

nlohmann::json utterance_to_json(const AnnotatedUtterance& utt) {
  nlohmann::json j;
  j["tokens"] = utt.tokens;
  nlohmann::json spans = nlohmann::json::array();
  for (const SlotSpan& s : utt.spans) {
    spans.push_back({{"label", s.label}, {"start", s.start}, {"end", s.end}});
  }
  j["spans"] = spans;
  j["intent"] = utt.intent;
  j["language"] = utt.language;
  if (utt.domain) j["domain"] = *utt.domain;
  j["provenance"] = to_string(utt.provenance);
  return j;
}

Corpus load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path);
  std::vector<AnnotatedUtterance> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(utterance_from_json_line(line, rows.size()));
  }
  return Corpus(std::move(rows));
}

Corpus load_corpus_snips(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(std::string("invalid SNIPS JSON: ") + e.what());
  }
  if (!doc.is_object()) throw CorpusError("SNIPS file must be a JSON object keyed by intent");
  std::vector<AnnotatedUtterance> rows;
  for (const auto& [intent, entries] : doc.items()) {
    if (!entries.is_array()) throw CorpusError("intent '" + intent + "' is not an array");
    for (const auto& entry : entries) {
      const std::size_t row = rows.size();
      if (!entry.is_object() || !entry.contains("data") || !entry["data"].is_array()) {
        throw CorpusError("utterance entry needs a 'data' segment array", row);
      }
      AnnotatedUtterance utt;
      utt.intent = intent;
      utt.language = "English";
      for (const auto& segment : entry["data"]) {
        if (!segment.is_object() || !segment.contains("text")) {
          throw CorpusError("segment needs a 'text' field", row);
        }
        const auto segment_tokens = split_whitespace(segment["text"].get<std::string>());
        if (segment_tokens.empty()) continue;
        const std::size_t start = utt.tokens.size();
        utt.tokens.insert(utt.tokens.end(), segment_tokens.begin(), segment_tokens.end());
        if (segment.contains("entity")) {
          utt.spans.push_back(
              {segment["entity"].get<std::string>(), start, utt.tokens.size()});
        }
      }
      if (auto violation = utterance_violation(utt)) throw CorpusError(*violation, row);
      rows.push_back(std::move(utt));
    }
  }
  return Corpus(std::move(rows));
}

}  // namespace

std::string utterance_to_json_line(const AnnotatedUtterance& utt) {
  return utterance_to_json(utt).dump();
}

AnnotatedUtterance utterance_from_json_line(const std::string& line, std::size_t row) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError(std::string("invalid JSON: ") + e.what(), row);
  }
  return utterance_from_json(j, row);
}

Corpus load_corpus(const std::string& path, CorpusFormat format) {
  switch (format) {
    case CorpusFormat::Jsonl: return load_corpus_jsonl(path);
    case CorpusFormat::SnipsJson: return load_corpus_snips(path);
  }
  throw CorpusError("unknown corpus format");
}

void save_utterances_jsonl(const std::vector<AnnotatedUtterance>& rows,
                           const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write corpus file: " + path);
  for (const AnnotatedUtterance& u : rows) out << utterance_to_json_line(u) << '\n';
}

void save_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  save_utterances_jsonl(corpus.rows(), path);
}

std::vector<AnnotatedUtterance> load_utterances_jsonl(const std::string& path) {
  return load_corpus(path, CorpusFormat::Jsonl).rows();
}

const char* to_string(BracketErrorCode code) {
  switch (code) {
    case BracketErrorCode::MalformedBrackets: return "MalformedBrackets";
    case BracketErrorCode::UnknownSlotNumber: return "UnknownSlotNumber";
    case BracketErrorCode::EmptySlot: return "EmptySlot";
  }
  return "MalformedBrackets";
}

std::string spans_to_bracket(const AnnotatedUtterance& utt, const LabelMap& map) {
  std::vector<std::string> out;
  std::size_t next_span = 0;
  for (std::size_t i = 0; i < utt.tokens.size(); ++i) {
    if (next_span < utt.spans.size() && utt.spans[next_span].start == i) {
      const SlotSpan& span = utt.spans[next_span];
      const auto number = map.number_of(span.label);
      if (!number) {
        throw std::invalid_argument("slot label not in label map: " + span.label);
      }
      out.push_back("[" + std::to_string(*number));
      for (std::size_t t = span.start; t < span.end; ++t) out.push_back(utt.tokens[t]);
      out.push_back("]");
      i = span.end - 1;
      ++next_span;
    } else {
      out.push_back(utt.tokens[i]);
    }
  }
  return join_tokens(out);
}

NumberedParse parse_numbered_brackets(std::string_view text) {
  NumberedParse result;
  bool open = false;
  int open_number = 0;
  std::size_t open_start = 0;
  for (const std::string& tok : split_whitespace(text)) {
    if (tok == "]") {
      if (!open) {
        result.code = BracketErrorCode::MalformedBrackets;
        result.message = "']' without matching open bracket";
        return result;
      }
      if (result.tokens.size() == open_start) {
        result.code = BracketErrorCode::EmptySlot;
        result.message = "empty bracket body for slot " + std::to_string(open_number);
        return result;
      }
      result.spans.push_back({open_number, open_start, result.tokens.size()});
      open = false;
      continue;
    }
    if (const auto number = bracket_open_number(tok)) {
      if (open) {
        result.code = BracketErrorCode::MalformedBrackets;
        result.message = "nested bracket inside slot " + std::to_string(open_number);
        return result;
      }
      open = true;
      open_number = *number;
      open_start = result.tokens.size();
      continue;
    }
    if (tok.find('[') != std::string::npos || tok.find(']') != std::string::npos) {
      result.code = BracketErrorCode::MalformedBrackets;
      result.message = "stray bracket character in token '" + tok + "'";
      return result;
    }
    result.tokens.push_back(tok);
  }
  if (open) {
    result.code = BracketErrorCode::MalformedBrackets;
    result.message = "unclosed bracket for slot " + std::to_string(open_number);
    return result;
  }
  result.ok = true;
  return result;
}

BracketParse bracket_to_spans(std::string_view text, const LabelMap& map) {
  BracketParse result;
  NumberedParse numbered = parse_numbered_brackets(text);
  if (!numbered.ok) {
    result.code = numbered.code;
    result.message = numbered.message;
    return result;
  }
  result.utterance.tokens = std::move(numbered.tokens);
  for (const NumberedSpan& span : numbered.spans) {
    const auto label = map.label_of(span.number);
    if (!label) {
      result.utterance = AnnotatedUtterance{};
      result.code = BracketErrorCode::UnknownSlotNumber;
      result.message = "slot number " + std::to_string(span.number) + " not in label map";
      return result;
    }
    result.utterance.spans.push_back({*label, span.start, span.end});
  }
  result.ok = true;
  return result;
}

std::vector<std::pair<std::string, std::string>> spans_to_bio(const AnnotatedUtterance& utt) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(utt.tokens.size());
  for (const std::string& tok : utt.tokens) out.emplace_back(tok, "O");
  for (const SlotSpan& span : utt.spans) {
    out[span.start].second = "B-" + span.label;
    for (std::size_t i = span.start + 1; i < span.end; ++i) {
      out[i].second = "I-" + span.label;
    }
  }
  return out;
}

BioDecode bio_to_spans(const std::vector<std::pair<std::string, std::string>>& pairs) {
  BioDecode result;
  std::optional<std::size_t> open_span;  // index into result spans
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [token, tag] = pairs[i];
    result.utterance.tokens.push_back(token);
    if (tag == "O") {
      open_span.reset();
      continue;
    }
    if (tag.size() < 3 || (tag[0] != 'B' && tag[0] != 'I') || tag[1] != '-') {
      throw std::invalid_argument("invalid BIO tag at token " + std::to_string(i) + ": " + tag);
    }
    const std::string label = tag.substr(2);
    if (tag[0] == 'B') {
      result.utterance.spans.push_back({label, i, i + 1});
      open_span = result.utterance.spans.size() - 1;
      continue;
    }
    // I tag: continue the open span, or repair by opening a new one.
    if (open_span && result.utterance.spans[*open_span].label == label) {
      result.utterance.spans[*open_span].end = i + 1;
    } else {
      result.warnings.push_back("token " + std::to_string(i) + ": I-" + label +
                                " follows O or a different label; opened a new span");
      result.utterance.spans.push_back({label, i, i + 1});
      open_span = result.utterance.spans.size() - 1;
    }
  }
  return result;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  return join_tokens(split_whitespace(text));
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

bool contains_token_subsequence(const std::vector<std::string>& haystack,
                                const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + static_cast<long>(i))) {
      return true;
    }
  }
  return false;
}

}  // namespace linguist
