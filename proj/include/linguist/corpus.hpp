#pragma once
// Annotated-utterance data model: typed token spans, bracket text, BIO tags,
// and corpus files (JSONL and SNIPS-style nested JSON).

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace linguist {

enum class Provenance { Original, Upsampled, Generated, CopiedForBalance };

std::string to_string(Provenance p);
std::optional<Provenance> provenance_from_string(std::string_view s);

struct SlotSpan {
  std::string label;
  std::size_t start = 0;  // token index, inclusive
  std::size_t end = 0;    // token index, exclusive
  bool operator==(const SlotSpan&) const = default;
};

struct AnnotatedUtterance {
  std::vector<std::string> tokens;
  std::vector<SlotSpan> spans;  // sorted by start, non-overlapping
  std::string intent;
  std::string language;
  std::optional<std::string> domain;
  Provenance provenance = Provenance::Original;

  bool operator==(const AnnotatedUtterance&) const = default;

  // Surface text: tokens joined with single spaces.
  std::string text() const;
};

// nullopt when every invariant holds, otherwise a description of the violation.
std::optional<std::string> utterance_violation(const AnnotatedUtterance& utt);

struct LabelEntry {
  int number = 0;
  std::string label;
  bool operator==(const LabelEntry&) const = default;
};

// Numbered slot-label table. Numbers start at 1 and increase strictly; labels
// are unique. Violations throw std::invalid_argument at construction.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(std::vector<LabelEntry> entries);
  static LabelMap for_labels(const std::vector<std::string>& labels);

  const std::vector<LabelEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::optional<std::string> label_of(int number) const;
  std::optional<int> number_of(std::string_view label) const;
  bool operator==(const LabelMap&) const = default;

 private:
  std::vector<LabelEntry> entries_;
};

// Map numbering the utterance's own slot labels 1..n in span order.
LabelMap natural_label_map(const AnnotatedUtterance& utt);

class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& message,
                       std::optional<std::size_t> row = std::nullopt);
  std::optional<std::size_t> row() const { return row_; }

 private:
  std::optional<std::size_t> row_;
};

// Ordered utterance collection; row IDs are 0-based positions in file order.
class Corpus {
 public:
  Corpus() = default;
  // Validates every row; throws CorpusError naming the first offending row.
  explicit Corpus(std::vector<AnnotatedUtterance> rows);

  const std::vector<AnnotatedUtterance>& rows() const { return rows_; }
  const AnnotatedUtterance& row(std::size_t i) const;
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  // Derived views, in first-appearance order.
  std::vector<std::string> intents() const;
  std::vector<std::string> slot_labels(std::string_view intent) const;
  std::vector<std::size_t> rows_with_intent(std::string_view intent) const;

 private:
  std::vector<AnnotatedUtterance> rows_;
};

enum class CorpusFormat { Jsonl, SnipsJson };

std::optional<CorpusFormat> corpus_format_from_string(std::string_view s);

Corpus load_corpus(const std::string& path, CorpusFormat format);
void save_corpus_jsonl(const Corpus& corpus, const std::string& path);
void save_utterances_jsonl(const std::vector<AnnotatedUtterance>& rows, const std::string& path);
std::vector<AnnotatedUtterance> load_utterances_jsonl(const std::string& path);

std::string utterance_to_json_line(const AnnotatedUtterance& utt);
AnnotatedUtterance utterance_from_json_line(const std::string& line, std::size_t row);

// ---- bracket annotation ----------------------------------------------------

enum class BracketErrorCode { MalformedBrackets, UnknownSlotNumber, EmptySlot };

const char* to_string(BracketErrorCode code);

struct NumberedSpan {
  int number = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const NumberedSpan&) const = default;
};

// Map-independent bracket parse; the filters check slot-number compliance on
// this form before any label resolution.
struct NumberedParse {
  bool ok = false;
  std::vector<std::string> tokens;  // surface tokens, bracket markers removed
  std::vector<NumberedSpan> spans;
  BracketErrorCode code{};
  std::string message;
};

NumberedParse parse_numbered_brackets(std::string_view text);

struct BracketParse {
  bool ok = false;
  AnnotatedUtterance utterance;
  BracketErrorCode code{};
  std::string message;
};

// Renders "[<n> <tokens> ]" segments with single-space separation. Throws
// std::invalid_argument when a span label is missing from the map.
std::string spans_to_bracket(const AnnotatedUtterance& utt, const LabelMap& map);
BracketParse bracket_to_spans(std::string_view text, const LabelMap& map);

// ---- BIO tagging -----------------------------------------------------------

std::vector<std::pair<std::string, std::string>> spans_to_bio(const AnnotatedUtterance& utt);

struct BioDecode {
  AnnotatedUtterance utterance;
  // One entry per repaired I-after-O / I-after-other-label tag.
  std::vector<std::string> warnings;
};

// Throws std::invalid_argument for tags outside {O, B-<label>, I-<label>}.
BioDecode bio_to_spans(const std::vector<std::pair<std::string, std::string>>& pairs);

// ---- small text helpers ----------------------------------------------------

std::vector<std::string> split_whitespace(std::string_view text);
std::string normalize_whitespace(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

// Contiguous token-boundary match; empty needle matches nothing.
bool contains_token_subsequence(const std::vector<std::string>& haystack,
                                const std::vector<std::string>& needle);

}  // namespace linguist
