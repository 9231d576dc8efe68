#pragma once
// Experiment-protocol orchestration: new-intent few-shot splits, inference
// prompt strategies (copy-all, sample-each, label-names-only, cross-lingual),
// up-sample/mix, and slot-catalog resampling.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "linguist/corpus.hpp"
#include "linguist/prompt.hpp"
#include "linguist/rng.hpp"

namespace linguist {

struct NifsConfig {
  std::string target_intent;
  std::size_t k_starters = 10;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::size_t>> explicit_row_ids;
};

struct NifsSplit {
  std::vector<std::size_t> starter_rows;    // K rows of the target intent
  std::vector<std::size_t> remainder_rows;  // target-intent rows left out
  std::vector<std::size_t> other_rows;      // all other intents, untouched
};

// |starters| = K with every slot type of the target intent covered
// (rejection-resampled, bounded attempts). Throws CorpusError when coverage
// is unsatisfiable or explicit rows are invalid.
NifsSplit nifs_split(const Corpus& corpus, const NifsConfig& cfg);

std::vector<AnnotatedUtterance> materialize(const Corpus& corpus,
                                            const std::vector<std::size_t>& rows);

enum class PromptStrategy { CopyAll, SampleEach, LabelNamesOnly };

std::optional<PromptStrategy> strategy_from_string(std::string_view s);
const char* to_string(PromptStrategy strategy);

// (slot label, source value text) -> translated value tokens.
using TranslationTable = std::map<std::pair<std::string, std::string>, std::vector<std::string>>;

TranslationTable load_translation_table(const std::string& path);

// copy_all: one prompt per starter with all values explicit. sample_each:
// additionally one prompt per slot type with that type wildcarded. lno: one
// prompt per distinct starter label set, empty examples, all wildcards.
// Cross-lingual runs substitute translated values and set the language tag.
std::vector<LinguistPrompt> build_inference_prompts(
    const std::vector<AnnotatedUtterance>& starters, PromptStrategy strategy,
    const std::optional<std::string>& target_language = std::nullopt,
    const TranslationTable* translated_values = nullptr);

struct MixSpec {
  double starter_weight = 0.5;
  std::size_t target_size = 1;
};

// Exactly target_size rows: round-half-up(weight * target) cyclic starter
// copies (provenance upsampled) plus generated rows sampled with replacement.
std::vector<AnnotatedUtterance> upsample_mix(const std::vector<AnnotatedUtterance>& starters,
                                             const std::vector<AnnotatedUtterance>& generated,
                                             const MixSpec& spec, Rng& rng);

struct SlotCatalog {
  std::map<std::string, std::vector<std::vector<std::string>>> values;  // label -> value token lists
};

SlotCatalog load_slot_catalog(const std::string& path);

// n variants per utterance with each slot value independently replaced by a
// uniform catalog draw for its label; labels absent from the catalog keep
// their original values. Spans are re-indexed for the new value lengths.
std::vector<AnnotatedUtterance> catalog_resample(
    const std::vector<AnnotatedUtterance>& utterances, const SlotCatalog& catalogs,
    std::size_t n_per_utterance, Rng& rng);

// ---- explicit row-ID files ---------------------------------------------------
// One 0-based integer per line; an optional "#md5:<hex>" line pins the digest
// of the selected rows' newline-terminated bracket texts, in file order.

struct RowIdFile {
  std::vector<std::size_t> ids;
  std::optional<std::string> md5;
};

RowIdFile read_row_id_file(const std::string& path);
void write_row_id_file(const std::string& path, const std::vector<std::size_t>& ids,
                       const Corpus& corpus);
std::string starter_checksum(const Corpus& corpus, const std::vector<std::size_t>& ids);
// Throws CorpusError when the file's checksum is present and does not match.
void verify_row_ids(const RowIdFile& file, const Corpus& corpus);

}  // namespace linguist
