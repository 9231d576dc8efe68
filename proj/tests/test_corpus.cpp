#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "linguist/corpus.hpp"
#include "linguist/digest.hpp"
#include "linguist/rng.hpp"
#include "testutil.hpp"

using namespace linguist;
namespace tu = linguist::testutil;

TEST_CASE("md5 matches known digests") {
  CHECK(md5_hex("") == "d41d8cd98f00b204e9800998ecf8427e");
  CHECK(md5_hex("abc") == "900150983cd24fb0d6963f7d28e17f72");
  CHECK(md5_hex("The quick brown fox jumps over the lazy dog") ==
        "9e107d9d372bb6826bd81d3542a419d6");
}

TEST_CASE("spans_to_bracket renders the one-slot example") {
  AnnotatedUtterance utt;
  utt.tokens = {"get", "zelda"};
  utt.spans = {{"game", 1, 2}};
  const LabelMap map = LabelMap::for_labels({"game"});
  CHECK(spans_to_bracket(utt, map) == "get [1 zelda ]");
}

TEST_CASE("spans_to_bracket leaves span-free text unchanged") {
  AnnotatedUtterance utt;
  utt.tokens = {"play", "some", "music"};
  CHECK(spans_to_bracket(utt, LabelMap{}) == "play some music");
}

TEST_CASE("spans_to_bracket rejects labels missing from the map") {
  AnnotatedUtterance utt;
  utt.tokens = {"get", "zelda"};
  utt.spans = {{"game", 1, 2}};
  CHECK_THROWS_AS(spans_to_bracket(utt, LabelMap{}), std::invalid_argument);
}

TEST_CASE("bracket_to_spans rejects the invalid-bracket shape") {
  const BracketParse parsed = bracket_to_spans("[2 [ ]", LabelMap::for_labels({"a", "b"}));
  CHECK_FALSE(parsed.ok);
  CHECK(parsed.code == BracketErrorCode::MalformedBrackets);
}

TEST_CASE("bracket_to_spans on plain text yields zero spans") {
  const BracketParse parsed = bracket_to_spans("play music", LabelMap{});
  REQUIRE(parsed.ok);
  CHECK(parsed.utterance.tokens == std::vector<std::string>{"play", "music"});
  CHECK(parsed.utterance.spans.empty());
}

TEST_CASE("bracket_to_spans resolves two numbered slots") {
  // Hand-checked: surface tokens are will(0) it(1) rain(2) at(3) noon(4).
  const LabelMap fig_map(std::vector<LabelEntry>{
      {1, "geographic_poi"}, {2, "country"}, {3, "condition_description"}, {4, "city"},
      {5, "timeRange"}});
  const BracketParse parsed =
      bracket_to_spans("will it [3 rain ] at [5 noon ]", fig_map);
  REQUIRE(parsed.ok);
  CHECK(parsed.utterance.tokens ==
        std::vector<std::string>{"will", "it", "rain", "at", "noon"});
  REQUIRE(parsed.utterance.spans.size() == 2);
  CHECK(parsed.utterance.spans[0] == SlotSpan{"condition_description", 2, 3});
  CHECK(parsed.utterance.spans[1] == SlotSpan{"timeRange", 4, 5});
}

TEST_CASE("bracket_to_spans reason codes") {
  const LabelMap map = LabelMap::for_labels({"game"});
  CHECK(bracket_to_spans("get [7 zelda ]", map).code == BracketErrorCode::UnknownSlotNumber);
  CHECK(bracket_to_spans("get [1 ]", map).code == BracketErrorCode::EmptySlot);
  CHECK(bracket_to_spans("get [1 zelda", map).code == BracketErrorCode::MalformedBrackets);
  CHECK(bracket_to_spans("get zelda ]", map).code == BracketErrorCode::MalformedBrackets);
  CHECK(bracket_to_spans("get ze[lda", map).code == BracketErrorCode::MalformedBrackets);
}

TEST_CASE("bracket round-trip holds on 1000 random utterances") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const AnnotatedUtterance utt = tu::random_utterance(rng);
    std::vector<std::string> labels;
    for (const SlotSpan& s : utt.spans) {
      if (std::find(labels.begin(), labels.end(), s.label) == labels.end()) {
        labels.push_back(s.label);
      }
    }
    const LabelMap map = LabelMap::for_labels(labels);
    const std::string text = spans_to_bracket(utt, map);
    const BracketParse parsed = bracket_to_spans(text, map);
    REQUIRE(parsed.ok);
    CHECK(parsed.utterance.tokens == utt.tokens);
    CHECK(parsed.utterance.spans == utt.spans);
  }
}

TEST_CASE("multi-space runs collapse to one separator") {
  const BracketParse parsed = bracket_to_spans("play   [1  zelda  ]", LabelMap::for_labels({"game"}));
  REQUIRE(parsed.ok);
  CHECK(parsed.utterance.tokens == std::vector<std::string>{"play", "zelda"});
}

TEST_CASE("BIO encoding of a two-token span") {
  AnnotatedUtterance utt;
  utt.tokens = {"a", "b", "c", "d", "e"};
  utt.spans = {{"timeRange", 2, 4}};
  const auto bio = spans_to_bio(utt);
  REQUIRE(bio.size() == 5);
  CHECK(bio[0].second == "O");
  CHECK(bio[1].second == "O");
  CHECK(bio[2].second == "B-timeRange");
  CHECK(bio[3].second == "I-timeRange");
  CHECK(bio[4].second == "O");
}

TEST_CASE("all-O BIO decodes to zero spans") {
  const BioDecode decoded = bio_to_spans({{"a", "O"}, {"b", "O"}});
  CHECK(decoded.utterance.spans.empty());
  CHECK(decoded.warnings.empty());
}

TEST_CASE("empty BIO input decodes to empty output") {
  const BioDecode decoded = bio_to_spans({});
  CHECK(decoded.utterance.tokens.empty());
  CHECK(decoded.utterance.spans.empty());
}

TEST_CASE("I-after-O repairs with a warning") {
  const BioDecode decoded = bio_to_spans({{"a", "O"}, {"b", "I-city"}, {"c", "I-city"}});
  REQUIRE(decoded.utterance.spans.size() == 1);
  CHECK(decoded.utterance.spans[0] == SlotSpan{"city", 1, 3});
  CHECK(decoded.warnings.size() == 1);
}

TEST_CASE("I after a different label opens a new span") {
  const BioDecode decoded = bio_to_spans({{"a", "B-city"}, {"b", "I-genre"}});
  REQUIRE(decoded.utterance.spans.size() == 2);
  CHECK(decoded.utterance.spans[0] == SlotSpan{"city", 0, 1});
  CHECK(decoded.utterance.spans[1] == SlotSpan{"genre", 1, 2});
  CHECK(decoded.warnings.size() == 1);
}

TEST_CASE("invalid BIO tags are rejected") {
  CHECK_THROWS_AS(bio_to_spans({{"a", "X-city"}}), std::invalid_argument);
  CHECK_THROWS_AS(bio_to_spans({{"a", "B"}}), std::invalid_argument);
  CHECK_THROWS_AS(bio_to_spans({{"a", "B-"}}), std::invalid_argument);
}

TEST_CASE("bracket, span, and BIO forms chain through each other") {
  Rng rng(501);
  for (int i = 0; i < 300; ++i) {
    const AnnotatedUtterance utt = tu::random_utterance(rng);
    const LabelMap map = natural_label_map(utt);
    const BracketParse from_text = bracket_to_spans(spans_to_bracket(utt, map), map);
    REQUIRE(from_text.ok);
    const BioDecode from_bio = bio_to_spans(spans_to_bio(from_text.utterance));
    CHECK(from_bio.utterance.tokens == utt.tokens);
    CHECK(from_bio.utterance.spans == utt.spans);
    CHECK(spans_to_bracket(from_bio.utterance, map) == spans_to_bracket(utt, map));
  }
}

TEST_CASE("BIO round-trip holds on 1000 random span sets") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const AnnotatedUtterance utt = tu::random_utterance(rng);
    const BioDecode decoded = bio_to_spans(spans_to_bio(utt));
    CHECK(decoded.utterance.tokens == utt.tokens);
    CHECK(decoded.utterance.spans == utt.spans);
    CHECK(decoded.warnings.empty());
  }
}

TEST_CASE("JSONL corpus round-trips and preserves row order") {
  const std::string dir = tu::temp_dir("corpus");
  const std::string path = dir + "/corpus.jsonl";
  Rng rng(11);
  std::vector<AnnotatedUtterance> rows;
  for (int i = 0; i < 25; ++i) rows.push_back(tu::random_utterance(rng));
  save_utterances_jsonl(rows, path);
  const Corpus loaded = load_corpus(path, CorpusFormat::Jsonl);
  REQUIRE(loaded.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(loaded.row(i) == rows[i]);
}

TEST_CASE("empty JSONL file loads as an empty corpus") {
  const std::string dir = tu::temp_dir("corpus_empty");
  const std::string path = dir + "/empty.jsonl";
  std::ofstream(path).close();
  CHECK(load_corpus(path, CorpusFormat::Jsonl).size() == 0);
}

TEST_CASE("overlapping spans are rejected with the row index") {
  const std::string dir = tu::temp_dir("corpus_bad");
  const std::string path = dir + "/bad.jsonl";
  std::ofstream out(path);
  out << R"({"tokens":["a","b"],"spans":[],"intent":"X","language":"English"})" << "\n";
  out << R"({"tokens":["a","b","c"],"spans":[{"label":"l1","start":0,"end":2},)"
      << R"({"label":"l2","start":1,"end":3}],"intent":"X","language":"English"})" << "\n";
  out.close();
  try {
    load_corpus(path, CorpusFormat::Jsonl);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    REQUIRE(e.row().has_value());
    CHECK(*e.row() == 1);
    CHECK(std::string(e.what()).find("overlap") != std::string::npos);
  }
}

TEST_CASE("span past the token count is rejected") {
  CHECK(utterance_violation({{"a"}, {{"x", 0, 2}}, "X", "en", {}, Provenance::Original})
            .has_value());
  CHECK(utterance_violation({{"a"}, {{"", 0, 1}}, "X", "en", {}, Provenance::Original})
            .has_value());
  CHECK(utterance_violation({{"a"}, {{"x", 1, 1}}, "X", "en", {}, Provenance::Original})
            .has_value());
}

TEST_CASE("SNIPS fixture loads with the published row count") {
  const std::string dir = tu::temp_dir("snips");
  const std::string path = dir + "/train_AddToPlaylist_full.json";
  tu::write_snips_fixture(path);
  const Corpus corpus = load_corpus(path, CorpusFormat::SnipsJson);
  CHECK(corpus.size() == 1942);  // 1884 train + 58 dev rows before the split
  CHECK(corpus.intents() == std::vector<std::string>{"AddToPlaylist"});
  for (const AnnotatedUtterance& u : corpus.rows()) {
    CHECK_FALSE(u.spans.empty());
    CHECK(u.language == "English");
  }
}

TEST_CASE("SNIPS segments map to token-aligned spans") {
  const std::string dir = tu::temp_dir("snips_small");
  const std::string path = dir + "/small.json";
  std::ofstream out(path);
  out << R"({"AddToPlaylist":[{"data":[{"text":"add "},)"
      << R"({"text":"midnight sun","entity":"entity_name"},{"text":" to my list"}]}]})";
  out.close();
  const Corpus corpus = load_corpus(path, CorpusFormat::SnipsJson);
  REQUIRE(corpus.size() == 1);
  const AnnotatedUtterance& utt = corpus.row(0);
  CHECK(utt.tokens ==
        std::vector<std::string>{"add", "midnight", "sun", "to", "my", "list"});
  REQUIRE(utt.spans.size() == 1);
  CHECK(utt.spans[0] == SlotSpan{"entity_name", 1, 3});
}

TEST_CASE("unknown provenance string is rejected") {
  const std::string dir = tu::temp_dir("corpus_prov");
  const std::string path = dir + "/prov.jsonl";
  std::ofstream out(path);
  out << R"({"tokens":["a"],"spans":[],"intent":"X","language":"en","provenance":"bogus"})"
      << "\n";
  out.close();
  CHECK_THROWS_AS(load_corpus(path, CorpusFormat::Jsonl), CorpusError);
}

TEST_CASE("derived intent and slot-label views keep first-appearance order") {
  const Corpus corpus = tu::make_toy_corpus(6);
  CHECK(corpus.intents() ==
        std::vector<std::string>{"PlayMusic", "GetWeather", "SetTimer"});
  const auto labels = corpus.slot_labels("PlayMusic");
  CHECK(std::find(labels.begin(), labels.end(), "artist") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "song") != labels.end());
  CHECK(corpus.rows_with_intent("SetTimer").size() == 6);
}
