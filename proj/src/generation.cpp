#include "linguist/generation.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <future>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace linguist {

std::optional<std::string> sampling_params_violation(const SamplingParams& params) {
  if (params.top_k <= 0) return "top_k must be positive";
  if (params.temperature <= 0.0) return "temperature must be positive";
  if (params.num_outputs <= 0) return "num_outputs must be positive";
  if (params.hard_cap <= 0) return "hard_cap must be positive";
  if (params.num_outputs > params.hard_cap) {
    return "num_outputs " + std::to_string(params.num_outputs) + " exceeds hard cap " +
           std::to_string(params.hard_cap);
  }
  return std::nullopt;
}

GenerationRun generate(const std::vector<std::string>& prompts, const SamplingParams& params,
                       GenerationBackend& backend, int max_in_flight) {
  if (auto violation = sampling_params_violation(params)) {
    throw std::invalid_argument("sampling params: " + *violation);
  }
  std::vector<BackendBatch> batches(prompts.size());

  auto run_one = [&](std::size_t i) {
    try {
      batches[i] = backend.run(prompts[i], params);
    } catch (BackendError& e) {
      e.set_prompt_index(static_cast<int>(i));
      throw;
    }
  };

  if (max_in_flight <= 1 || prompts.size() <= 1) {
    for (std::size_t i = 0; i < prompts.size(); ++i) run_one(i);
  } else {
    // Waves of at most max_in_flight concurrent requests; results land in
    // request order regardless of completion order.
    std::size_t next = 0;
    while (next < prompts.size()) {
      std::vector<std::future<void>> wave;
      const std::size_t end =
          std::min(prompts.size(), next + static_cast<std::size_t>(max_in_flight));
      for (std::size_t i = next; i < end; ++i) {
        wave.push_back(std::async(std::launch::async, run_one, i));
      }
      std::exception_ptr first_error;
      for (auto& f : wave) {
        try {
          f.get();
        } catch (...) {
          if (!first_error) first_error = std::current_exception();
        }
      }
      if (first_error) std::rethrow_exception(first_error);
      next = end;
    }
  }

  GenerationRun run;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const BackendBatch& batch = batches[i];
    if (batch.truncated || batch.outputs.size() < static_cast<std::size_t>(params.num_outputs)) {
      run.truncated_prompts.push_back(static_cast<int>(i));
    }
    for (const BackendOutput& out : batch.outputs) {
      run.outputs.push_back({out.text, out.perplexity, static_cast<int>(i)});
    }
  }
  return run;
}

// ---- mock backend ------------------------------------------------------------

std::optional<MockDefect> mock_defect_from_string(std::string_view s) {
  if (s == "none") return MockDefect::None;
  if (s == "verbatim-copy") return MockDefect::VerbatimCopy;
  if (s == "malformed-brackets") return MockDefect::MalformedBrackets;
  if (s == "missing-slot") return MockDefect::MissingSlot;
  if (s == "extra-slot") return MockDefect::ExtraSlot;
  if (s == "repeated-slot") return MockDefect::RepeatedSlot;
  if (s == "value-not-copied") return MockDefect::ValueNotCopied;
  if (s == "literal-wildcard") return MockDefect::LiteralWildcard;
  if (s == "forbidden-punctuation") return MockDefect::ForbiddenPunctuation;
  return std::nullopt;
}

namespace {

const char* kOpeners[] = {"please",  "find",  "give me", "show me", "i want",
                          "i need",  "fetch", "lookup",  "get me",  "tell me"};
const char* kConnectors[] = {"for", "at", "in", "with", "about", "near", "on"};
const char* kFillers[] = {"alpha",   "bravo", "cedar",  "delta",  "ember",  "fable",
                          "garnet",  "harbor", "indigo", "juniper", "krill",  "lumen",
                          "meadow",  "nectar", "onyx",   "prairie", "quartz", "reef",
                          "saffron", "tundra"};

std::string pick(Rng& rng, const char* const* words, std::size_t count) {
  return words[rng.uniform_index(count)];
}

std::string render_slot(int number, const std::vector<std::string>& value) {
  return "[" + std::to_string(number) + " " + join_tokens(value) + " ]";
}

std::vector<std::string> wildcard_fill(Rng& rng) {
  std::vector<std::string> value;
  const std::size_t words = 1 + rng.uniform_index(2);
  for (std::size_t i = 0; i < words; ++i) {
    value.push_back(pick(rng, kFillers, std::size(kFillers)));
  }
  return value;
}

struct MockPieces {
  std::vector<std::pair<int, std::vector<std::string>>> slots;  // number, value tokens
  std::string opener;
};

MockPieces clean_pieces(const LinguistPrompt& prompt, Rng& rng) {
  MockPieces pieces;
  pieces.opener = pick(rng, kOpeners, std::size(kOpeners));
  for (const IncludeItem& item : prompt.include) {
    pieces.slots.emplace_back(item.number,
                              item.is_wildcard() ? wildcard_fill(rng) : item.value);
  }
  return pieces;
}

std::string assemble(const MockPieces& pieces, Rng& rng) {
  std::string out = pieces.opener;
  for (const auto& [number, value] : pieces.slots) {
    out += ' ';
    out += pick(rng, kConnectors, std::size(kConnectors));
    out += ' ';
    out += render_slot(number, value);
  }
  return out;
}

std::string corrupt_output(const LinguistPrompt& prompt, MockPieces pieces, MockDefect defect,
                           Rng& rng) {
  switch (defect) {
    case MockDefect::None:
      break;
    case MockDefect::VerbatimCopy:
      if (!prompt.examples.empty()) {
        return prompt.examples[rng.uniform_index(prompt.examples.size())];
      }
      break;
    case MockDefect::MalformedBrackets: {
      const int number =
          pieces.slots.empty() ? 1 : pieces.slots[rng.uniform_index(pieces.slots.size())].first;
      return assemble(pieces, rng) + " [" + std::to_string(number) + " [ ]";
    }
    case MockDefect::MissingSlot:
      if (!pieces.slots.empty()) {
        pieces.slots.erase(pieces.slots.begin() +
                           static_cast<long>(rng.uniform_index(pieces.slots.size())));
      }
      break;
    case MockDefect::ExtraSlot: {
      int extra = 1;
      bool found = false;
      for (const LabelEntry& e : prompt.labels.entries()) {
        bool requested = false;
        for (const auto& slot : pieces.slots) {
          if (slot.first == e.number) requested = true;
        }
        if (!requested) {
          extra = e.number;
          found = true;
          break;
        }
      }
      if (!found) {
        extra = prompt.labels.empty() ? 1 : prompt.labels.entries().back().number + 1;
      }
      pieces.slots.emplace_back(extra, wildcard_fill(rng));
      break;
    }
    case MockDefect::RepeatedSlot:
      if (!pieces.slots.empty()) {
        pieces.slots.push_back(pieces.slots[rng.uniform_index(pieces.slots.size())]);
      }
      break;
    case MockDefect::ValueNotCopied: {
      for (std::size_t i = 0; i < prompt.include.size(); ++i) {
        if (!prompt.include[i].is_wildcard()) {
          std::vector<std::string> replacement = wildcard_fill(rng);
          while (contains_token_subsequence(replacement, prompt.include[i].value)) {
            replacement = wildcard_fill(rng);
          }
          pieces.slots[i].second = std::move(replacement);
          break;
        }
      }
      break;
    }
    case MockDefect::LiteralWildcard:
      if (!pieces.slots.empty()) {
        pieces.slots[rng.uniform_index(pieces.slots.size())].second = {"*"};
      } else {
        return assemble(pieces, rng) + " [1 * ]";
      }
      break;
    case MockDefect::ForbiddenPunctuation:
      return assemble(pieces, rng) + " right;away";
  }
  return assemble(pieces, rng);
}

std::uint64_t mock_stream_seed(const MockConfig& config, const std::string& prompt,
                               const SamplingParams& params) {
  std::uint64_t h = splitmix64(config.seed);
  h = splitmix64(h ^ fnv1a64(prompt));
  h = splitmix64(h ^ static_cast<std::uint64_t>(params.top_k));
  std::uint64_t temp_bits = 0;
  static_assert(sizeof(temp_bits) == sizeof(params.temperature));
  std::memcpy(&temp_bits, &params.temperature, sizeof(temp_bits));
  h = splitmix64(h ^ temp_bits);
  h = splitmix64(h ^ static_cast<std::uint64_t>(params.num_outputs));
  return h;
}

}  // namespace

BackendBatch MockBackend::run(const std::string& prompt, const SamplingParams& params) {
  BackendBatch batch;
  for (GenerationOutput& out : mock_generate(prompt, params, config_)) {
    batch.outputs.push_back({std::move(out.text), out.perplexity});
  }
  return batch;
}

std::vector<GenerationOutput> mock_generate(const std::string& prompt,
                                            const SamplingParams& params,
                                            const MockConfig& config) {
  if (auto violation = sampling_params_violation(params)) {
    throw BackendError(BackendError::Kind::Protocol, "sampling params: " + *violation);
  }
  const PromptParse parsed = parse_prompt(prompt);
  if (!parsed.ok) {
    throw BackendError(BackendError::Kind::Protocol,
                       std::string("mock backend got unparseable prompt: ") + parsed.message +
                           " (" + to_string(parsed.code) + ")");
  }
  const std::uint64_t base = mock_stream_seed(config, prompt, params);
  std::vector<GenerationOutput> outputs;
  outputs.reserve(static_cast<std::size_t>(params.num_outputs));
  for (int i = 0; i < params.num_outputs; ++i) {
    Rng rng = Rng::substream(base, static_cast<std::uint64_t>(i));
    MockPieces pieces = clean_pieces(parsed.prompt, rng);
    std::string text;
    if (config.defect != MockDefect::None && rng.bernoulli(config.corruption)) {
      text = corrupt_output(parsed.prompt, std::move(pieces), config.defect, rng);
    } else {
      text = assemble(pieces, rng);
    }
    GenerationOutput out;
    out.text = std::move(text);
    out.perplexity = 1.0 + 9.0 * rng.uniform_real01();
    out.prompt_index = 0;
    outputs.push_back(std::move(out));
  }
  return outputs;
}

// ---- HTTP backend ------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const std::string& url = config_.endpoint;
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw std::invalid_argument("backend endpoint must start with http://: " + url);
  }
  std::string rest = url.substr(scheme.size());
  const std::size_t slash = rest.find('/');
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  const std::size_t colon = hostport.find(':');
  if (colon == std::string::npos) {
    host_ = hostport;
    port_ = 80;
  } else {
    host_ = hostport.substr(0, colon);
    port_ = std::stoi(hostport.substr(colon + 1));
  }
  if (host_.empty()) throw std::invalid_argument("backend endpoint has empty host: " + url);
}

BackendBatch HttpBackend::run(const std::string& prompt, const SamplingParams& params) {
  nlohmann::json request = {{"prompt", prompt},
                            {"top_k", params.top_k},
                            {"temperature", params.temperature},
                            {"num_outputs", params.num_outputs}};
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(config_.retry_base_ms * (1 << (attempt - 1))));
    }
    httplib::Client client(host_, port_);
    client.set_connection_timeout(config_.timeout_ms / 1000,
                                  (config_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!config_.auth_token.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.auth_token);
    }
    auto response = client.Post(path_, headers, body, "application/json");
    if (!response) {
      last_error = "connection failed: " + httplib::to_string(response.error());
      continue;
    }
    if (response->status >= 500) {
      last_error = "server error " + std::to_string(response->status);
      continue;
    }
    if (response->status != 200) {
      throw BackendError(BackendError::Kind::Protocol,
                         "backend returned status " + std::to_string(response->status));
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(response->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(BackendError::Kind::Protocol,
                         std::string("backend response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("outputs") || !doc["outputs"].is_array()) {
      throw BackendError(BackendError::Kind::Protocol,
                         "backend response missing 'outputs' array");
    }
    BackendBatch batch;
    for (const auto& item : doc["outputs"]) {
      if (!item.is_object() || !item.contains("text") || !item["text"].is_string()) {
        throw BackendError(BackendError::Kind::Protocol,
                           "backend output record missing 'text'");
      }
      BackendOutput out;
      out.text = item["text"].get<std::string>();
      if (item.contains("perplexity") && !item["perplexity"].is_null()) {
        out.perplexity = item["perplexity"].get<double>();
      }
      batch.outputs.push_back(std::move(out));
    }
    if (doc.contains("truncated") && doc["truncated"].is_boolean()) {
      batch.truncated = doc["truncated"].get<bool>();
    }
    return batch;
  }
  throw BackendError(BackendError::Kind::Transport,
                     "backend unreachable after " + std::to_string(config_.max_retries + 1) +
                         " attempts: " + last_error);
}

// ---- line/JSONL artifacts ------------------------------------------------------

std::vector<std::string> load_prompt_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prompts file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

void save_prompt_lines(const std::vector<std::string>& prompts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write prompts file: " + path);
  for (const std::string& p : prompts) out << p << '\n';
}

void save_outputs_jsonl(const GenerationRun& run, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write outputs file: " + path);
  for (const GenerationOutput& o : run.outputs) {
    nlohmann::json j = {{"prompt_index", o.prompt_index}, {"text", o.text}};
    if (o.perplexity) j["perplexity"] = *o.perplexity;
    out << j.dump() << '\n';
  }
  nlohmann::json tail = {{"truncated_prompts", run.truncated_prompts}};
  out << tail.dump() << '\n';
}

GenerationRun load_outputs_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open outputs file: " + path);
  GenerationRun run;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.contains("truncated_prompts")) {
      run.truncated_prompts = j["truncated_prompts"].get<std::vector<int>>();
      continue;
    }
    GenerationOutput o;
    o.prompt_index = j["prompt_index"].get<int>();
    o.text = j["text"].get<std::string>();
    if (j.contains("perplexity") && !j["perplexity"].is_null()) {
      o.perplexity = j["perplexity"].get<double>();
    }
    run.outputs.push_back(std::move(o));
  }
  return run;
}

}  // namespace linguist
