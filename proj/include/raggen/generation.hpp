#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "raggen/prompts.hpp"

namespace raggen {

struct GenerationConfig {
  double temperature = 0.7;
  double top_p = 0.9;
  int max_new_tokens = 128;
  std::optional<int64_t> seed;
  int retries = 3;
};

enum class BackendKind { remote, mock };

struct GenerationResult {
  std::string text;
  BackendKind backend = BackendKind::mock;
  int64_t latency_ms = 0;
  int attempt = 1;  // <= retries + 1
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  // Throws BackendError once retries are exhausted and EmptyOutputError when
  // the service returns an empty completion. Safe for concurrent callers.
  virtual GenerationResult generate(const PromptMessages& messages,
                                    const GenerationConfig& config) = 0;
};

// Deterministic in-process stand-in for a completion service; output is a
// pure function of (rendered prompt, seed), which makes every pipeline run
// with a fixed seed reproducible end to end.
//
//   answer prompt    -> first `answer_count` whitespace tokens of the context,
//                       capitalized, joined by "; "
//   question prompt  -> a fixed-shape question embedding the designated answer
//                       (or corpus-irrelevant gibberish in `irrelevant` mode)
//   claim prompt     -> the first words of the context as a statement
//                       (or gibberish in `irrelevant` mode)
//   inference prompt -> instruction-aware canned reply ("A" / "Yes" / the
//                       opening words of the top context)
class MockBackend : public GenerationBackend {
 public:
  enum class QuestionStyle { echo_answer, irrelevant };

  struct Options {
    QuestionStyle style = QuestionStyle::echo_answer;
    size_t answer_count = 5;
  };

  explicit MockBackend(uint64_t seed) : seed_(seed) {}
  MockBackend(uint64_t seed, Options options) : seed_(seed), options_(options) {}

  GenerationResult generate(const PromptMessages& messages,
                            const GenerationConfig& config) override;

 private:
  uint64_t seed_;
  Options options_;
};

struct RemoteBackendConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8090
  std::string path = "/v1/chat/completions";
  std::string model = "default";
  std::string api_key;   // taken from the environment, never from config files
  std::chrono::milliseconds backoff_base{250};
  std::chrono::milliseconds timeout{30000};
  size_t max_inflight = 4;
};

// Chat-completion client:
//   request  {"model", "messages": [{"role","content"}...],
//             "temperature", "top_p", "max_tokens", "seed"?}
//   response {"choices": [{"message": {"content": ...}}]}
// Transport errors and non-2xx statuses are retried with exponential backoff
// up to config.retries; an in-process semaphore caps in-flight requests.
class RemoteBackend : public GenerationBackend {
 public:
  explicit RemoteBackend(RemoteBackendConfig config);

  GenerationResult generate(const PromptMessages& messages,
                            const GenerationConfig& config) override;

 private:
  RemoteBackendConfig config_;
  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  size_t inflight_ = 0;
};

}  // namespace raggen
