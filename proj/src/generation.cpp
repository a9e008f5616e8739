#include "raggen/generation.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "raggen/errors.hpp"
#include "raggen/text.hpp"

namespace raggen {

using nlohmann::json;

namespace prompts {

std::string context_block(const Passage& passage) {
  if (passage.title.empty()) {
    return "Text: " + passage.text;
  }
  return "Title: " + passage.title + ", Text: " + passage.text;
}

std::string numbered_context_blocks(const std::vector<Passage>& contexts) {
  std::string out;
  for (size_t i = 0; i < contexts.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "Context " + std::to_string(i + 1) + ": " + context_block(contexts[i]);
  }
  return out;
}

std::string substitute(std::string_view tmpl, std::string_view placeholder,
                       std::string_view value) {
  std::string out(tmpl);
  size_t pos = out.find(placeholder);
  while (pos != std::string::npos) {
    out.replace(pos, placeholder.size(), value);
    pos = out.find(placeholder, pos + value.size());
  }
  return out;
}

}  // namespace prompts

PromptMessages render_answer_prompt(const Passage& passage) {
  PromptMessages m;
  m.system = std::string(prompts::kDefaultSystem);
  m.user = prompts::context_block(passage) + "\n\n" + std::string(prompts::kAnswerGeneration);
  return m;
}

PromptMessages render_question_prompt(const Passage& passage, std::string_view answer) {
  PromptMessages m;
  m.system = std::string(prompts::kDefaultSystem);
  m.user = prompts::context_block(passage) + "\n\n" +
           prompts::substitute(prompts::kQuestionGeneration, "{answer}", answer);
  return m;
}

PromptMessages render_claim_prompt(const Passage& passage, ClaimPolarity polarity) {
  PromptMessages m;
  m.system = std::string(prompts::kDefaultSystem);
  m.user = prompts::context_block(passage) + "\n\n" +
           prompts::substitute(prompts::kClaimGeneration, "{polarity}",
                               polarity == ClaimPolarity::supported ? "supported" : "refuted");
  return m;
}

PromptMessages render_inference_prompt(const std::vector<Passage>& contexts,
                                       std::string_view specific_instruction,
                                       std::string_view question) {
  PromptMessages m;
  m.system = std::string(prompts::kDefaultSystem);
  std::string user = prompts::numbered_context_blocks(contexts);
  user += "\n\n";
  user += specific_instruction;
  user += "\n\n";
  user += question;
  m.user = std::move(user);
  return m;
}

namespace {

constexpr std::string_view kQuestionMarker = "The answer to the question should be ";
constexpr std::string_view kGibberishQuestion = "Vrexqua zilbont quarmix fendola prastion?";
constexpr std::string_view kGibberishClaim = "Vrexqua zilbont quarmix fendola prastion";

std::string capitalize(std::string token) {
  if (!token.empty()) {
    token[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
  }
  return token;
}

// The context block is the first blank-line-separated section of the user
// message; passage text never contains newlines (tokens are space-joined).
std::string extract_context_text(const std::string& user) {
  size_t end = user.find("\n\n");
  std::string block = end == std::string::npos ? user : user.substr(0, end);
  size_t text_pos = block.find("Text: ");
  if (text_pos == std::string::npos) return block;
  return block.substr(text_pos + 6);
}

std::string first_tokens(const std::string& s, size_t n) {
  auto tokens = text::whitespace_tokens(s);
  if (tokens.size() > n) tokens.resize(n);
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace

GenerationResult MockBackend::generate(const PromptMessages& messages,
                                       const GenerationConfig& config) {
  (void)config;
  const std::string& user = messages.user;
  std::string reply;

  if (user.find(prompts::kAnswerGeneration) != std::string::npos) {
    auto tokens = text::whitespace_tokens(extract_context_text(user));
    if (tokens.size() > options_.answer_count) tokens.resize(options_.answer_count);
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0) reply += "; ";
      reply += capitalize(tokens[i]);
    }
  } else if (user.find("Based on the context, please generate a question") != std::string::npos) {
    if (options_.style == QuestionStyle::irrelevant) {
      reply = std::string(kGibberishQuestion);
    } else {
      size_t pos = user.find(kQuestionMarker);
      std::string answer = pos == std::string::npos
                               ? ""
                               : user.substr(pos + kQuestionMarker.size());
      if (!answer.empty() && answer.back() == '.') answer.pop_back();
      reply = "What does the passage identify as " + answer + "?";
    }
  } else if (user.find("Based on the context, please generate a claim") != std::string::npos) {
    if (options_.style == QuestionStyle::irrelevant) {
      reply = std::string(kGibberishClaim);
    } else {
      reply = first_tokens(extract_context_text(user), 12);
    }
  } else {
    if (user.find(prompts::kMultipleChoiceInstruction) != std::string::npos) {
      reply = "A";
    } else if (user.find(prompts::kYesNoInstruction) != std::string::npos) {
      reply = "Yes";
    } else {
      size_t text_pos = user.find("Text: ");
      std::string context = text_pos == std::string::npos ? user : user.substr(text_pos + 6);
      size_t end = context.find("\n\n");
      if (end != std::string::npos) context.resize(end);
      reply = first_tokens(context, 10);
    }
  }

  if (reply.empty()) {
    throw EmptyOutputError("mock backend produced an empty completion");
  }
  return {reply, BackendKind::mock, 0, 1};
}

RemoteBackend::RemoteBackend(RemoteBackendConfig config) : config_(std::move(config)) {}

GenerationResult RemoteBackend::generate(const PromptMessages& messages,
                                         const GenerationConfig& config) {
  json request;
  request["model"] = config_.model;
  request["messages"] = json::array({
      json{{"role", "system"}, {"content", messages.system}},
      json{{"role", "user"}, {"content", messages.user}},
  });
  request["temperature"] = config.temperature;
  request["top_p"] = config.top_p;
  request["max_tokens"] = config.max_new_tokens;
  if (config.seed) request["seed"] = *config.seed;
  const std::string body = request.dump();

  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return inflight_ < std::max<size_t>(1, config_.max_inflight); });
    ++inflight_;
  }
  struct SlotRelease {
    RemoteBackend* backend;
    ~SlotRelease() {
      {
        std::lock_guard lock(backend->slots_mutex_);
        --backend->inflight_;
      }
      backend->slots_cv_.notify_one();
    }
  } release{this};

  const auto started = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 1; attempt <= config.retries + 1; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 2)));
    }
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout));
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    auto res = client.Post(config_.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json payload = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (payload.is_discarded() || !payload.contains("choices") ||
        payload["choices"].empty()) {
      throw BackendError("malformed completion response from " + config_.base_url, attempt);
    }
    std::string content =
        payload["choices"][0].value("message", json::object()).value("content", "");
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - started)
                       .count();
    if (text::trim(content).empty()) {
      throw EmptyOutputError("backend returned an empty completion", attempt);
    }
    return {std::move(content), BackendKind::remote, latency, attempt};
  }
  throw BackendError("generation backend unavailable (" + last_error + ")",
                     config.retries + 1);
}

}  // namespace raggen
