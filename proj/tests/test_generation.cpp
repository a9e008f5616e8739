#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "raggen/errors.hpp"
#include "raggen/generation.hpp"

using namespace raggen;

namespace {

Passage histology_passage() {
  Passage p;
  p.passage_id = "hist#0";
  p.doc_id = "hist";
  p.title = "Histology Ross";
  p.text =
      "The body has a limited capacity to store carbohydrate and protein, therefore "
      "energy reserves are stored within lipid droplets of adipocytes in the form of "
      "triglycerides.";
  return p;
}

}  // namespace

TEST_CASE("answer prompt embeds the extraction instruction verbatim") {
  auto prompt = render_answer_prompt(histology_passage());
  CHECK(prompt.user.find("Separate different candidate answers with a semicolon (';').") !=
        std::string::npos);
  CHECK(prompt.user.find(prompts::kAnswerGeneration) != std::string::npos);
  CHECK(prompt.user.rfind("Title: Histology Ross, Text: ", 0) == 0);
  CHECK(prompt.user.find("{") == std::string::npos);

  // pure function
  CHECK(render_answer_prompt(histology_passage()) == prompt);
}

TEST_CASE("empty titles drop the title part of the context block") {
  Passage p = histology_passage();
  p.title.clear();
  auto prompt = render_answer_prompt(p);
  CHECK(prompt.user.rfind("Text: The body", 0) == 0);
  CHECK(prompt.user.find("Title:") == std::string::npos);
}

TEST_CASE("question prompt substitutes the answer into the template") {
  auto prompt = render_question_prompt(histology_passage(), "triglycerides");
  CHECK(prompt.user.find("The question should stand alone") != std::string::npos);
  const std::string tail = "The answer to the question should be triglycerides.";
  REQUIRE(prompt.user.size() >= tail.size());
  CHECK(prompt.user.substr(prompt.user.size() - tail.size()) == tail);
  CHECK(prompt.user.find("{answer}") == std::string::npos);

  CHECK(render_question_prompt(histology_passage(), "triglycerides") == prompt);

  auto with_newline = render_question_prompt(histology_passage(), "two\nlines");
  CHECK(with_newline.user.find("should be two\nlines.") != std::string::npos);
}

TEST_CASE("claim prompt substitutes the polarity word") {
  auto supported = render_claim_prompt(histology_passage(), ClaimPolarity::supported);
  auto refuted = render_claim_prompt(histology_passage(), ClaimPolarity::refuted);
  CHECK(supported.user.find("can be supported by the context") != std::string::npos);
  CHECK(refuted.user.find("can be refuted by the context") != std::string::npos);
  // single-slot template: the renders differ only in the polarity word
  auto patched = refuted.user;
  auto pos = patched.find("refuted");
  patched.replace(pos, 7, "supported");
  CHECK(patched == supported.user);
}

TEST_CASE("inference prompt orders contexts, instruction, question") {
  auto contexts = fixtures::fixture_passages();
  contexts.resize(10);
  auto prompt = render_inference_prompt(contexts, prompts::kShortSpanInstruction,
                                        "Where is energy stored?");
  size_t c1 = prompt.user.find("Context 1: ");
  size_t c10 = prompt.user.find("Context 10: ");
  size_t instruction = prompt.user.find(prompts::kShortSpanInstruction);
  size_t question = prompt.user.find("Where is energy stored?");
  REQUIRE(c1 != std::string::npos);
  REQUIRE(c10 != std::string::npos);
  REQUIRE(instruction != std::string::npos);
  REQUIRE(question != std::string::npos);
  CHECK(c1 < c10);
  CHECK(c10 < instruction);
  CHECK(instruction < question);

  auto single = render_inference_prompt({contexts[0]}, prompts::kYesNoInstruction, "Q?");
  CHECK(single.user.find("Context 1: Title: Adipose Tissue, Text: ") == 0);
  CHECK(single.user.find("Context 2:") == std::string::npos);
}

TEST_CASE("inference prompt renders byte-exactly against a golden fixture") {
  Passage a;
  a.passage_id = "g0#0";
  a.title = "Alpha";
  a.text = "one two three";
  Passage b;
  b.passage_id = "g1#0";
  b.text = "four five six";
  auto prompt =
      render_inference_prompt({a, b}, prompts::kYesNoInstruction, "Is the statement X correct?");
  const std::string golden =
      "Context 1: Title: Alpha, Text: one two three\n\n"
      "Context 2: Text: four five six\n\n"
      "Answer the following question with Yes or No.\n\n"
      "Is the statement X correct?";
  CHECK(prompt.user == golden);
  CHECK(prompt.system == "You are a helpful assistant.");
}

TEST_CASE("mock backend is deterministic for fixed messages and seed") {
  MockBackend backend(42);
  auto prompt = render_answer_prompt(histology_passage());
  auto first = backend.generate(prompt, {});
  auto second = backend.generate(prompt, {});
  CHECK(first.text == second.text);
  CHECK(first.backend == BackendKind::mock);
  CHECK(first.attempt == 1);
}

TEST_CASE("mock answers are capitalized passage tokens joined by semicolons") {
  MockBackend backend(0);
  auto result = backend.generate(render_answer_prompt(histology_passage()), {});
  CHECK(result.text == "The; Body; Has; A; Limited");
}

TEST_CASE("mock questions embed the designated answer and end with '?'") {
  MockBackend backend(0);
  auto result =
      backend.generate(render_question_prompt(histology_passage(), "triglycerides"), {});
  CHECK(result.text == "What does the passage identify as triglycerides?");

  MockBackend irrelevant(0, {MockBackend::QuestionStyle::irrelevant, 5});
  auto gibberish =
      irrelevant.generate(render_question_prompt(histology_passage(), "triglycerides"), {});
  CHECK(gibberish.text.back() == '?');
  CHECK(gibberish.text.find("triglycerides") == std::string::npos);
}

TEST_CASE("mock claims quote the opening of the context") {
  MockBackend backend(0);
  auto result =
      backend.generate(render_claim_prompt(histology_passage(), ClaimPolarity::supported), {});
  CHECK(result.text ==
        "The body has a limited capacity to store carbohydrate and protein, therefore");
}

namespace {

struct ChatServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit ChatServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~ChatServer() {
    server.stop();
    thread.join();
  }

  RemoteBackendConfig config() const {
    RemoteBackendConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port);
    c.model = "test-model";
    c.backoff_base = std::chrono::milliseconds(1);
    return c;
  }
};

std::string content_response(const std::string& content) {
  nlohmann::json j;
  j["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
  return j.dump();
}

}  // namespace

TEST_CASE("remote backend speaks the chat-completion wire format") {
  ChatServer server([](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("messages").size() == 2);
    CHECK(body.at("messages")[0].at("role") == "system");
    CHECK(body.at("messages")[1].at("role") == "user");
    CHECK(body.at("messages")[1].at("content") == "hello");
    CHECK(body.at("temperature") == 0.25);
    CHECK(body.at("top_p") == 0.9);
    CHECK(body.at("max_tokens") == 64);
    CHECK(body.at("seed") == 7);
    res.set_content(content_response("world"), "application/json");
  });
  RemoteBackend backend(server.config());
  GenerationConfig config;
  config.temperature = 0.25;
  config.max_new_tokens = 64;
  config.seed = 7;
  auto result = backend.generate({"sys", "hello"}, config);
  CHECK(result.text == "world");
  CHECK(result.backend == BackendKind::remote);
  CHECK(result.attempt == 1);
}

TEST_CASE("remote backend retries failures and reports the attempt") {
  std::atomic<int> calls{0};
  ChatServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 500;
      return;
    }
    res.set_content(content_response("ok"), "application/json");
  });
  RemoteBackend backend(server.config());
  GenerationConfig config;
  config.retries = 3;
  auto result = backend.generate({"s", "u"}, config);
  CHECK(result.text == "ok");
  CHECK(result.attempt == 3);
}

TEST_CASE("exhausted retries raise a backend error with the attempt count") {
  std::atomic<int> calls{0};
  ChatServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  RemoteBackend backend(server.config());
  GenerationConfig config;
  config.retries = 2;
  try {
    backend.generate({"s", "u"}, config);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.attempts() == 3);
  }
  CHECK(calls == 3);
}

TEST_CASE("empty completions surface an empty-output error") {
  ChatServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(content_response("   "), "application/json");
  });
  RemoteBackend backend(server.config());
  CHECK_THROWS_AS(backend.generate({"s", "u"}, {}), EmptyOutputError);
}
