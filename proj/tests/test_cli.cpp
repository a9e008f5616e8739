#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliWorkspace {
  fs::path root;

  CliWorkspace() {
    root = fs::temp_directory_path() /
           ("raggen_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(root);
    write_corpus();
    write_eval_items();
    write_config();
  }
  ~CliWorkspace() { fs::remove_all(root); }

  std::string path(const std::string& name) const { return (root / name).string(); }

  void write_corpus() const {
    std::ofstream out(path("corpus.jsonl"));
    for (const auto& doc : fixtures::twenty_docs()) {
      json j;
      j["id"] = doc.doc_id;
      j["title"] = doc.title;
      j["text"] = doc.body;
      out << j.dump() << "\n";
    }
  }

  void write_eval_items() const {
    std::ofstream out(path("eval.jsonl"));
    const char* questions[] = {
        "Where does the body store excess energy?",
        "What absorbs blue and red wavelengths?",
        "What do honeybees communicate with a waggle dance?",
        "What does thawing permafrost release?",
        "How do migratory birds navigate?",
    };
    for (const char* q : questions) {
      json j;
      j["question"] = q;
      j["task_type"] = "short_span";
      j["gold"] = "unused";
      out << j.dump() << "\n";
    }
  }

  void write_config(uint64_t seed = 7) const {
    json config = {
        {"seed", seed},
        {"output_dir", path("out")},
        {"corpus", {{"path", path("corpus.jsonl")}, {"format", "jsonl"},
                    {"window", 300}, {"stride", 300}}},
        {"retriever", {{"kind", "local"}, {"filter_k", 10}, {"context_budget", 10}}},
        {"backend", {{"kind", "mock"}}},
        {"synthesis",
         {{"quotas", {{"short_span", 8}, {"multiple_choice", 4}, {"claim_verification", 6}}},
          {"m_max", 5}}},
        {"blend", {{"total", 40}}},
        {"evaluation", {{"items", path("eval.jsonl")}}},
    };
    std::ofstream out(path("config.json"));
    out << config.dump(2) << "\n";
  }

  int run(const std::string& args) const {
    const std::string command = std::string(RAGGEN_CLI_PATH) + " --config " +
                                path("config.json") + " " + args + " >" +
                                path("stdout.txt") + " 2>" + path("stderr.txt");
    int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
  }
};

}  // namespace

TEST_CASE("the full pipeline runs on the fixture corpus with the mock backend") {
  CliWorkspace ws;
  REQUIRE(ws.run("ingest") == 0);
  REQUIRE(fs::exists(ws.path("out/passages.jsonl")));
  REQUIRE(fs::exists(ws.path("out/passages.jsonl.digest.json")));

  REQUIRE(ws.run("index") == 0);
  REQUIRE(fs::exists(ws.path("out/index.json")));

  REQUIRE(ws.run("synthesize") == 0);
  REQUIRE(fs::exists(ws.path("out/synthetic.jsonl")));
  REQUIRE(fs::exists(ws.path("out/synthesis_report.json")));

  REQUIRE(ws.run("blend") == 0);
  REQUIRE(fs::exists(ws.path("out/blend_plan.json")));

  REQUIRE(ws.run("export") == 0);
  REQUIRE(fs::exists(ws.path("out/train.jsonl")));
  REQUIRE(fs::exists(ws.path("out/train.jsonl.manifest.json")));

  REQUIRE(ws.run("evaluate") == 0);
  REQUIRE(fs::exists(ws.path("out/eval_report.json")));

  REQUIRE(ws.run("stats") == 0);
  CHECK(ws.read("stdout.txt").find("synthesis report:") != std::string::npos);

  // the export is non-trivial
  std::string train = ws.read("out/train.jsonl");
  CHECK(std::count(train.begin(), train.end(), '\n') == 40);
  CHECK(train.find("\"loss_mask\":[false,false,true]") != std::string::npos);
}

TEST_CASE("rerunning blend and export reproduces the training file byte for byte") {
  CliWorkspace ws;
  REQUIRE(ws.run("ingest") == 0);
  REQUIRE(ws.run("index") == 0);
  REQUIRE(ws.run("synthesize") == 0);
  REQUIRE(ws.run("blend") == 0);
  REQUIRE(ws.run("export") == 0);
  std::string first = ws.read("out/train.jsonl");
  REQUIRE(ws.run("blend") == 0);
  REQUIRE(ws.run("export") == 0);
  CHECK(ws.read("out/train.jsonl") == first);
}

TEST_CASE("downstream commands name the missing prerequisite") {
  CliWorkspace ws;
  CHECK(ws.run("synthesize") == 1);
  CHECK(ws.read("stderr.txt").find("raggen ingest") != std::string::npos);

  REQUIRE(ws.run("ingest") == 0);
  CHECK(ws.run("synthesize") == 1);
  CHECK(ws.read("stderr.txt").find("raggen index") != std::string::npos);
}

TEST_CASE("stale upstream artifacts are detected via the config digest") {
  CliWorkspace ws;
  REQUIRE(ws.run("ingest") == 0);
  REQUIRE(ws.run("index") == 0);

  // changing the chunking invalidates passages and everything downstream
  json config = json::parse(std::ifstream(ws.path("config.json")));
  config["corpus"]["window"] = 120;
  config["corpus"]["stride"] = 120;
  std::ofstream(ws.path("config.json")) << config.dump(2);

  CHECK(ws.run("index") == 1);
  CHECK(ws.read("stderr.txt").find("stale") != std::string::npos);
}

TEST_CASE("config errors exit with status 2") {
  CliWorkspace ws;
  json config = json::parse(std::ifstream(ws.path("config.json")));
  config["corpus"]["stride"] = 999;  // stride > window
  std::ofstream(ws.path("config.json")) << config.dump(2);
  CHECK(ws.run("ingest") == 2);

  std::ofstream(ws.path("config.json")) << "not json";
  CHECK(ws.run("ingest") == 2);
}

TEST_CASE("a held lock makes commands refuse to run") {
  CliWorkspace ws;
  fs::create_directories(ws.path("out"));
  std::ofstream(ws.path("out/.lock")) << "held\n";
  CHECK(ws.run("ingest") == 1);
  CHECK(ws.read("stderr.txt").find(".lock") != std::string::npos);
  fs::remove(ws.path("out/.lock"));
  CHECK(ws.run("ingest") == 0);
  // the lock is released afterwards
  CHECK_FALSE(fs::exists(ws.path("out/.lock")));
}

TEST_CASE("keep-rejects persists the audit trail") {
  CliWorkspace ws;
  REQUIRE(ws.run("ingest") == 0);
  REQUIRE(ws.run("index") == 0);
  REQUIRE(ws.run("--keep-rejects synthesize") == 0);
  std::string data = ws.read("out/synthetic.jsonl");
  // with the echo mock nearly everything is kept, but the file schema always
  // carries filter_status
  CHECK(data.find("\"filter_status\":\"kept\"") != std::string::npos);
}

TEST_CASE("the seed flag overrides the config seed") {
  CliWorkspace ws;
  REQUIRE(ws.run("ingest") == 0);
  REQUIRE(ws.run("index") == 0);
  REQUIRE(ws.run("synthesize") == 0);
  std::string baseline = ws.read("out/synthetic.jsonl");
  REQUIRE(ws.run("--seed 99 synthesize") == 0);
  CHECK(ws.read("out/synthetic.jsonl") != baseline);
  REQUIRE(ws.run("synthesize") == 0);
  CHECK(ws.read("out/synthetic.jsonl") == baseline);
}
