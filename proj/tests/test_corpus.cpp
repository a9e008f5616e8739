#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "raggen/corpus.hpp"
#include "raggen/errors.hpp"

using namespace raggen;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("raggen_corpus_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

Document make_doc(const std::string& body) {
  Document doc;
  doc.doc_id = "d";
  doc.body = body;
  doc.source = "test";
  return doc;
}

std::string body_of_n_tokens(size_t n) {
  std::string body;
  for (size_t i = 0; i < n; ++i) {
    if (i > 0) body.push_back(' ');
    body += "t" + std::to_string(i);
  }
  return body;
}

}  // namespace

TEST_CASE("jsonl ingestion skips malformed lines and counts them") {
  TempDir dir;
  const std::string path = dir.file("corpus.jsonl");
  write_file(path,
             R"({"id": "a", "title": "A", "text": "first body"})" "\n"
             "this is not json\n"
             R"({"id": "b", "text": "second body"})" "\n");
  IngestStats stats;
  auto docs = ingest(path, IngestFormat::jsonl, &stats);
  REQUIRE(docs.size() == 2);
  CHECK(stats.skipped_malformed == 1);
  CHECK(docs[0].doc_id == "a");
  CHECK(docs[0].title == "A");
  CHECK(docs[1].doc_id == "b");
  CHECK(docs[1].title.empty());
}

TEST_CASE("byte-identical bodies are deduplicated") {
  TempDir dir;
  const std::string path = dir.file("corpus.jsonl");
  write_file(path,
             R"({"text": "same body"})" "\n"
             R"({"text": "  same body  "})" "\n");
  IngestStats stats;
  auto docs = ingest(path, IngestFormat::jsonl, &stats);
  REQUIRE(docs.size() == 1);
  CHECK(stats.deduped == 1);
  CHECK(docs[0].doc_id == path + ":0");
}

TEST_CASE("zero ingested documents is fatal") {
  TempDir dir;
  write_file(dir.file("empty.jsonl"), "");
  CHECK_THROWS_AS(ingest(dir.file("empty.jsonl"), IngestFormat::jsonl), CorpusError);
  fs::create_directories(dir.file("empty_dir"));
  CHECK_THROWS_AS(ingest(dir.file("empty_dir"), IngestFormat::text_dir), CorpusError);
  CHECK_THROWS_AS(ingest(dir.file("missing.jsonl"), IngestFormat::jsonl), CorpusError);
}

TEST_CASE("text directory ingestion reads txt files in sorted order") {
  TempDir dir;
  fs::create_directories(dir.file("docs"));
  write_file(dir.file("docs/b.txt"), "second file body");
  write_file(dir.file("docs/a.txt"), "first file body");
  write_file(dir.file("docs/ignored.md"), "not a txt");
  auto docs = ingest(dir.file("docs"), IngestFormat::text_dir);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].title == "a");
  CHECK(docs[1].title == "b");
  CHECK(docs[0].body == "first file body");
}

TEST_CASE("chunk emits sliding windows with the final short tail") {
  auto p = chunk(make_doc(body_of_n_tokens(10)), 4, 4);
  REQUIRE(p.size() == 3);
  CHECK(p[0].token_count == 4);
  CHECK(p[1].token_count == 4);
  CHECK(p[2].token_count == 2);
  CHECK(p[0].start_token == 0);
  CHECK(p[1].start_token == 4);
  CHECK(p[2].start_token == 8);
  CHECK(p[2].text == "t8 t9");
}

TEST_CASE("short documents produce a single window") {
  auto p = chunk(make_doc(body_of_n_tokens(4)), 8, 8);
  REQUIRE(p.size() == 1);
  CHECK(p[0].token_count == 4);
  CHECK(p[0].passage_id == "d#0");
}

TEST_CASE("overlapping stride enumerates every stride multiple") {
  // 6 tokens, window 4, stride 2 -> starts 0, 2, 4
  auto p = chunk(make_doc(body_of_n_tokens(6)), 4, 2);
  REQUIRE(p.size() == 3);
  CHECK(p[0].start_token == 0);
  CHECK(p[1].start_token == 2);
  CHECK(p[2].start_token == 4);
  CHECK(p[0].text == "t0 t1 t2 t3");
  CHECK(p[1].text == "t2 t3 t4 t5");
  CHECK(p[2].text == "t4 t5");
}

TEST_CASE("empty body chunks to nothing; bad windows are rejected") {
  CHECK(chunk(make_doc("   "), 4, 4).empty());
  CHECK_THROWS_AS(chunk(make_doc("x"), 0, 1), ConfigError);
  CHECK_THROWS_AS(chunk(make_doc("x"), 4, 5), ConfigError);
  CHECK_THROWS_AS(chunk(make_doc("x"), 4, 0), ConfigError);
}

TEST_CASE("every body token is covered by some passage") {
  for (size_t n : {1, 5, 17, 100}) {
    for (auto [w, s] : {std::pair<size_t, size_t>{7, 3}, {12, 12}, {5, 1}}) {
      auto passages = chunk(make_doc(body_of_n_tokens(n)), w, s);
      std::vector<bool> covered(n, false);
      for (const auto& p : passages) {
        CHECK(p.token_count <= w);
        for (size_t i = p.start_token; i < p.start_token + p.token_count; ++i) {
          covered[i] = true;
        }
      }
      for (size_t i = 0; i < n; ++i) CHECK(covered[i]);
    }
  }
}

TEST_CASE("passage ids parse back losslessly, including doc ids with '#'") {
  auto [doc_id, index] = parse_passage_id("weird#doc#12");
  CHECK(doc_id == "weird#doc");
  CHECK(index == 12);
  CHECK_THROWS_AS(parse_passage_id("no-separator"), CorpusError);
  CHECK_THROWS_AS(parse_passage_id("trailing#"), CorpusError);
}

TEST_CASE("ingest and chunk are deterministic end to end") {
  TempDir dir;
  const std::string path = dir.file("corpus.jsonl");
  write_file(path,
             R"({"id": "z", "text": "gamma delta epsilon zeta eta theta"})" "\n"
             R"({"id": "a", "text": "alpha beta gamma delta epsilon"})" "\n");
  auto first = chunk_all(ingest(path, IngestFormat::jsonl), 3, 3);
  auto second = chunk_all(ingest(path, IngestFormat::jsonl), 3, 3);
  REQUIRE(first == second);
  // canonical order: (source, doc_id, chunk index)
  CHECK(first.front().doc_id == "a");
}

TEST_CASE("passages round-trip through jsonl") {
  TempDir dir;
  auto passages = chunk_all({make_doc(body_of_n_tokens(9))}, 4, 4);
  const std::string path = dir.file("passages.jsonl");
  save_passages(passages, path);
  auto loaded = load_passages(path);
  CHECK(loaded == passages);
}

TEST_CASE("passage store finds by id") {
  PassageStore store(chunk_all({make_doc(body_of_n_tokens(9))}, 4, 4));
  REQUIRE(store.size() == 3);
  REQUIRE(store.find("d#1") != nullptr);
  CHECK(store.find("d#1")->start_token == 4);
  CHECK(store.find("nope") == nullptr);
}
