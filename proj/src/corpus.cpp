#include "raggen/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "raggen/errors.hpp"
#include "raggen/jsonl.hpp"
#include "raggen/text.hpp"

namespace raggen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Appends `doc` unless its trimmed body was already seen.
bool add_unique(std::vector<Document>& docs,
                std::unordered_set<std::string>& seen_bodies,
                Document doc, IngestStats& stats) {
  doc.body = text::trim(doc.body);
  if (doc.body.empty()) return false;
  if (!seen_bodies.insert(doc.body).second) {
    ++stats.deduped;
    return false;
  }
  docs.push_back(std::move(doc));
  ++stats.documents;
  return true;
}

void ingest_jsonl(const std::string& path, std::vector<Document>& docs,
                  IngestStats& stats) {
  std::unordered_set<std::string> seen_bodies;
  size_t ordinal = 0;
  jsonl::for_each_line(path, [&](size_t line_no, const std::string& line) {
    size_t record_ordinal = ordinal++;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
        !j["text"].is_string() || text::trim(j["text"].get<std::string>()).empty()) {
      ++stats.skipped_malformed;
      std::cerr << "skipping malformed record at " << path << ":" << line_no << "\n";
      return;
    }
    Document doc;
    doc.source = path;
    doc.body = j["text"].get<std::string>();
    doc.title = j.value("title", "");
    if (j.contains("id") && j["id"].is_string() && !j["id"].get<std::string>().empty()) {
      doc.doc_id = j["id"].get<std::string>();
    } else {
      doc.doc_id = path + ":" + std::to_string(record_ordinal);
    }
    add_unique(docs, seen_bodies, std::move(doc), stats);
  });
}

void ingest_text_dir(const std::string& path, std::vector<Document>& docs,
                     IngestStats& stats) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::unordered_set<std::string> seen_bodies;
  size_t ordinal = 0;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CorpusError("cannot read " + file.string());
    std::ostringstream body;
    body << in.rdbuf();
    Document doc;
    doc.source = path;
    doc.doc_id = path + ":" + std::to_string(ordinal++);
    doc.title = file.stem().string();
    doc.body = body.str();
    add_unique(docs, seen_bodies, std::move(doc), stats);
  }
}

}  // namespace

std::vector<Document> ingest(const std::string& path, IngestFormat format,
                             IngestStats* stats_out) {
  IngestStats stats;
  std::vector<Document> docs;
  std::error_code ec;
  if (!fs::exists(path, ec) || ec) {
    throw CorpusError("corpus path not found: " + path);
  }
  if (format == IngestFormat::jsonl) {
    ingest_jsonl(path, docs, stats);
  } else {
    if (!fs::is_directory(path)) {
      throw CorpusError("expected a directory for text-dir ingestion: " + path);
    }
    ingest_text_dir(path, docs, stats);
  }
  if (docs.empty()) {
    throw CorpusError("zero documents ingested from " + path);
  }
  if (stats.deduped > 0) {
    std::cerr << "dropped " << stats.deduped << " duplicate document bodies\n";
  }
  if (stats_out) *stats_out = stats;
  return docs;
}

std::vector<Passage> chunk(const Document& doc, size_t window, size_t stride) {
  if (window == 0 || stride == 0 || stride > window) {
    throw ConfigError("chunking requires 0 < stride <= window");
  }
  auto tokens = text::whitespace_tokens(doc.body);
  std::vector<Passage> passages;
  size_t index = 0;
  for (size_t start = 0; start < tokens.size(); start += stride, ++index) {
    size_t end = std::min(start + window, tokens.size());
    Passage p;
    p.doc_id = doc.doc_id;
    p.passage_id = doc.doc_id + "#" + std::to_string(index);
    p.title = doc.title;
    p.start_token = start;
    p.token_count = end - start;
    std::string joined;
    for (size_t i = start; i < end; ++i) {
      if (i > start) joined.push_back(' ');
      joined += tokens[i];
    }
    p.text = std::move(joined);
    passages.push_back(std::move(p));
  }
  return passages;
}

std::vector<Passage> chunk_all(const std::vector<Document>& docs,
                               size_t window, size_t stride) {
  std::vector<std::pair<std::string, Passage>> keyed;  // key = source
  for (const auto& doc : docs) {
    for (auto& p : chunk(doc, window, stride)) {
      keyed.emplace_back(doc.source, std::move(p));
    }
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    if (a.second.doc_id != b.second.doc_id) return a.second.doc_id < b.second.doc_id;
    return a.second.start_token < b.second.start_token;
  });
  std::vector<Passage> out;
  out.reserve(keyed.size());
  for (auto& [_, p] : keyed) out.push_back(std::move(p));
  return out;
}

std::pair<std::string, size_t> parse_passage_id(const std::string& passage_id) {
  size_t pos = passage_id.rfind('#');
  if (pos == std::string::npos || pos + 1 >= passage_id.size()) {
    throw CorpusError("malformed passage id: " + passage_id);
  }
  size_t index = 0;
  try {
    index = std::stoull(passage_id.substr(pos + 1));
  } catch (const std::exception&) {
    throw CorpusError("malformed passage id: " + passage_id);
  }
  return {passage_id.substr(0, pos), index};
}

void save_passages(const std::vector<Passage>& passages, const std::string& path) {
  size_t i = 0;
  jsonl::write_atomic(path, [&](std::string& line) {
    if (i >= passages.size()) return false;
    const Passage& p = passages[i++];
    nlohmann::ordered_json j;
    j["passage_id"] = p.passage_id;
    j["doc_id"] = p.doc_id;
    j["title"] = p.title;
    j["text"] = p.text;
    j["start_token"] = p.start_token;
    j["token_count"] = p.token_count;
    line = j.dump();
    return true;
  });
}

std::vector<Passage> load_passages(const std::string& path) {
  std::vector<Passage> passages;
  jsonl::for_each_line(path, [&](size_t line_no, const std::string& line) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      throw IoError("invalid passage record at " + path + ":" + std::to_string(line_no));
    }
    Passage p;
    p.passage_id = j.at("passage_id").get<std::string>();
    p.doc_id = j.at("doc_id").get<std::string>();
    p.title = j.value("title", "");
    p.text = j.at("text").get<std::string>();
    p.start_token = j.value("start_token", 0u);
    p.token_count = j.value("token_count", 0u);
    passages.push_back(std::move(p));
  });
  return passages;
}

PassageStore::PassageStore(std::vector<Passage> passages)
    : passages_(std::move(passages)) {
  for (size_t i = 0; i < passages_.size(); ++i) {
    by_id_[passages_[i].passage_id] = i;
  }
}

const Passage* PassageStore::find(const std::string& passage_id) const {
  auto it = by_id_.find(passage_id);
  return it == by_id_.end() ? nullptr : &passages_[it->second];
}

}  // namespace raggen
