#include "raggen/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "raggen/errors.hpp"
#include "raggen/jsonl.hpp"
#include "raggen/text.hpp"

namespace raggen {

using nlohmann::json;

namespace {

constexpr const char* kIndexFormat = "raggen.index.v1";

}  // namespace

Bm25Index Bm25Index::build(const std::vector<Passage>& passages, Params params) {
  if (passages.empty()) throw RetrievalError("cannot build an index over zero passages");
  Bm25Index index;
  index.params_ = params;
  index.passage_ids_.reserve(passages.size());
  index.doc_lengths_.reserve(passages.size());
  size_t total_len = 0;
  for (const auto& passage : passages) {
    uint32_t id = static_cast<uint32_t>(index.passage_ids_.size());
    index.passage_ids_.push_back(passage.passage_id);
    auto tokens = text::light_tokens(passage.text);
    index.doc_lengths_.push_back(static_cast<uint32_t>(tokens.size()));
    total_len += tokens.size();
    std::unordered_map<std::string, uint32_t> tf;
    for (auto& t : tokens) ++tf[t];
    for (auto& [term, count] : tf) {
      index.postings_[term].push_back({id, count});
    }
  }
  index.stats_.passage_count = passages.size();
  index.stats_.avg_doc_len =
      passages.empty() ? 0.0 : static_cast<double>(total_len) / passages.size();
  index.stats_.vocabulary_size = index.postings_.size();
  return index;
}

std::vector<RetrievalResult> Bm25Index::search(std::string_view query, size_t k) const {
  std::vector<RetrievalResult> out;
  if (k == 0) return out;
  auto terms = text::light_tokens(query);
  if (terms.empty() || stats_.avg_doc_len <= 0.0) return out;

  const double n = static_cast<double>(stats_.passage_count);
  std::unordered_map<uint32_t, double> scores;
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const auto& list = it->second;
    const double df = static_cast<double>(list.size());
    const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    for (const auto& posting : list) {
      const double tf = posting.tf;
      const double dl = doc_lengths_[posting.passage];
      const double denom =
          tf + params_.k1 * (1.0 - params_.b + params_.b * dl / stats_.avg_doc_len);
      scores[posting.passage] += idf * tf * (params_.k1 + 1.0) / denom;
    }
  }

  std::vector<std::pair<uint32_t, double>> scored;
  scored.reserve(scores.size());
  for (const auto& [passage, score] : scores) {
    if (score > 0.0) scored.emplace_back(passage, score);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return passage_ids_[a.first] < passage_ids_[b.first];
  });
  if (scored.size() > k) scored.resize(k);

  out.reserve(scored.size());
  for (size_t i = 0; i < scored.size(); ++i) {
    out.push_back({passage_ids_[scored[i].first], scored[i].second, i + 1});
  }
  return out;
}

void Bm25Index::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["format"] = kIndexFormat;
  j["k1"] = params_.k1;
  j["b"] = params_.b;
  json passages = json::array();
  for (size_t i = 0; i < passage_ids_.size(); ++i) {
    passages.push_back({passage_ids_[i], doc_lengths_[i]});
  }
  j["passages"] = std::move(passages);
  json postings = json::object();
  for (const auto& [term, list] : postings_) {
    json entries = json::array();
    for (const auto& posting : list) {
      entries.push_back({posting.passage, posting.tf});
    }
    postings[term] = std::move(entries);
  }
  j["postings"] = std::move(postings);
  jsonl::write_text_atomic(path, j.dump());
}

Bm25Index Bm25Index::load(const std::string& path) {
  json j = jsonl::read_json_file(path);
  if (!j.is_object() || j.value("format", "") != kIndexFormat) {
    throw IoError("unrecognized index format in " + path);
  }
  Bm25Index index;
  index.params_.k1 = j.at("k1").get<double>();
  index.params_.b = j.at("b").get<double>();
  size_t total_len = 0;
  for (const auto& entry : j.at("passages")) {
    index.passage_ids_.push_back(entry.at(0).get<std::string>());
    index.doc_lengths_.push_back(entry.at(1).get<uint32_t>());
    total_len += index.doc_lengths_.back();
  }
  for (const auto& [term, entries] : j.at("postings").items()) {
    auto& list = index.postings_[term];
    for (const auto& entry : entries) {
      list.push_back({entry.at(0).get<uint32_t>(), entry.at(1).get<uint32_t>()});
    }
  }
  index.stats_.passage_count = index.passage_ids_.size();
  index.stats_.avg_doc_len = index.passage_ids_.empty()
                                 ? 0.0
                                 : static_cast<double>(total_len) / index.passage_ids_.size();
  index.stats_.vocabulary_size = index.postings_.size();
  return index;
}

RemoteRetriever::RemoteRetriever(RemoteRetrieverConfig config,
                                 std::unordered_set<std::string> known_passage_ids)
    : config_(std::move(config)), known_ids_(std::move(known_passage_ids)) {}

std::vector<RetrievalResult> RemoteRetriever::retrieve(std::string_view query, size_t k) {
  json request;
  request["query"] = std::string(query);
  request["k"] = k;
  const std::string body = request.dump();

  {
    std::unique_lock lock(slots_mutex_);
    slots_cv_.wait(lock, [&] { return inflight_ < std::max<size_t>(1, config_.max_inflight); });
    ++inflight_;
  }
  struct SlotRelease {
    RemoteRetriever* self;
    ~SlotRelease() {
      {
        std::lock_guard lock(self->slots_mutex_);
        --self->inflight_;
      }
      self->slots_cv_.notify_one();
    }
  } release{this};

  std::string last_error;
  for (size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(config_.backoff_base * (1u << (attempt - 1)));
    }
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.timeout));
    auto res = client.Post(config_.path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    json payload = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (payload.is_discarded() || !payload.is_object() || !payload.contains("results")) {
      throw RetrievalError("malformed retriever response from " + config_.base_url);
    }
    std::vector<RetrievalResult> out;
    double previous = 0.0;
    bool first = true;
    for (const auto& item : payload["results"]) {
      std::string id = item.at("id").get<std::string>();
      double score = item.at("score").get<double>();
      if (!first && score > previous) {
        throw RetrievalError("remote retriever returned scores out of order");
      }
      previous = score;
      first = false;
      if (!known_ids_.count(id)) {
        ++rejected_count_;
        continue;
      }
      out.push_back({std::move(id), score, out.size() + 1});
    }
    if (out.size() > k) out.resize(k);
    return out;
  }
  throw RetrievalError("retrieval unavailable after " +
                       std::to_string(config_.max_retries + 1) + " attempts (" +
                       last_error + ")");
}

}  // namespace raggen
