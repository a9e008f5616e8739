#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "raggen/corpus.hpp"

namespace raggen {

struct RetrievalResult {
  std::string passage_id;
  double score = 0.0;
  size_t rank = 0;  // 1-based; consecutive within one result list

  bool operator==(const RetrievalResult&) const = default;
};

struct IndexStats {
  size_t passage_count = 0;
  double avg_doc_len = 0.0;  // in normalized tokens
  size_t vocabulary_size = 0;
};

// Okapi BM25 over an inverted index of light-normalized tokens.
//   idf(t)      = ln((N - df + 0.5) / (df + 0.5) + 1)
//   term(t, d)  = idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
// The query contributes one term() per token occurrence. Zero-score passages
// are excluded; ties break by ascending passage_id, so ranking is a total
// order and results are reproducible.
class Bm25Index {
 public:
  struct Params {
    double k1 = 1.2;
    double b = 0.75;
  };

  static Bm25Index build(const std::vector<Passage>& passages, Params params);
  static Bm25Index build(const std::vector<Passage>& passages) {
    return build(passages, Params{});
  }

  std::vector<RetrievalResult> search(std::string_view query, size_t k) const;

  const IndexStats& stats() const { return stats_; }
  const Params& params() const { return params_; }

  // Round-trips through a versioned JSON file.
  void save(const std::string& path) const;
  static Bm25Index load(const std::string& path);

 private:
  struct Posting {
    uint32_t passage = 0;
    uint32_t tf = 0;
  };

  Params params_;
  IndexStats stats_;
  std::vector<std::string> passage_ids_;
  std::vector<uint32_t> doc_lengths_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

// Top-k retrieval used by round-trip filtering, context assembly and
// evaluation. Implementations must be safe for concurrent retrieve calls.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<RetrievalResult> retrieve(std::string_view query, size_t k) = 0;
};

class LocalBm25Retriever : public Retriever {
 public:
  explicit LocalBm25Retriever(Bm25Index index) : index_(std::move(index)) {}
  std::vector<RetrievalResult> retrieve(std::string_view query, size_t k) override {
    return index_.search(query, k);
  }
  const Bm25Index& index() const { return index_; }

 private:
  Bm25Index index_;
};

struct RemoteRetrieverConfig {
  std::string base_url;            // e.g. http://127.0.0.1:8089
  std::string path = "/retrieve";
  size_t max_retries = 3;
  std::chrono::milliseconds backoff_base{200};
  std::chrono::milliseconds timeout{10000};
  size_t max_inflight = 8;
};

// HTTP client for a dense-retriever service speaking
//   request  {"query": <text>, "k": <integer>}
//   response {"results": [{"id": <passage_id>, "score": <real>}, ...]}
// Results must come back in non-increasing score order; ids that do not
// resolve against the local corpus are rejected per item and counted.
// Concurrent calls are independent, capped at config.max_inflight.
class RemoteRetriever : public Retriever {
 public:
  RemoteRetriever(RemoteRetrieverConfig config,
                  std::unordered_set<std::string> known_passage_ids);

  std::vector<RetrievalResult> retrieve(std::string_view query, size_t k) override;

  size_t rejected_count() const { return rejected_count_.load(); }

 private:
  RemoteRetrieverConfig config_;
  std::unordered_set<std::string> known_ids_;
  std::atomic<size_t> rejected_count_{0};
  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  size_t inflight_ = 0;
};

}  // namespace raggen
