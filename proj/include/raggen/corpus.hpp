#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace raggen {

struct Document {
  std::string doc_id;   // unique within a corpus
  std::string title;    // may be empty
  std::string body;     // non-empty after trimming
  std::string source;   // file path or collection name
};

// A sliding-window chunk of a document; the unit of retrieval and grounding.
struct Passage {
  std::string passage_id;  // doc_id + "#" + zero-based chunk index
  std::string doc_id;
  std::string title;
  std::string text;        // window tokens joined by single spaces
  size_t start_token = 0;
  size_t token_count = 0;

  bool operator==(const Passage&) const = default;
};

enum class IngestFormat { jsonl, text_dir };

struct IngestStats {
  size_t documents = 0;
  size_t skipped_malformed = 0;
  size_t deduped = 0;
};

// jsonl mode: one object per line with fields `text` (required), `id` and
// `title` (optional). text_dir mode: one document per *.txt file, title =
// file stem, files visited in sorted order. Exact duplicate bodies (after
// trimming) are dropped. Throws CorpusError on an unreadable path or when
// nothing was ingested; malformed jsonl lines are skipped and counted.
std::vector<Document> ingest(const std::string& path, IngestFormat format,
                             IngestStats* stats = nullptr);

// Windows of at most `window` tokens advancing by `stride` (0 < stride <=
// window); a window starts at every multiple of `stride` below the token
// count, so the tail is always covered. Empty body yields no passages.
std::vector<Passage> chunk(const Document& doc, size_t window, size_t stride);

// Chunks every document and orders the result by (source, doc_id, chunk
// index) so parallel ingestion would land in the same canonical order.
std::vector<Passage> chunk_all(const std::vector<Document>& docs,
                               size_t window, size_t stride);

// Inverse of passage_id construction; splits on the last '#' so doc ids
// containing '#' survive the round trip.
std::pair<std::string, size_t> parse_passage_id(const std::string& passage_id);

void save_passages(const std::vector<Passage>& passages, const std::string& path);
std::vector<Passage> load_passages(const std::string& path);

// Immutable id-indexed passage collection shared by the filter, the blender
// and the evaluator.
class PassageStore {
 public:
  PassageStore() = default;
  explicit PassageStore(std::vector<Passage> passages);

  const Passage* find(const std::string& passage_id) const;
  const std::vector<Passage>& passages() const { return passages_; }
  size_t size() const { return passages_.size(); }
  bool contains(const std::string& passage_id) const { return find(passage_id) != nullptr; }

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, size_t> by_id_;
};

}  // namespace raggen
