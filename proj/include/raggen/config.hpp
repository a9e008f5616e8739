#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "raggen/blending.hpp"
#include "raggen/corpus.hpp"
#include "raggen/generation.hpp"
#include "raggen/retrieval.hpp"
#include "raggen/synthesis.hpp"

namespace raggen {

// One structured configuration file governs a run; CLI flags override
// individual fields. Auth tokens come only from the environment
// (RAGGEN_API_KEY), never from the file.
struct RunConfig {
  uint64_t seed = 0;
  std::string output_dir = "out";

  // corpus
  std::string corpus_path;
  IngestFormat corpus_format = IngestFormat::jsonl;
  size_t window = 300;
  size_t stride = 300;

  // retriever
  std::string retriever_kind = "local";  // local | remote
  RemoteRetrieverConfig remote_retriever;

  // generation backend
  std::string backend_kind = "mock";  // mock | remote
  RemoteBackendConfig remote_backend;
  MockBackend::Options mock_options;
  GenerationConfig sampling;  // base sampling knobs; per-call token caps apply

  // synthesis
  SynthesisConfig synthesis;

  // blend
  size_t blend_total = 1000;
  std::map<std::string, std::string> external_paths;  // blend entry -> jsonl

  // evaluation
  std::string eval_items_path;
};

RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);
void validate(const RunConfig& config);

// Stable fingerprints for artifact staleness checks. Each pipeline step's digest
// folds in its upstream digest, so any config change that affects an
// artifact changes every digest downstream of it.
std::string digest_ingest(const RunConfig& config);
std::string digest_index(const RunConfig& config);
std::string digest_synthesize(const RunConfig& config);
std::string digest_blend(const RunConfig& config);
std::string digest_evaluate(const RunConfig& config);

// Creates output_dir/.lock exclusively; the destructor removes it. Commands
// run one at a time per output directory.
class DirLock {
 public:
  explicit DirLock(const std::string& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string lock_path_;
};

}  // namespace raggen
