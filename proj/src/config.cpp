#include "raggen/config.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "raggen/errors.hpp"
#include "raggen/jsonl.hpp"
#include "raggen/text.hpp"

namespace raggen {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::chrono::milliseconds read_ms(const json& j, const char* key,
                                  std::chrono::milliseconds fallback) {
  if (!j.contains(key)) return fallback;
  return std::chrono::milliseconds(j.at(key).get<int64_t>());
}

std::string hex64(uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::string digest_of(const json& j, const std::string& upstream = "") {
  return hex64(text::fnv1a64(upstream + j.dump()));
}

json corpus_section(const RunConfig& c) {
  return {{"path", c.corpus_path},
          {"format", c.corpus_format == IngestFormat::jsonl ? "jsonl" : "text_dir"},
          {"window", c.window},
          {"stride", c.stride}};
}

json backend_section(const RunConfig& c) {
  return {{"kind", c.backend_kind},
          {"endpoint", c.remote_backend.base_url},
          {"model", c.remote_backend.model},
          {"temperature", c.sampling.temperature},
          {"top_p", c.sampling.top_p},
          {"retries", c.sampling.retries},
          {"mock_style",
           c.mock_options.style == MockBackend::QuestionStyle::echo_answer ? "echo_answer"
                                                                           : "irrelevant"},
          {"mock_answer_count", c.mock_options.answer_count}};
}

json synthesis_section(const RunConfig& c) {
  return {{"quotas",
           {{"short_span", c.synthesis.quotas.short_span},
            {"multiple_choice", c.synthesis.quotas.multiple_choice},
            {"claim_verification", c.synthesis.quotas.claim_verification}}},
          {"m_max", c.synthesis.m_max},
          {"filter_k", c.synthesis.filter_k},
          {"context_budget", c.synthesis.context_budget},
          {"claim_overlap_threshold", c.synthesis.claim_overlap_threshold},
          {"reject_copies", c.synthesis.reject_copies},
          {"filter_enabled", c.synthesis.filter_enabled},
          {"retriever", c.retriever_kind},
          {"seed", c.seed}};
}

json blend_section(const RunConfig& c) {
  return {{"total", c.blend_total},
          {"external", c.external_paths},
          {"seed", c.seed}};
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  read_field(j, "seed", c.seed);
  read_field(j, "output_dir", c.output_dir);

  if (j.contains("corpus")) {
    const auto& corpus = j.at("corpus");
    read_field(corpus, "path", c.corpus_path);
    std::string format = "jsonl";
    read_field(corpus, "format", format);
    if (format == "jsonl") {
      c.corpus_format = IngestFormat::jsonl;
    } else if (format == "text_dir") {
      c.corpus_format = IngestFormat::text_dir;
    } else {
      throw ConfigError("corpus.format must be jsonl or text_dir");
    }
    read_field(corpus, "window", c.window);
    read_field(corpus, "stride", c.stride);
  }

  if (j.contains("retriever")) {
    const auto& retriever = j.at("retriever");
    read_field(retriever, "kind", c.retriever_kind);
    read_field(retriever, "endpoint", c.remote_retriever.base_url);
    read_field(retriever, "max_retries", c.remote_retriever.max_retries);
    read_field(retriever, "inflight", c.remote_retriever.max_inflight);
    c.remote_retriever.backoff_base =
        read_ms(retriever, "backoff_ms", c.remote_retriever.backoff_base);
    c.remote_retriever.timeout = read_ms(retriever, "timeout_ms", c.remote_retriever.timeout);
    read_field(retriever, "filter_k", c.synthesis.filter_k);
    read_field(retriever, "context_budget", c.synthesis.context_budget);
  }

  if (j.contains("backend")) {
    const auto& backend = j.at("backend");
    read_field(backend, "kind", c.backend_kind);
    read_field(backend, "endpoint", c.remote_backend.base_url);
    read_field(backend, "model", c.remote_backend.model);
    read_field(backend, "inflight", c.remote_backend.max_inflight);
    c.remote_backend.backoff_base =
        read_ms(backend, "backoff_ms", c.remote_backend.backoff_base);
    c.remote_backend.timeout = read_ms(backend, "timeout_ms", c.remote_backend.timeout);
    read_field(backend, "temperature", c.sampling.temperature);
    read_field(backend, "top_p", c.sampling.top_p);
    read_field(backend, "retries", c.sampling.retries);
    if (backend.contains("seed") && !backend.at("seed").is_null()) {
      c.sampling.seed = backend.at("seed").get<int64_t>();
    }
    std::string style = "echo_answer";
    read_field(backend, "mock_style", style);
    if (style == "echo_answer") {
      c.mock_options.style = MockBackend::QuestionStyle::echo_answer;
    } else if (style == "irrelevant") {
      c.mock_options.style = MockBackend::QuestionStyle::irrelevant;
    } else {
      throw ConfigError("backend.mock_style must be echo_answer or irrelevant");
    }
    read_field(backend, "mock_answer_count", c.mock_options.answer_count);
  }

  if (j.contains("synthesis")) {
    const auto& synthesis = j.at("synthesis");
    if (synthesis.contains("quotas")) {
      const auto& quotas = synthesis.at("quotas");
      read_field(quotas, "short_span", c.synthesis.quotas.short_span);
      read_field(quotas, "multiple_choice", c.synthesis.quotas.multiple_choice);
      read_field(quotas, "claim_verification", c.synthesis.quotas.claim_verification);
    }
    read_field(synthesis, "m_max", c.synthesis.m_max);
    read_field(synthesis, "claim_overlap_threshold", c.synthesis.claim_overlap_threshold);
    read_field(synthesis, "reject_copies", c.synthesis.reject_copies);
    read_field(synthesis, "filter_enabled", c.synthesis.filter_enabled);
    read_field(synthesis, "inflight", c.synthesis.inflight);
  }

  if (j.contains("blend")) {
    const auto& blend = j.at("blend");
    read_field(blend, "total", c.blend_total);
    if (blend.contains("external")) {
      for (const auto& [name, path] : blend.at("external").items()) {
        c.external_paths[name] = path.get<std::string>();
      }
    }
  }

  if (j.contains("evaluation")) {
    read_field(j.at("evaluation"), "items", c.eval_items_path);
  }

  c.synthesis.seed = c.seed;
  c.synthesis.answer_generation.temperature = c.sampling.temperature;
  c.synthesis.answer_generation.top_p = c.sampling.top_p;
  c.synthesis.answer_generation.retries = c.sampling.retries;
  c.synthesis.answer_generation.seed = c.sampling.seed;
  c.synthesis.question_generation.temperature = c.sampling.temperature;
  c.synthesis.question_generation.top_p = c.sampling.top_p;
  c.synthesis.question_generation.retries = c.sampling.retries;
  c.synthesis.question_generation.seed = c.sampling.seed;

  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("config file is not a JSON object: " + path);
  }
  return config_from_json(j);
}

void validate(const RunConfig& c) {
  if (c.window == 0 || c.stride == 0 || c.stride > c.window) {
    throw ConfigError("corpus chunking requires 0 < stride <= window");
  }
  if (c.retriever_kind != "local" && c.retriever_kind != "remote") {
    throw ConfigError("retriever.kind must be local or remote");
  }
  if (c.retriever_kind == "remote" && c.remote_retriever.base_url.empty()) {
    throw ConfigError("retriever.endpoint is required for a remote retriever");
  }
  if (c.backend_kind != "mock" && c.backend_kind != "remote") {
    throw ConfigError("backend.kind must be mock or remote");
  }
  if (c.backend_kind == "remote" && c.remote_backend.base_url.empty()) {
    throw ConfigError("backend.endpoint is required for a remote backend");
  }
  if (c.sampling.temperature < 0.0) {
    throw ConfigError("backend.temperature must be >= 0");
  }
  if (c.sampling.top_p <= 0.0 || c.sampling.top_p > 1.0) {
    throw ConfigError("backend.top_p must be in (0, 1]");
  }
  if (c.sampling.retries < 0) {
    throw ConfigError("backend.retries must be >= 0");
  }
  if (c.synthesis.filter_k == 0 || c.synthesis.context_budget == 0) {
    throw ConfigError("retriever.filter_k and retriever.context_budget must be >= 1");
  }
  if (c.synthesis.claim_overlap_threshold < 0.0 || c.synthesis.claim_overlap_threshold > 1.0) {
    throw ConfigError("synthesis.claim_overlap_threshold must be in [0, 1]");
  }
  if (c.blend_total == 0) {
    throw ConfigError("blend.total must be >= 1");
  }
  if (c.output_dir.empty()) {
    throw ConfigError("output_dir must be non-empty");
  }
}

std::string digest_ingest(const RunConfig& c) { return digest_of(corpus_section(c)); }

std::string digest_index(const RunConfig& c) {
  return digest_of(json{{"k1", 1.2}, {"b", 0.75}}, digest_ingest(c));
}

std::string digest_synthesize(const RunConfig& c) {
  return digest_of(json{{"synthesis", synthesis_section(c)}, {"backend", backend_section(c)}},
                   digest_index(c));
}

std::string digest_blend(const RunConfig& c) {
  return digest_of(blend_section(c), digest_synthesize(c));
}

std::string digest_evaluate(const RunConfig& c) {
  return digest_of(json{{"backend", backend_section(c)},
                        {"context_budget", c.synthesis.context_budget},
                        {"items", c.eval_items_path}},
                   digest_index(c));
}

DirLock::DirLock(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  lock_path_ = dir + "/.lock";
  int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw Error("another command is running in " + dir + " (remove " + lock_path_ +
                  " if that is not the case)");
    }
    throw IoError("cannot create lock file " + lock_path_);
  }
  ::close(fd);
}

DirLock::~DirLock() { std::remove(lock_path_.c_str()); }

}  // namespace raggen
