#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "raggen/blending.hpp"
#include "raggen/config.hpp"
#include "raggen/corpus.hpp"
#include "raggen/errors.hpp"
#include "raggen/evaluation.hpp"
#include "raggen/generation.hpp"
#include "raggen/jsonl.hpp"
#include "raggen/retrieval.hpp"
#include "raggen/synthesis.hpp"

namespace {

using namespace raggen;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitConfig = 2;

struct CliOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<std::string> output_dir;
  bool keep_rejects = false;
};

RunConfig effective_config(const CliOptions& options) {
  RunConfig config = load_config(options.config_path);
  if (options.seed) {
    config.seed = *options.seed;
    config.synthesis.seed = *options.seed;
  }
  if (options.backend) {
    config.backend_kind = *options.backend;
  }
  if (options.output_dir) {
    config.output_dir = *options.output_dir;
  }
  validate(config);
  return config;
}

std::string artifact(const RunConfig& config, const char* name) {
  return config.output_dir + "/" + name;
}

void write_digest(const RunConfig& config, const char* artifact_name,
                  const std::string& command, const std::string& digest) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["digest"] = digest;
  jsonl::write_text_atomic(artifact(config, artifact_name) + ".digest.json", j.dump(2));
}

// Fails loudly when an upstream artifact is missing or was produced under a
// different configuration.
void require_upstream(const RunConfig& config, const char* artifact_name,
                      const std::string& expected_digest, const std::string& producer) {
  const std::string path = artifact(config, artifact_name);
  if (!std::filesystem::exists(path)) {
    throw Error("missing " + path + "; run `raggen " + producer + "` first");
  }
  const std::string digest_path = path + ".digest.json";
  if (!std::filesystem::exists(digest_path)) {
    throw Error("missing digest for " + path + "; rerun `raggen " + producer + "`");
  }
  json j = jsonl::read_json_file(digest_path);
  if (j.value("digest", "") != expected_digest) {
    throw Error(path + " is stale for this configuration; rerun `raggen " + producer + "`");
  }
}

std::unique_ptr<GenerationBackend> make_backend(const RunConfig& config) {
  if (config.backend_kind == "mock") {
    return std::make_unique<MockBackend>(config.seed, config.mock_options);
  }
  RemoteBackendConfig remote = config.remote_backend;
  if (const char* key = std::getenv("RAGGEN_API_KEY")) remote.api_key = key;
  return std::make_unique<RemoteBackend>(remote);
}

std::unique_ptr<Retriever> make_retriever(const RunConfig& config,
                                          const PassageStore& store) {
  if (config.retriever_kind == "local") {
    return std::make_unique<LocalBm25Retriever>(
        Bm25Index::load(artifact(config, "index.json")));
  }
  std::unordered_set<std::string> known;
  for (const auto& passage : store.passages()) known.insert(passage.passage_id);
  return std::make_unique<RemoteRetriever>(config.remote_retriever, std::move(known));
}

PassageStore load_store(const RunConfig& config) {
  return PassageStore(load_passages(artifact(config, "passages.jsonl")));
}

int cmd_ingest(const CliOptions& options) {
  RunConfig config = effective_config(options);
  if (config.corpus_path.empty()) throw ConfigError("corpus.path is required for ingest");
  DirLock lock(config.output_dir);
  IngestStats stats;
  auto documents = ingest(config.corpus_path, config.corpus_format, &stats);
  auto passages = chunk_all(documents, config.window, config.stride);
  save_passages(passages, artifact(config, "passages.jsonl"));
  write_digest(config, "passages.jsonl", "ingest", digest_ingest(config));
  std::cout << "ingested " << stats.documents << " documents (" << stats.skipped_malformed
            << " malformed lines skipped, " << stats.deduped << " duplicates dropped), "
            << passages.size() << " passages\n";
  return kExitOk;
}

int cmd_index(const CliOptions& options) {
  RunConfig config = effective_config(options);
  DirLock lock(config.output_dir);
  require_upstream(config, "passages.jsonl", digest_ingest(config), "ingest");
  auto passages = load_passages(artifact(config, "passages.jsonl"));
  auto index = Bm25Index::build(passages);
  index.save(artifact(config, "index.json"));
  write_digest(config, "index.json", "index", digest_index(config));
  const auto& stats = index.stats();
  std::cout << "indexed " << stats.passage_count << " passages, vocabulary "
            << stats.vocabulary_size << ", avg length " << stats.avg_doc_len << "\n";
  return kExitOk;
}

int cmd_synthesize(const CliOptions& options) {
  RunConfig config = effective_config(options);
  DirLock lock(config.output_dir);
  require_upstream(config, "passages.jsonl", digest_ingest(config), "ingest");
  require_upstream(config, "index.json", digest_index(config), "index");
  PassageStore store = load_store(config);
  auto retriever = make_retriever(config, store);
  auto backend = make_backend(config);

  auto output = run_synthesis(store.passages(), *backend, *retriever, store, config.synthesis);
  std::vector<SyntheticExample> to_save = output.kept;
  if (options.keep_rejects) {
    to_save.insert(to_save.end(), output.rejects.begin(), output.rejects.end());
  }
  save_examples(to_save, artifact(config, "synthetic.jsonl"));
  save_report(output.report, artifact(config, "synthesis_report.json"));
  write_digest(config, "synthetic.jsonl", "synthesize", digest_synthesize(config));
  std::cout << "kept " << output.report.total_kept() << " of "
            << output.report.total_generated() << " generated examples (retention "
            << output.report.retention_rate << ")\n";
  for (const auto& warning : output.report.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }
  return kExitOk;
}

BlendPools load_pools(const RunConfig& config, const std::vector<BlendEntry>& entries) {
  auto examples = load_examples(artifact(config, "synthetic.jsonl"));
  BlendPools pools = split_pools(examples);
  for (const auto& entry : entries) {
    if (entry.source == BlendSource::external_file && !entry.path.empty()) {
      pools.external[entry.name] = load_records(entry.path);
    }
  }
  return pools;
}

std::vector<BlendEntry> blend_entries(const RunConfig& config,
                                      std::vector<std::string>* warnings) {
  return resolve_blend(default_blend(), config.external_paths, warnings);
}

int cmd_blend(const CliOptions& options) {
  RunConfig config = effective_config(options);
  DirLock lock(config.output_dir);
  require_upstream(config, "synthetic.jsonl", digest_synthesize(config), "synthesize");
  std::vector<std::string> warnings;
  auto entries = blend_entries(config, &warnings);
  auto pools = load_pools(config, entries);
  BlendPlan plan = plan_blend(entries, pools, config.blend_total, config.seed);
  plan.warnings.insert(plan.warnings.begin(), warnings.begin(), warnings.end());
  save_blend_plan(plan, artifact(config, "blend_plan.json"));
  write_digest(config, "blend_plan.json", "blend", digest_blend(config));
  std::cout << "planned " << plan.total << " records across " << plan.entries.size()
            << " entries\n";
  for (const auto& warning : plan.warnings) std::cerr << "warning: " << warning << "\n";
  return kExitOk;
}

int cmd_export(const CliOptions& options) {
  RunConfig config = effective_config(options);
  DirLock lock(config.output_dir);
  require_upstream(config, "synthetic.jsonl", digest_synthesize(config), "synthesize");
  require_upstream(config, "blend_plan.json", digest_blend(config), "blend");
  require_upstream(config, "passages.jsonl", digest_ingest(config), "ingest");
  BlendPlan plan = load_blend_plan(artifact(config, "blend_plan.json"));
  std::vector<BlendEntry> entries;
  for (const auto& planned : plan.entries) entries.push_back(planned.entry);
  auto pools = load_pools(config, entries);
  PassageStore store = load_store(config);
  auto records = materialize(plan, pools, store);
  export_records(records, artifact(config, "train.jsonl"), digest_blend(config), config.seed);
  write_digest(config, "train.jsonl", "export", digest_blend(config));
  std::cout << "exported " << records.size() << " records to "
            << artifact(config, "train.jsonl") << "\n";
  return kExitOk;
}

int cmd_evaluate(const CliOptions& options, const std::string& items_override) {
  RunConfig config = effective_config(options);
  if (!items_override.empty()) config.eval_items_path = items_override;
  if (config.eval_items_path.empty()) {
    throw ConfigError("evaluation.items (or --items) is required for evaluate");
  }
  DirLock lock(config.output_dir);
  require_upstream(config, "passages.jsonl", digest_ingest(config), "ingest");
  require_upstream(config, "index.json", digest_index(config), "index");
  PassageStore store = load_store(config);
  auto retriever = make_retriever(config, store);
  auto backend = make_backend(config);
  auto items = load_eval_items(config.eval_items_path);
  EvaluateConfig eval_config;
  eval_config.context_budget = config.synthesis.context_budget;
  eval_config.generation = config.sampling;
  eval_config.generation.max_new_tokens = 512;
  auto report = evaluate(items, retriever.get(), &store, *backend, eval_config);
  save_eval_report(report, artifact(config, "eval_report.json"));
  jsonl::write_text_atomic(artifact(config, "eval_summary.txt"), format_eval_summary(report));
  write_digest(config, "eval_report.json", "evaluate", digest_evaluate(config));
  std::cout << format_eval_summary(report);
  return kExitOk;
}

int cmd_stats(const CliOptions& options) {
  RunConfig config = effective_config(options);
  const std::string report_path = artifact(config, "synthesis_report.json");
  bool printed = false;
  if (std::filesystem::exists(report_path)) {
    auto report = load_report(report_path);
    const auto print_type = [](const char* name, const TypeCounters& c) {
      std::cout << "  " << name << ": generated " << c.generated << ", kept " << c.kept
                << ", dropped_not_retrieved " << c.dropped_not_retrieved
                << ", dropped_malformed " << c.dropped_malformed << "\n";
    };
    std::cout << "synthesis report:\n";
    print_type("short_span", report.short_span);
    print_type("multiple_choice", report.multiple_choice);
    print_type("claim_verification", report.claim_verification);
    std::cout << "  retention_rate: " << report.retention_rate << "\n";
    for (const auto& warning : report.warnings) {
      std::cout << "  warning: " << warning << "\n";
    }
    printed = true;
  }
  const std::string manifest_path = artifact(config, "train.jsonl.manifest.json");
  if (std::filesystem::exists(manifest_path)) {
    json manifest = jsonl::read_json_file(manifest_path);
    std::cout << "export manifest:\n  total: " << manifest.value("total", 0) << "\n";
    if (manifest.contains("counts")) {
      for (const auto& [name, count] : manifest.at("counts").items()) {
        std::cout << "  " << name << ": " << count.get<size_t>() << "\n";
      }
    }
    printed = true;
  }
  if (!printed) {
    std::cout << "no artifacts found in " << config.output_dir << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-training data engine for retrieval-augmented QA"};
  app.require_subcommand(1);

  CliOptions options;
  std::string items_override;
  app.add_option("--config", options.config_path, "Run configuration file (JSON)")
      ->required();
  uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the run seed");
  std::string backend_value;
  auto* backend_opt =
      app.add_option("--backend", backend_value, "Override the generation backend")
          ->check(CLI::IsMember({"mock", "remote"}));
  std::string out_value;
  auto* out_opt = app.add_option("--out", out_value, "Override the output directory");
  app.add_flag("--keep-rejects", options.keep_rejects,
               "Persist filtered-out examples for auditing");

  auto* ingest_cmd = app.add_subcommand("ingest", "Chunk raw documents into passages");
  auto* index_cmd = app.add_subcommand("index", "Build the BM25 index over passages");
  auto* synthesize_cmd =
      app.add_subcommand("synthesize", "Generate and filter pseudo-labeled examples");
  auto* blend_cmd = app.add_subcommand("blend", "Plan the training mixture");
  auto* export_cmd = app.add_subcommand("export", "Materialize the training file");
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "Score a backend under retrieval-augmented inference");
  evaluate_cmd->add_option("--items", items_override, "Eval items jsonl");
  auto* stats_cmd = app.add_subcommand("stats", "Print synthesis and export summaries");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*seed_opt) options.seed = seed_value;
  if (*backend_opt) options.backend = backend_value;
  if (*out_opt) options.output_dir = out_value;

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(options);
    if (index_cmd->parsed()) return cmd_index(options);
    if (synthesize_cmd->parsed()) return cmd_synthesize(options);
    if (blend_cmd->parsed()) return cmd_blend(options);
    if (export_cmd->parsed()) return cmd_export(options);
    if (evaluate_cmd->parsed()) return cmd_evaluate(options, items_override);
    if (stats_cmd->parsed()) return cmd_stats(options);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitConfig;
}
