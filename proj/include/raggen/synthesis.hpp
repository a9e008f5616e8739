#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "raggen/corpus.hpp"
#include "raggen/generation.hpp"
#include "raggen/retrieval.hpp"
#include "raggen/rng.hpp"

namespace raggen {

enum class TaskType { short_span, multiple_choice, claim_verification };

enum class FilterStatus { kept, dropped_not_retrieved, dropped_malformed };

// An extracted answer span tied to its source passage.
struct CandidateAnswer {
  std::string passage_id;
  std::string span;     // non-empty, occurs case-insensitively in the passage
  size_t ordinal = 0;   // position in the semicolon-separated completion

  bool operator==(const CandidateAnswer&) const = default;
};

struct McOption {
  char letter = 'A';
  std::string text;

  bool operator==(const McOption&) const = default;
};

// A pseudo-labeled (question, contexts, answer) tuple.
struct SyntheticExample {
  std::string example_id;
  TaskType task_type = TaskType::short_span;
  std::string question;
  std::vector<McOption> options;  // exactly A-D iff multiple_choice
  std::string gold;               // span, option letter, or "Yes"/"No"
  std::string claim;              // claim_verification only
  std::string source_passage_id;
  std::vector<std::string> context_ids;  // retrieved, in rank order
  FilterStatus filter_status = FilterStatus::kept;

  bool operator==(const SyntheticExample&) const = default;
};

struct TypeCounters {
  size_t generated = 0;
  size_t kept = 0;
  size_t dropped_not_retrieved = 0;
  size_t dropped_malformed = 0;

  bool operator==(const TypeCounters&) const = default;
};

struct SynthesisReport {
  TypeCounters short_span;
  TypeCounters multiple_choice;
  TypeCounters claim_verification;
  size_t answer_extraction_failures = 0;
  double retention_rate = 0.0;  // kept / generated over all types
  std::vector<std::string> warnings;

  TypeCounters& by_type(TaskType t);
  const TypeCounters& by_type(TaskType t) const;
  size_t total_generated() const;
  size_t total_kept() const;
  void finalize();  // recomputes retention_rate

  bool operator==(const SynthesisReport&) const = default;
};

struct Quotas {
  // Kept-example targets; defaults are the Llama-backbone sample budgets.
  size_t short_span = 150000;
  size_t multiple_choice = 50000;
  size_t claim_verification = 100000;
};

inline GenerationConfig capped_generation(int max_new_tokens) {
  GenerationConfig config;
  config.max_new_tokens = max_new_tokens;
  return config;
}

struct SynthesisConfig {
  Quotas quotas;
  size_t m_max = 5;           // candidate answers per passage
  size_t filter_k = 10;
  size_t context_budget = 10;
  double claim_overlap_threshold = 0.5;
  bool reject_copies = true;  // drop questions equal to a passage sentence
  bool filter_enabled = true;
  uint64_t seed = 0;
  size_t inflight = 1;        // parallel per-passage generation tasks
  GenerationConfig answer_generation = capped_generation(128);
  GenerationConfig question_generation = capped_generation(96);
};

// Splits the completion on ';', trims each piece, and keeps spans that occur
// case-insensitively in the passage and are new after normalization, up to
// m_max survivors in generation order. Backend failures propagate; zero valid
// spans is an empty result, not an error.
std::vector<CandidateAnswer> extract_answers(const Passage& passage,
                                             GenerationBackend& backend,
                                             size_t m_max,
                                             const GenerationConfig& config);

// One completion, trimmed; re-samples once when it does not end with '?'.
// With reject_copies, questions equal (after normalization) to a sentence of
// the passage are discarded. nullopt means dropped_malformed.
std::optional<std::string> generate_short_span(const Passage& passage,
                                               const CandidateAnswer& answer,
                                               GenerationBackend& backend,
                                               const GenerationConfig& config,
                                               bool reject_copies = true);

// Corpus-wide candidate answers available as distractors, tiered by origin:
// same passage first, then same document, then anywhere.
class CandidatePool {
 public:
  void add(const CandidateAnswer& candidate);
  size_t size() const { return entries_.size(); }

  // Three distractor texts, pairwise distinct after normalization and all
  // distinct from the gold span; drawn uniformly under `rng` within each
  // tier. nullopt when fewer than three usable distractors exist.
  std::optional<std::vector<std::string>> draw_distractors(
      const CandidateAnswer& gold, Rng& rng) const;

 private:
  struct Entry {
    std::string span;
    std::string norm;
    std::string passage_id;
    std::string doc_id;
  };
  std::vector<Entry> entries_;
};

// Builds a four-option item: the gold span plus three pooled distractors,
// shuffled deterministically under `seed`, lettered A-D. nullopt when the
// pool cannot supply distractors.
std::optional<SyntheticExample> make_multiple_choice(const Passage& passage,
                                                     const CandidateAnswer& answer,
                                                     const std::string& question,
                                                     const CandidatePool& pool,
                                                     uint64_t seed);

// Claim verification bypasses answer extraction: the backend produces a claim
// of the requested polarity, the question embeds it verbatim, and the label
// is "Yes" iff the claim should be supported.
std::optional<SyntheticExample> generate_claim(const Passage& passage,
                                               ClaimPolarity polarity,
                                               GenerationBackend& backend,
                                               const GenerationConfig& config);

struct FilterOutcome {
  bool kept = false;
  std::vector<RetrievalResult> results;
};

// Round-trip consistency: retrieve top-k for the question and keep the
// example iff its gold text survives in the results. Span and option golds
// use normalized-substring containment; claims use content-token overlap >=
// theta against some retrieved passage.
FilterOutcome roundtrip_filter(const SyntheticExample& example, Retriever& retriever,
                               size_t k, const PassageStore& store,
                               double claim_overlap_threshold);

// context_ids = top `context_budget` ids for the question; reuses the
// filter's retrieval when filter_k >= budget, else retrieves afresh.
void assemble_contexts(SyntheticExample& example, Retriever& retriever,
                       size_t context_budget,
                       const std::vector<RetrievalResult>& filter_results,
                       size_t filter_k);

struct SynthesisOutput {
  std::vector<SyntheticExample> kept;
  std::vector<SyntheticExample> rejects;  // audit trail
  SynthesisReport report;
};

// The full self-training synthesis loop: passages are visited in a seed-shuffled order and
// examples are produced until every task-type quota of kept examples is met
// or passages run out. Generation may run `inflight` passages in parallel;
// results are committed in the shuffled order, so output is identical for
// any inflight value.
SynthesisOutput run_synthesis(const std::vector<Passage>& passages,
                           GenerationBackend& backend, Retriever& retriever,
                           const PassageStore& store, const SynthesisConfig& config);

void save_examples(const std::vector<SyntheticExample>& examples,
                   const std::string& path);
std::vector<SyntheticExample> load_examples(const std::string& path);

void save_report(const SynthesisReport& report, const std::string& path);
SynthesisReport load_report(const std::string& path);

std::string to_string(TaskType t);
std::string to_string(FilterStatus s);
TaskType task_type_from_string(std::string_view s);
FilterStatus filter_status_from_string(std::string_view s);

}  // namespace raggen
