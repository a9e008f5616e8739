#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raggen/corpus.hpp"
#include "raggen/generation.hpp"
#include "raggen/retrieval.hpp"

namespace raggen {

enum class EvalTaskType { short_span, multiple_choice, yes_no, open_ended };

struct EvalOption {
  char letter = 'A';
  std::string text;
};

struct EvalItem {
  std::string question;
  EvalTaskType task_type = EvalTaskType::short_span;
  std::string gold;  // span, option letter, or "Yes"/"No"
  std::vector<EvalOption> options;          // present iff multiple_choice
  std::vector<std::string> given_contexts;  // pre-retrieved; skips retrieval
};

struct EvalItemResult {
  size_t index = 0;
  std::string prediction;
  std::map<std::string, double> scores;
  bool errored = false;
};

struct EvalReport {
  std::vector<EvalItemResult> items;
  std::map<std::string, double> aggregates;  // arithmetic means per metric
  size_t n = 0;
  size_t errored = 0;
};

// SQuAD-style normalization: lowercase, strip punctuation, drop the articles
// "a"/"an"/"the", collapse whitespace.
std::string normalize_answer(std::string_view s);

// 1 iff normalize_answer(pred) == normalize_answer(gold).
double exact_match(std::string_view pred, std::string_view gold);

// Token-overlap F1 with multiset counting over normalized tokens. Both sides
// empty -> 1, exactly one empty -> 0.
double token_f1(std::string_view pred, std::string_view gold);

// LCS-based F-measure (beta = 1) over light-normalized token sequences
// (articles are kept; Rouge is order-sensitive, not a bag-of-words metric).
// Empty-sequence conventions match token_f1.
double rouge_l(std::string_view pred, std::string_view gold);

// First standalone capital A-D wins; otherwise the unique option whose
// normalized text occurs in the normalized prediction; otherwise nothing.
std::optional<char> extract_choice(std::string_view pred,
                                   const std::vector<EvalOption>& options);

std::optional<std::string> extract_yes_no(std::string_view pred);

inline GenerationConfig default_inference_generation() {
  GenerationConfig config;
  config.max_new_tokens = 512;
  return config;
}

struct EvaluateConfig {
  size_t context_budget = 10;
  // temperature is forced to 0 for scoring regardless of this value
  GenerationConfig generation = default_inference_generation();
};

// Retrieval-augmented scoring loop: retrieve (or take provided contexts),
// render the inference prompt with the task type's instruction, generate at
// temperature 0, score with the task's metric(s). Items whose generation
// fails are marked errored and excluded from the aggregates.
EvalReport evaluate(const std::vector<EvalItem>& items, Retriever* retriever,
                    const PassageStore* store, GenerationBackend& backend,
                    const EvaluateConfig& config = {});

std::vector<EvalItem> load_eval_items(const std::string& path);
void save_eval_report(const EvalReport& report, const std::string& path);
std::string format_eval_summary(const EvalReport& report);

EvalTaskType eval_task_type_from_string(std::string_view s);
std::string to_string(EvalTaskType t);

// The verbatim per-task instruction used in the inference prompt.
std::string_view instruction_for(EvalTaskType t);

}  // namespace raggen
