#include "raggen/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "raggen/errors.hpp"
#include "raggen/jsonl.hpp"
#include "raggen/text.hpp"

namespace raggen {

using nlohmann::json;

std::string normalize_answer(std::string_view s) { return text::normalize_qa(s); }

double exact_match(std::string_view pred, std::string_view gold) {
  return text::normalize_qa(pred) == text::normalize_qa(gold) ? 1.0 : 0.0;
}

double token_f1(std::string_view pred, std::string_view gold) {
  auto p = text::qa_tokens(pred);
  auto g = text::qa_tokens(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::unordered_map<std::string, int> gold_counts;
  for (const auto& t : g) ++gold_counts[t];
  size_t overlap = 0;
  for (const auto& t : p) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / p.size();
  double recall = static_cast<double>(overlap) / g.size();
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<size_t> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l(std::string_view pred, std::string_view gold) {
  auto p = text::light_tokens(pred);
  auto g = text::light_tokens(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  size_t lcs = lcs_length(p, g);
  if (lcs == 0) return 0.0;
  double precision = static_cast<double>(lcs) / p.size();
  double recall = static_cast<double>(lcs) / g.size();
  return 2.0 * precision * recall / (precision + recall);
}

std::optional<char> extract_choice(std::string_view pred,
                                   const std::vector<EvalOption>& options) {
  const auto is_alnum = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
  };
  for (size_t i = 0; i < pred.size(); ++i) {
    char c = pred[i];
    if (c < 'A' || c > 'D') continue;
    bool left_ok = i == 0 || !is_alnum(pred[i - 1]);
    bool right_ok = i + 1 == pred.size() || !is_alnum(pred[i + 1]);
    if (left_ok && right_ok) return c;
  }
  std::string normalized_pred = text::normalize_qa(pred);
  std::optional<char> unique;
  for (const auto& option : options) {
    std::string norm = text::normalize_qa(option.text);
    if (norm.empty()) continue;
    if (normalized_pred.find(norm) != std::string::npos) {
      if (unique) return std::nullopt;  // ambiguous
      unique = option.letter;
    }
  }
  return unique;
}

std::optional<std::string> extract_yes_no(std::string_view pred) {
  auto tokens = text::qa_tokens(pred);
  if (tokens.empty()) return std::nullopt;
  if (tokens.front() == "yes") return "Yes";
  if (tokens.front() == "no") return "No";
  bool has_yes = std::find(tokens.begin(), tokens.end(), "yes") != tokens.end();
  bool has_no = std::find(tokens.begin(), tokens.end(), "no") != tokens.end();
  if (has_yes != has_no) return has_yes ? "Yes" : "No";
  return std::nullopt;
}

std::string_view instruction_for(EvalTaskType t) {
  switch (t) {
    case EvalTaskType::short_span: return prompts::kShortSpanInstruction;
    case EvalTaskType::multiple_choice: return prompts::kMultipleChoiceInstruction;
    case EvalTaskType::yes_no: return prompts::kYesNoInstruction;
    case EvalTaskType::open_ended: return prompts::kFullAnswerInstruction;
  }
  return prompts::kShortSpanInstruction;
}

namespace {

std::string question_block(const EvalItem& item) {
  if (item.task_type != EvalTaskType::multiple_choice) return item.question;
  std::string q = item.question;
  for (const auto& option : item.options) {
    q += "\n";
    q.push_back(option.letter);
    q += ". " + option.text;
  }
  return q;
}

std::vector<Passage> item_contexts(const EvalItem& item, Retriever* retriever,
                                   const PassageStore* store, size_t budget) {
  std::vector<Passage> contexts;
  if (!item.given_contexts.empty()) {
    for (size_t i = 0; i < item.given_contexts.size() && i < budget; ++i) {
      Passage p;
      p.passage_id = "given#" + std::to_string(i);
      p.text = item.given_contexts[i];
      contexts.push_back(std::move(p));
    }
    return contexts;
  }
  if (!retriever || !store) return contexts;
  for (const auto& result : retriever->retrieve(item.question, budget)) {
    if (const Passage* p = store->find(result.passage_id)) contexts.push_back(*p);
  }
  return contexts;
}

void score_item(const EvalItem& item, const std::string& prediction,
                std::map<std::string, double>& scores) {
  switch (item.task_type) {
    case EvalTaskType::short_span:
      scores["em"] = exact_match(prediction, item.gold);
      scores["f1"] = token_f1(prediction, item.gold);
      break;
    case EvalTaskType::multiple_choice: {
      auto letter = extract_choice(prediction, item.options);
      scores["accuracy"] =
          letter && item.gold.size() == 1 && *letter == item.gold[0] ? 1.0 : 0.0;
      break;
    }
    case EvalTaskType::yes_no: {
      auto verdict = extract_yes_no(prediction);
      scores["accuracy"] = verdict && *verdict == item.gold ? 1.0 : 0.0;
      break;
    }
    case EvalTaskType::open_ended:
      scores["rouge_l"] = rouge_l(prediction, item.gold);
      break;
  }
}

}  // namespace

EvalReport evaluate(const std::vector<EvalItem>& items, Retriever* retriever,
                    const PassageStore* store, GenerationBackend& backend,
                    const EvaluateConfig& config) {
  EvalReport report;
  report.n = items.size();
  GenerationConfig generation = config.generation;
  generation.temperature = 0.0;  // deterministic scoring

  std::map<std::string, double> sums;
  std::map<std::string, size_t> counts;
  for (size_t i = 0; i < items.size(); ++i) {
    const EvalItem& item = items[i];
    EvalItemResult result;
    result.index = i;
    auto contexts = item_contexts(item, retriever, store, config.context_budget);
    auto prompt = contexts.empty()
                      ? PromptMessages{std::string(prompts::kDefaultSystem),
                                       std::string(instruction_for(item.task_type)) +
                                           "\n\n" + question_block(item)}
                      : render_inference_prompt(contexts, instruction_for(item.task_type),
                                                question_block(item));
    try {
      result.prediction = backend.generate(prompt, generation).text;
      score_item(item, result.prediction, result.scores);
    } catch (const BackendError&) {
      result.errored = true;
      ++report.errored;
    }
    if (!result.errored) {
      for (const auto& [metric, value] : result.scores) {
        sums[metric] += value;
        ++counts[metric];
      }
    }
    report.items.push_back(std::move(result));
  }
  for (const auto& [metric, sum] : sums) {
    report.aggregates[metric] = sum / static_cast<double>(counts[metric]);
  }
  return report;
}

EvalTaskType eval_task_type_from_string(std::string_view s) {
  if (s == "short_span") return EvalTaskType::short_span;
  if (s == "multiple_choice") return EvalTaskType::multiple_choice;
  if (s == "yes_no") return EvalTaskType::yes_no;
  if (s == "open_ended") return EvalTaskType::open_ended;
  throw ConfigError("unknown eval task type: " + std::string(s));
}

std::string to_string(EvalTaskType t) {
  switch (t) {
    case EvalTaskType::short_span: return "short_span";
    case EvalTaskType::multiple_choice: return "multiple_choice";
    case EvalTaskType::yes_no: return "yes_no";
    case EvalTaskType::open_ended: return "open_ended";
  }
  return "short_span";
}

std::vector<EvalItem> load_eval_items(const std::string& path) {
  std::vector<EvalItem> items;
  jsonl::for_each_line(path, [&](size_t line_no, const std::string& line) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      throw IoError("invalid eval item at " + path + ":" + std::to_string(line_no));
    }
    EvalItem item;
    item.question = j.at("question").get<std::string>();
    item.task_type = eval_task_type_from_string(j.at("task_type").get<std::string>());
    item.gold = j.at("gold").get<std::string>();
    if (j.contains("options")) {
      char letter = 'A';
      for (const auto& option : j["options"]) {
        item.options.push_back({letter++, option.get<std::string>()});
      }
    }
    if (item.task_type == EvalTaskType::multiple_choice && item.options.empty()) {
      throw ConfigError("multiple_choice item without options at " + path + ":" +
                        std::to_string(line_no));
    }
    if (j.contains("contexts")) {
      for (const auto& context : j["contexts"]) {
        item.given_contexts.push_back(context.get<std::string>());
      }
    }
    items.push_back(std::move(item));
  });
  return items;
}

void save_eval_report(const EvalReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  auto items = nlohmann::ordered_json::array();
  for (const auto& item : report.items) {
    nlohmann::ordered_json row;
    row["index"] = item.index;
    row["prediction"] = item.prediction;
    row["scores"] = item.scores;
    row["errored"] = item.errored;
    items.push_back(std::move(row));
  }
  j["items"] = std::move(items);
  j["aggregates"] = report.aggregates;
  j["n"] = report.n;
  j["errored"] = report.errored;
  // Slots for judge-model scores merged by external tooling.
  j["external"] = nlohmann::json::object();
  jsonl::write_text_atomic(path, j.dump(2));
}

std::string format_eval_summary(const EvalReport& report) {
  std::ostringstream out;
  out << "items: " << report.n << "  errored: " << report.errored << "\n";
  for (const auto& [metric, value] : report.aggregates) {
    out << "  " << metric << ": " << value << "\n";
  }
  return out.str();
}

}  // namespace raggen
