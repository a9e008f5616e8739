#include "raggen/synthesis.hpp"

#include <algorithm>
#include <future>
#include <unordered_set>

#include <json.hpp>

#include "raggen/errors.hpp"
#include "raggen/jsonl.hpp"
#include "raggen/text.hpp"

namespace raggen {

using nlohmann::json;

TypeCounters& SynthesisReport::by_type(TaskType t) {
  switch (t) {
    case TaskType::short_span: return short_span;
    case TaskType::multiple_choice: return multiple_choice;
    case TaskType::claim_verification: return claim_verification;
  }
  return short_span;
}

const TypeCounters& SynthesisReport::by_type(TaskType t) const {
  return const_cast<SynthesisReport*>(this)->by_type(t);
}

size_t SynthesisReport::total_generated() const {
  return short_span.generated + multiple_choice.generated + claim_verification.generated;
}

size_t SynthesisReport::total_kept() const {
  return short_span.kept + multiple_choice.kept + claim_verification.kept;
}

void SynthesisReport::finalize() {
  size_t generated = total_generated();
  retention_rate = generated == 0 ? 0.0 : static_cast<double>(total_kept()) / generated;
}

std::vector<CandidateAnswer> extract_answers(const Passage& passage,
                                             GenerationBackend& backend,
                                             size_t m_max,
                                             const GenerationConfig& config) {
  std::string completion;
  try {
    completion = backend.generate(render_answer_prompt(passage), config).text;
  } catch (const EmptyOutputError&) {
    return {};
  }
  std::vector<CandidateAnswer> out;
  std::unordered_set<std::string> seen;
  size_t piece_index = 0;
  size_t pos = 0;
  while (pos <= completion.size() && out.size() < m_max) {
    size_t next = completion.find(';', pos);
    std::string piece = next == std::string::npos
                            ? completion.substr(pos)
                            : completion.substr(pos, next - pos);
    size_t ordinal = piece_index++;
    pos = next == std::string::npos ? completion.size() + 1 : next + 1;
    std::string span = text::trim(piece);
    if (span.empty()) continue;
    if (!text::contains_ci(passage.text, span)) continue;
    std::string norm = text::normalize_light(span);
    if (norm.empty() || !seen.insert(norm).second) continue;
    out.push_back({passage.passage_id, std::move(span), ordinal});
  }
  return out;
}

namespace {

bool is_copied_sentence(const std::string& question, const std::string& passage_text) {
  std::string norm_question = text::normalize_light(question);
  if (norm_question.empty()) return false;
  size_t start = 0;
  for (size_t i = 0; i <= passage_text.size(); ++i) {
    if (i == passage_text.size() || passage_text[i] == '.' ||
        passage_text[i] == '!' || passage_text[i] == '?') {
      std::string sentence = passage_text.substr(start, i - start);
      start = i + 1;
      if (text::normalize_light(sentence) == norm_question) return true;
    }
  }
  return false;
}

}  // namespace

std::optional<std::string> generate_short_span(const Passage& passage,
                                               const CandidateAnswer& answer,
                                               GenerationBackend& backend,
                                               const GenerationConfig& config,
                                               bool reject_copies) {
  auto prompt = render_question_prompt(passage, answer.span);
  std::string question;
  GenerationConfig attempt_config = config;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1 && attempt_config.seed) ++*attempt_config.seed;
    try {
      question = text::trim(backend.generate(prompt, attempt_config).text);
    } catch (const EmptyOutputError&) {
      question.clear();
    }
    if (!question.empty() && question.back() == '?') break;
  }
  if (question.empty() || question.back() != '?') return std::nullopt;
  if (reject_copies && is_copied_sentence(question, passage.text)) return std::nullopt;
  return question;
}

void CandidatePool::add(const CandidateAnswer& candidate) {
  Entry entry;
  entry.span = candidate.span;
  entry.norm = text::normalize_light(candidate.span);
  entry.passage_id = candidate.passage_id;
  entry.doc_id = parse_passage_id(candidate.passage_id).first;
  entries_.push_back(std::move(entry));
}

std::optional<std::vector<std::string>> CandidatePool::draw_distractors(
    const CandidateAnswer& gold, Rng& rng) const {
  const std::string gold_norm = text::normalize_light(gold.span);
  const std::string gold_doc = parse_passage_id(gold.passage_id).first;

  std::vector<std::string> chosen;
  std::unordered_set<std::string> chosen_norms;
  const auto take_from_tier = [&](auto&& in_tier) {
    if (chosen.size() >= 3) return;
    // Unique normalized spans, first occurrence wins; keeps draws stable.
    std::vector<const Entry*> tier;
    std::unordered_set<std::string> tier_norms;
    for (const auto& entry : entries_) {
      if (!in_tier(entry)) continue;
      if (entry.norm.empty() || entry.norm == gold_norm) continue;
      if (chosen_norms.count(entry.norm) || !tier_norms.insert(entry.norm).second) continue;
      tier.push_back(&entry);
    }
    size_t need = 3 - chosen.size();
    for (size_t i : rng.sample_without_replacement(tier.size(), need)) {
      chosen.push_back(tier[i]->span);
      chosen_norms.insert(tier[i]->norm);
    }
  };

  take_from_tier([&](const Entry& e) { return e.passage_id == gold.passage_id; });
  take_from_tier([&](const Entry& e) {
    return e.doc_id == gold_doc && e.passage_id != gold.passage_id;
  });
  take_from_tier([&](const Entry& e) { return e.doc_id != gold_doc; });

  if (chosen.size() < 3) return std::nullopt;
  return chosen;
}

std::optional<SyntheticExample> make_multiple_choice(const Passage& passage,
                                                     const CandidateAnswer& answer,
                                                     const std::string& question,
                                                     const CandidatePool& pool,
                                                     uint64_t seed) {
  Rng rng(seed);
  auto distractors = pool.draw_distractors(answer, rng);
  if (!distractors) return std::nullopt;

  std::vector<std::string> option_texts;
  option_texts.push_back(answer.span);
  for (auto& d : *distractors) option_texts.push_back(std::move(d));
  rng.shuffle(option_texts);

  SyntheticExample example;
  example.task_type = TaskType::multiple_choice;
  example.question = question;
  example.source_passage_id = passage.passage_id;
  for (size_t i = 0; i < option_texts.size(); ++i) {
    char letter = static_cast<char>('A' + i);
    if (option_texts[i] == answer.span) example.gold = std::string(1, letter);
    example.options.push_back({letter, std::move(option_texts[i])});
  }
  return example;
}

std::optional<SyntheticExample> generate_claim(const Passage& passage,
                                               ClaimPolarity polarity,
                                               GenerationBackend& backend,
                                               const GenerationConfig& config) {
  std::string claim;
  try {
    claim = text::trim(backend.generate(render_claim_prompt(passage, polarity), config).text);
  } catch (const EmptyOutputError&) {
    return std::nullopt;
  }
  if (!claim.empty() && claim.back() == '.') claim.pop_back();
  claim = text::trim(claim);
  if (claim.empty() || text::qa_tokens(claim).empty()) return std::nullopt;

  SyntheticExample example;
  example.task_type = TaskType::claim_verification;
  example.claim = claim;
  example.question = prompts::substitute(prompts::kClaimQuestionTemplate, "{claim}", claim);
  example.gold = polarity == ClaimPolarity::supported ? "Yes" : "No";
  example.source_passage_id = passage.passage_id;
  return example;
}

namespace {

// Fraction of the claim's distinct content tokens present in the passage.
double claim_overlap(const std::vector<std::string>& claim_tokens,
                     const std::string& passage_text) {
  if (claim_tokens.empty()) return 0.0;
  auto passage_tokens = text::qa_tokens(passage_text);
  std::unordered_set<std::string> present(passage_tokens.begin(), passage_tokens.end());
  size_t hits = 0;
  for (const auto& t : claim_tokens) {
    if (present.count(t)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(claim_tokens.size());
}

std::vector<std::string> unique_tokens(std::vector<std::string> tokens) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  for (auto& t : tokens) {
    if (seen.insert(t).second) out.push_back(std::move(t));
  }
  return out;
}

std::string gold_text_for_containment(const SyntheticExample& example) {
  if (example.task_type != TaskType::multiple_choice) return example.gold;
  for (const auto& option : example.options) {
    if (!example.gold.empty() && option.letter == example.gold[0]) return option.text;
  }
  return example.gold;
}

}  // namespace

FilterOutcome roundtrip_filter(const SyntheticExample& example, Retriever& retriever,
                               size_t k, const PassageStore& store,
                               double claim_overlap_threshold) {
  FilterOutcome outcome;
  outcome.results = retriever.retrieve(example.question, k);
  if (example.task_type == TaskType::claim_verification) {
    auto claim_tokens = unique_tokens(text::qa_tokens(example.claim));
    for (const auto& result : outcome.results) {
      const Passage* p = store.find(result.passage_id);
      if (p && claim_overlap(claim_tokens, p->text) >= claim_overlap_threshold) {
        outcome.kept = true;
        break;
      }
    }
  } else {
    const std::string gold = gold_text_for_containment(example);
    for (const auto& result : outcome.results) {
      const Passage* p = store.find(result.passage_id);
      if (p && text::contains_normalized(p->text, gold)) {
        outcome.kept = true;
        break;
      }
    }
  }
  return outcome;
}

void assemble_contexts(SyntheticExample& example, Retriever& retriever,
                       size_t context_budget,
                       const std::vector<RetrievalResult>& filter_results,
                       size_t filter_k) {
  example.context_ids.clear();
  if (filter_k >= context_budget) {
    for (size_t i = 0; i < filter_results.size() && i < context_budget; ++i) {
      example.context_ids.push_back(filter_results[i].passage_id);
    }
    return;
  }
  for (const auto& result : retriever.retrieve(example.question, context_budget)) {
    example.context_ids.push_back(result.passage_id);
  }
}

namespace {

struct PassageWork {
  size_t index = 0;
  bool extraction_attempted = false;
  bool extraction_failed = false;
  std::vector<CandidateAnswer> candidates;
  std::vector<std::optional<std::string>> questions;
  bool claim_attempted = false;
  ClaimPolarity claim_polarity = ClaimPolarity::supported;
  std::optional<SyntheticExample> claim_example;
};

class SynthesisRun {
 public:
  SynthesisRun(const std::vector<Passage>& passages, GenerationBackend& backend,
               Retriever& retriever, const PassageStore& store,
               const SynthesisConfig& config)
      : backend_(backend), retriever_(retriever), store_(store), config_(config) {
    order_ = passages;
    Rng rng(derive_seed(config.seed, "synthesis:order"));
    rng.shuffle(order_);
  }

  SynthesisOutput run() {
    size_t next = 0;
    const size_t inflight = std::max<size_t>(1, config_.inflight);
    while (next < order_.size() && !all_quotas_met()) {
      size_t batch_end = std::min(next + inflight, order_.size());
      std::vector<PassageWork> works = schedule(next, batch_end);
      execute(works);
      for (auto& work : works) {
        commit(work);
        if (all_quotas_met()) break;
      }
      next = batch_end;
    }
    add_quota_warnings();
    output_.report.finalize();
    return std::move(output_);
  }

 private:
  bool quota_unmet(TaskType t) const {
    const auto& counters = output_.report.by_type(t);
    switch (t) {
      case TaskType::short_span: return counters.kept < config_.quotas.short_span;
      case TaskType::multiple_choice: return counters.kept < config_.quotas.multiple_choice;
      case TaskType::claim_verification:
        return counters.kept < config_.quotas.claim_verification;
    }
    return false;
  }

  bool all_quotas_met() const {
    return !quota_unmet(TaskType::short_span) && !quota_unmet(TaskType::multiple_choice) &&
           !quota_unmet(TaskType::claim_verification);
  }

  std::vector<PassageWork> schedule(size_t begin, size_t end) {
    std::vector<PassageWork> works;
    works.reserve(end - begin);
    for (size_t i = begin; i < end; ++i) {
      PassageWork work;
      work.index = i;
      work.extraction_attempted =
          quota_unmet(TaskType::short_span) || quota_unmet(TaskType::multiple_choice);
      work.claim_attempted = quota_unmet(TaskType::claim_verification);
      if (work.claim_attempted) {
        work.claim_polarity =
            polarity_supported_ ? ClaimPolarity::supported : ClaimPolarity::refuted;
        polarity_supported_ = !polarity_supported_;
      }
      works.push_back(work);
    }
    return works;
  }

  void run_one(PassageWork& work) {
    const Passage& passage = order_[work.index];
    if (work.extraction_attempted) {
      work.candidates =
          extract_answers(passage, backend_, config_.m_max, config_.answer_generation);
      work.extraction_failed = work.candidates.empty();
      work.questions.reserve(work.candidates.size());
      for (const auto& candidate : work.candidates) {
        work.questions.push_back(generate_short_span(passage, candidate, backend_,
                                                     config_.question_generation,
                                                     config_.reject_copies));
      }
    }
    if (work.claim_attempted) {
      work.claim_example = generate_claim(passage, work.claim_polarity, backend_,
                                          config_.question_generation);
    }
  }

  void execute(std::vector<PassageWork>& works) {
    if (works.size() <= 1 || config_.inflight <= 1) {
      for (auto& work : works) run_one(work);
      return;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(works.size());
    for (auto& work : works) {
      futures.push_back(std::async(std::launch::async, [this, &work] { run_one(work); }));
    }
    for (auto& f : futures) f.get();
  }

  // Quota checks re-run here against committed state, so output is identical
  // no matter how far scheduling ran ahead.
  void commit(PassageWork& work) {
    const Passage& passage = order_[work.index];
    if (work.extraction_attempted &&
        (quota_unmet(TaskType::short_span) || quota_unmet(TaskType::multiple_choice))) {
      if (work.extraction_failed) ++output_.report.answer_extraction_failures;
      for (const auto& candidate : work.candidates) pool_.add(candidate);
      for (size_t j = 0; j < work.candidates.size(); ++j) {
        bool want_short = quota_unmet(TaskType::short_span);
        bool want_mc = quota_unmet(TaskType::multiple_choice);
        if (!want_short && !want_mc) break;
        TaskType target;
        if (j % 2 == 0) {
          target = want_short ? TaskType::short_span : TaskType::multiple_choice;
        } else {
          target = want_mc ? TaskType::multiple_choice : TaskType::short_span;
        }
        commit_candidate(passage, work.candidates[j], work.questions[j], j, target);
      }
    }
    if (work.claim_attempted && quota_unmet(TaskType::claim_verification)) {
      auto& counters = output_.report.claim_verification;
      ++counters.generated;
      std::string example_id = "cv:" + passage.passage_id + ":0";
      if (!work.claim_example) {
        ++counters.dropped_malformed;
        SyntheticExample reject;
        reject.example_id = std::move(example_id);
        reject.task_type = TaskType::claim_verification;
        reject.gold = work.claim_polarity == ClaimPolarity::supported ? "Yes" : "No";
        reject.source_passage_id = passage.passage_id;
        reject.filter_status = FilterStatus::dropped_malformed;
        output_.rejects.push_back(std::move(reject));
      } else {
        SyntheticExample example = *work.claim_example;
        example.example_id = std::move(example_id);
        finish(std::move(example), counters);
      }
    }
  }

  void commit_candidate(const Passage& passage, const CandidateAnswer& candidate,
                        const std::optional<std::string>& question, size_t j,
                        TaskType target) {
    auto& counters = output_.report.by_type(target);
    ++counters.generated;
    const char* tag = target == TaskType::short_span ? "ss" : "mc";
    std::string example_id =
        std::string(tag) + ":" + passage.passage_id + ":" + std::to_string(j);

    const auto reject_malformed = [&](SyntheticExample example) {
      ++counters.dropped_malformed;
      example.example_id = example_id;
      example.filter_status = FilterStatus::dropped_malformed;
      output_.rejects.push_back(std::move(example));
    };

    if (!question) {
      SyntheticExample reject;
      reject.task_type = target;
      reject.gold = candidate.span;
      reject.source_passage_id = passage.passage_id;
      reject_malformed(std::move(reject));
      return;
    }

    if (target == TaskType::short_span) {
      SyntheticExample example;
      example.example_id = example_id;
      example.task_type = TaskType::short_span;
      example.question = *question;
      example.gold = candidate.span;
      example.source_passage_id = passage.passage_id;
      finish(std::move(example), counters);
      return;
    }

    auto mc = make_multiple_choice(passage, candidate, *question, pool_,
                                   derive_seed(config_.seed, example_id));
    if (!mc) {
      SyntheticExample reject;
      reject.task_type = target;
      reject.question = *question;
      reject.gold = candidate.span;
      reject.source_passage_id = passage.passage_id;
      reject_malformed(std::move(reject));
      return;
    }
    mc->example_id = example_id;
    finish(std::move(*mc), counters);
  }

  void finish(SyntheticExample example, TypeCounters& counters) {
    if (config_.filter_enabled) {
      auto outcome = roundtrip_filter(example, retriever_, config_.filter_k, store_,
                                      config_.claim_overlap_threshold);
      if (!outcome.kept) {
        example.filter_status = FilterStatus::dropped_not_retrieved;
        ++counters.dropped_not_retrieved;
        output_.rejects.push_back(std::move(example));
        return;
      }
      assemble_contexts(example, retriever_, config_.context_budget, outcome.results,
                        config_.filter_k);
    } else {
      // Unfiltered runs still need retrievable contexts to ground the tuple.
      auto results = retriever_.retrieve(example.question, config_.context_budget);
      if (results.empty()) {
        example.filter_status = FilterStatus::dropped_not_retrieved;
        ++counters.dropped_not_retrieved;
        output_.rejects.push_back(std::move(example));
        return;
      }
      for (const auto& result : results) example.context_ids.push_back(result.passage_id);
    }
    example.filter_status = FilterStatus::kept;
    ++counters.kept;
    output_.kept.push_back(std::move(example));
  }

  void add_quota_warnings() {
    const auto warn = [&](TaskType t, size_t quota) {
      const auto& counters = output_.report.by_type(t);
      if (counters.kept < quota) {
        output_.report.warnings.push_back(
            "quota unreachable for " + to_string(t) + ": kept " +
            std::to_string(counters.kept) + " of " + std::to_string(quota) +
            " after exhausting passages");
      }
    };
    warn(TaskType::short_span, config_.quotas.short_span);
    warn(TaskType::multiple_choice, config_.quotas.multiple_choice);
    warn(TaskType::claim_verification, config_.quotas.claim_verification);
  }

  GenerationBackend& backend_;
  Retriever& retriever_;
  const PassageStore& store_;
  SynthesisConfig config_;
  std::vector<Passage> order_;
  CandidatePool pool_;
  SynthesisOutput output_;
  bool polarity_supported_ = true;
};

}  // namespace

SynthesisOutput run_synthesis(const std::vector<Passage>& passages,
                           GenerationBackend& backend, Retriever& retriever,
                           const PassageStore& store, const SynthesisConfig& config) {
  if (passages.empty()) throw ConfigError("synthesis needs a non-empty passage set");
  SynthesisRun run(passages, backend, retriever, store, config);
  return run.run();
}

std::string to_string(TaskType t) {
  switch (t) {
    case TaskType::short_span: return "short_span";
    case TaskType::multiple_choice: return "multiple_choice";
    case TaskType::claim_verification: return "claim_verification";
  }
  return "short_span";
}

std::string to_string(FilterStatus s) {
  switch (s) {
    case FilterStatus::kept: return "kept";
    case FilterStatus::dropped_not_retrieved: return "dropped_not_retrieved";
    case FilterStatus::dropped_malformed: return "dropped_malformed";
  }
  return "kept";
}

TaskType task_type_from_string(std::string_view s) {
  if (s == "short_span") return TaskType::short_span;
  if (s == "multiple_choice") return TaskType::multiple_choice;
  if (s == "claim_verification") return TaskType::claim_verification;
  throw ConfigError("unknown task type: " + std::string(s));
}

FilterStatus filter_status_from_string(std::string_view s) {
  if (s == "kept") return FilterStatus::kept;
  if (s == "dropped_not_retrieved") return FilterStatus::dropped_not_retrieved;
  if (s == "dropped_malformed") return FilterStatus::dropped_malformed;
  throw ConfigError("unknown filter status: " + std::string(s));
}

namespace {

nlohmann::ordered_json example_to_json(const SyntheticExample& e) {
  nlohmann::ordered_json j;
  j["example_id"] = e.example_id;
  j["task_type"] = to_string(e.task_type);
  j["question"] = e.question;
  if (e.task_type == TaskType::multiple_choice) {
    json options = json::array();
    for (const auto& option : e.options) {
      options.push_back({{"letter", std::string(1, option.letter)}, {"text", option.text}});
    }
    j["options"] = std::move(options);
  }
  j["gold"] = e.gold;
  if (e.task_type == TaskType::claim_verification) j["claim"] = e.claim;
  j["source_passage_id"] = e.source_passage_id;
  j["context_ids"] = e.context_ids;
  j["filter_status"] = to_string(e.filter_status);
  return j;
}

SyntheticExample example_from_json(const json& j) {
  SyntheticExample e;
  e.example_id = j.at("example_id").get<std::string>();
  e.task_type = task_type_from_string(j.at("task_type").get<std::string>());
  e.question = j.at("question").get<std::string>();
  if (j.contains("options")) {
    for (const auto& option : j["options"]) {
      std::string letter = option.at("letter").get<std::string>();
      e.options.push_back({letter.empty() ? 'A' : letter[0],
                           option.at("text").get<std::string>()});
    }
  }
  e.gold = j.at("gold").get<std::string>();
  e.claim = j.value("claim", "");
  e.source_passage_id = j.at("source_passage_id").get<std::string>();
  for (const auto& id : j.at("context_ids")) e.context_ids.push_back(id.get<std::string>());
  e.filter_status = filter_status_from_string(j.at("filter_status").get<std::string>());
  return e;
}

json counters_to_json(const TypeCounters& c) {
  return {{"generated", c.generated},
          {"kept", c.kept},
          {"dropped_not_retrieved", c.dropped_not_retrieved},
          {"dropped_malformed", c.dropped_malformed}};
}

TypeCounters counters_from_json(const json& j) {
  TypeCounters c;
  c.generated = j.at("generated").get<size_t>();
  c.kept = j.at("kept").get<size_t>();
  c.dropped_not_retrieved = j.at("dropped_not_retrieved").get<size_t>();
  c.dropped_malformed = j.at("dropped_malformed").get<size_t>();
  return c;
}

}  // namespace

void save_examples(const std::vector<SyntheticExample>& examples, const std::string& path) {
  size_t i = 0;
  jsonl::write_atomic(path, [&](std::string& line) {
    if (i >= examples.size()) return false;
    line = example_to_json(examples[i++]).dump();
    return true;
  });
}

std::vector<SyntheticExample> load_examples(const std::string& path) {
  std::vector<SyntheticExample> examples;
  jsonl::for_each_line(path, [&](size_t line_no, const std::string& line) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      throw IoError("invalid example at " + path + ":" + std::to_string(line_no));
    }
    examples.push_back(example_from_json(j));
  });
  return examples;
}

void save_report(const SynthesisReport& report, const std::string& path) {
  nlohmann::ordered_json j;
  j["short_span"] = counters_to_json(report.short_span);
  j["multiple_choice"] = counters_to_json(report.multiple_choice);
  j["claim_verification"] = counters_to_json(report.claim_verification);
  j["answer_extraction_failures"] = report.answer_extraction_failures;
  j["retention_rate"] = report.retention_rate;
  j["warnings"] = report.warnings;
  jsonl::write_text_atomic(path, j.dump(2));
}

SynthesisReport load_report(const std::string& path) {
  json j = jsonl::read_json_file(path);
  SynthesisReport report;
  report.short_span = counters_from_json(j.at("short_span"));
  report.multiple_choice = counters_from_json(j.at("multiple_choice"));
  report.claim_verification = counters_from_json(j.at("claim_verification"));
  report.answer_extraction_failures = j.value("answer_extraction_failures", 0u);
  report.retention_rate = j.value("retention_rate", 0.0);
  for (const auto& w : j.value("warnings", json::array())) {
    report.warnings.push_back(w.get<std::string>());
  }
  return report;
}

}  // namespace raggen
