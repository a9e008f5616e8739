#include "raggen/blending.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "raggen/errors.hpp"
#include "raggen/jsonl.hpp"
#include "raggen/prompts.hpp"
#include "raggen/rng.hpp"

namespace raggen {

using nlohmann::json;

std::vector<BlendEntry> default_blend() {
  const auto synthetic = [](const char* name, BlendSource source, double ratio,
                            std::string_view instruction) {
    return BlendEntry{name, source, ratio, std::string(instruction), ""};
  };
  const auto external = [](const char* name, double ratio, std::string_view instruction) {
    return BlendEntry{name, BlendSource::external_file, ratio, std::string(instruction), ""};
  };
  return {
      synthetic("synthetic_short_span", BlendSource::synthetic_short_span, 0.2625,
                prompts::kShortSpanInstruction),
      synthetic("synthetic_multiple_choice", BlendSource::synthetic_mc, 0.0875,
                prompts::kMultipleChoiceInstruction),
      synthetic("synthetic_claim_verification", BlendSource::synthetic_claim, 0.175,
                prompts::kClaimInstruction),
      external("sft_general", 0.12, ""),
      external("drop", 0.04, prompts::kShortSpanInstruction),
      external("narrativeqa", 0.04, prompts::kShortSpanInstruction),
      external("quoref", 0.015, prompts::kShortSpanInstruction),
      external("ropes", 0.015, prompts::kShortSpanInstruction),
      external("squad_v1", 0.035, prompts::kShortSpanInstruction),
      external("squad_v2", 0.05, prompts::kShortSpanInstruction),
      external("openbookqa", 0.005, prompts::kMultipleChoiceInstruction),
      external("logiqa", 0.006, prompts::kMultipleChoiceInstruction),
      external("nq", 0.04, prompts::kShortPhraseInstruction),
      external("tatqa_arithmetic", 0.034, prompts::kArithmeticInstruction),
      external("tatqa_others", 0.013, prompts::kSpanOrFullInstruction),
      external("webglm", 0.023, prompts::kCitedAnswerInstruction),
      external("strategyqa", 0.006, prompts::kYesNoInstruction),
      external("boolq", 0.013, prompts::kYesNoInstruction),
      external("faviq", 0.01, prompts::kClaimInstruction),
      external("fever", 0.01, prompts::kClaimInstruction),
  };
}

std::vector<BlendEntry> resolve_blend(std::vector<BlendEntry> entries,
                                      const std::map<std::string, std::string>& external_paths,
                                      std::vector<std::string>* warnings) {
  std::vector<BlendEntry> resolved;
  for (auto& entry : entries) {
    if (entry.source == BlendSource::external_file) {
      auto it = external_paths.find(entry.name);
      if (it == external_paths.end()) {
        if (warnings) {
          warnings->push_back("dropping external blend entry without a file: " + entry.name);
        }
        continue;
      }
      entry.path = it->second;
    }
    resolved.push_back(std::move(entry));
  }
  double remaining = 0.0;
  for (const auto& entry : resolved) remaining += entry.ratio;
  if (remaining <= 0.0) throw ConfigError("blend has no entries with positive ratio");
  if (std::abs(remaining - 1.0) > 1e-9) {
    for (auto& entry : resolved) entry.ratio /= remaining;
    if (warnings) {
      warnings->push_back("renormalized blend ratios by 1/" + std::to_string(remaining));
    }
  }
  return resolved;
}

std::vector<size_t> apportion(const std::vector<BlendEntry>& entries, size_t total) {
  double sum = 0.0;
  for (const auto& entry : entries) sum += entry.ratio;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("blend ratios sum to " + std::to_string(sum) + ", expected 1");
  }
  std::vector<size_t> counts(entries.size(), 0);
  std::vector<std::pair<double, size_t>> remainders;  // (remainder, index)
  size_t assigned = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    double exact = entries[i].ratio * static_cast<double>(total);
    counts[i] = static_cast<size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::sort(remainders.begin(), remainders.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return entries[a.second].name < entries[b.second].name;
  });
  for (size_t i = 0; assigned < total; ++i, ++assigned) {
    ++counts[remainders[i % remainders.size()].second];
  }
  return counts;
}

BlendPools split_pools(const std::vector<SyntheticExample>& kept) {
  BlendPools pools;
  for (const auto& example : kept) {
    if (example.filter_status != FilterStatus::kept) continue;
    switch (example.task_type) {
      case TaskType::short_span: pools.short_span.push_back(example); break;
      case TaskType::multiple_choice: pools.multiple_choice.push_back(example); break;
      case TaskType::claim_verification: pools.claim.push_back(example); break;
    }
  }
  return pools;
}

TrainingRecord make_training_record(const SyntheticExample& example,
                                    const BlendEntry& entry, const PassageStore& store,
                                    std::string_view system_prompt) {
  std::vector<Passage> contexts;
  contexts.reserve(example.context_ids.size());
  for (const auto& id : example.context_ids) {
    const Passage* p = store.find(id);
    if (!p) throw ConfigError("context passage not found: " + id);
    contexts.push_back(*p);
  }

  std::string user = prompts::numbered_context_blocks(contexts);
  if (!user.empty()) user += "\n\n";
  if (entry.instruction.find("{claim}") != std::string::npos) {
    // The claim instruction embeds the question; instantiating it yields
    // "Answer the following question with Yes or No. Is the statement <claim>
    // correct?" in one block.
    user += prompts::substitute(entry.instruction, "{claim}", example.claim);
  } else {
    user += entry.instruction;
    user += "\n\n";
    user += example.question;
    for (const auto& option : example.options) {
      user += "\n";
      user.push_back(option.letter);
      user += ". " + option.text;
    }
  }

  TrainingRecord record;
  record.messages.push_back({"system", std::string(system_prompt)});
  record.messages.push_back({"user", std::move(user)});
  record.messages.push_back({"assistant", example.gold});
  record.loss_mask = {false, false, true};
  record.blend_entry = entry.name;
  record.example_id = example.example_id;
  return record;
}

namespace {

const std::vector<SyntheticExample>* synthetic_pool(const BlendPools& pools,
                                                    BlendSource source) {
  switch (source) {
    case BlendSource::synthetic_short_span: return &pools.short_span;
    case BlendSource::synthetic_mc: return &pools.multiple_choice;
    case BlendSource::synthetic_claim: return &pools.claim;
    case BlendSource::external_file: return nullptr;
  }
  return nullptr;
}

std::vector<size_t> sample_indices(size_t pool_size, size_t count, Rng& rng,
                                   const std::string& entry_name,
                                   std::vector<std::string>* warnings) {
  if (count <= pool_size) {
    return rng.sample_without_replacement(pool_size, count);
  }
  if (warnings) {
    warnings->push_back("pool for " + entry_name + " has " + std::to_string(pool_size) +
                        " examples, sampling " + std::to_string(count) +
                        " with replacement");
  }
  std::vector<size_t> out(count);
  for (auto& index : out) index = rng.bounded(pool_size);
  return out;
}

}  // namespace

BlendPlan plan_blend(const std::vector<BlendEntry>& entries, const BlendPools& pools,
                     size_t total, uint64_t seed) {
  auto counts = apportion(entries, total);
  BlendPlan plan;
  plan.total = total;
  plan.seed = seed;
  for (size_t i = 0; i < entries.size(); ++i) {
    const BlendEntry& entry = entries[i];
    BlendPlan::Entry planned;
    planned.entry = entry;
    planned.count = counts[i];

    const std::vector<SyntheticExample>* pool = synthetic_pool(pools, entry.source);
    const std::vector<TrainingRecord>* external = nullptr;
    if (!pool) {
      auto it = pools.external.find(entry.name);
      if (it != pools.external.end()) external = &it->second;
    }
    size_t pool_size = pool ? pool->size() : (external ? external->size() : 0);
    if (entry.ratio > 0.0 && pool_size == 0) {
      throw ConfigError("blend entry " + entry.name + " has ratio > 0 but an empty pool");
    }
    if (counts[i] > 0) {
      Rng rng(derive_seed(seed, "blend:" + entry.name));
      auto indices = sample_indices(pool_size, counts[i], rng, entry.name, &plan.warnings);
      if (pool) {
        for (size_t index : indices) planned.example_ids.push_back((*pool)[index].example_id);
      } else {
        planned.external_indices = std::move(indices);
      }
    }
    plan.entries.push_back(std::move(planned));
  }
  return plan;
}

std::vector<TrainingRecord> materialize(const BlendPlan& plan, const BlendPools& pools,
                                        const PassageStore& store) {
  std::unordered_map<std::string, const SyntheticExample*> by_id;
  const auto index_pool = [&](const std::vector<SyntheticExample>& pool) {
    for (const auto& example : pool) by_id[example.example_id] = &example;
  };
  index_pool(pools.short_span);
  index_pool(pools.multiple_choice);
  index_pool(pools.claim);

  std::vector<TrainingRecord> records;
  records.reserve(plan.total);
  for (const auto& planned : plan.entries) {
    if (planned.entry.source == BlendSource::external_file) {
      auto it = pools.external.find(planned.entry.name);
      if (it == pools.external.end() && !planned.external_indices.empty()) {
        throw ConfigError("external pool missing for blend entry " + planned.entry.name);
      }
      for (size_t index : planned.external_indices) {
        if (index >= it->second.size()) {
          throw ConfigError("blend plan is stale: index out of range for " +
                            planned.entry.name);
        }
        TrainingRecord record = it->second[index];
        record.blend_entry = planned.entry.name;
        records.push_back(std::move(record));
      }
      continue;
    }
    for (const auto& id : planned.example_ids) {
      auto found = by_id.find(id);
      if (found == by_id.end()) {
        throw ConfigError("blend plan is stale: example " + id + " not in pools");
      }
      records.push_back(
          make_training_record(*found->second, planned.entry, store, prompts::kDefaultSystem));
    }
  }
  Rng shuffle_rng(derive_seed(plan.seed, "blend:shuffle"));
  shuffle_rng.shuffle(records);
  return records;
}

std::vector<TrainingRecord> blend(const std::vector<BlendEntry>& entries,
                                  const BlendPools& pools, const PassageStore& store,
                                  size_t total, uint64_t seed,
                                  std::vector<std::string>* warnings) {
  BlendPlan plan = plan_blend(entries, pools, total, seed);
  if (warnings) {
    warnings->insert(warnings->end(), plan.warnings.begin(), plan.warnings.end());
  }
  return materialize(plan, pools, store);
}

namespace {

void validate_record(const TrainingRecord& record) {
  if (record.messages.size() != record.loss_mask.size()) {
    throw ConfigError("record mask length does not match message count");
  }
  size_t assistants = 0;
  for (size_t i = 0; i < record.messages.size(); ++i) {
    const bool is_assistant = record.messages[i].role == "assistant";
    if (is_assistant) ++assistants;
    if (record.loss_mask[i] != is_assistant) {
      throw ConfigError("loss mask must be true exactly on the assistant message");
    }
  }
  if (assistants != 1) {
    throw ConfigError("record must contain exactly one assistant message");
  }
}

nlohmann::ordered_json record_to_json(const TrainingRecord& record) {
  nlohmann::ordered_json j;
  auto messages = nlohmann::ordered_json::array();
  for (const auto& message : record.messages) {
    nlohmann::ordered_json m;
    m["role"] = message.role;
    m["content"] = message.content;
    messages.push_back(std::move(m));
  }
  j["messages"] = std::move(messages);
  j["loss_mask"] = record.loss_mask;
  j["meta"] = {{"blend_entry", record.blend_entry}, {"example_id", record.example_id}};
  return j;
}

TrainingRecord record_from_json(const json& j) {
  TrainingRecord record;
  for (const auto& message : j.at("messages")) {
    record.messages.push_back(
        {message.at("role").get<std::string>(), message.at("content").get<std::string>()});
  }
  for (const auto& bit : j.at("loss_mask")) record.loss_mask.push_back(bit.get<bool>());
  const auto& meta = j.at("meta");
  record.blend_entry = meta.value("blend_entry", "");
  record.example_id = meta.value("example_id", "");
  return record;
}

}  // namespace

void export_records(const std::vector<TrainingRecord>& records, const std::string& path,
                    const std::string& config_digest, uint64_t seed) {
  for (const auto& record : records) validate_record(record);
  size_t i = 0;
  jsonl::write_atomic(path, [&](std::string& line) {
    if (i >= records.size()) return false;
    line = record_to_json(records[i++]).dump();
    return true;
  });
  std::map<std::string, size_t> counts;
  for (const auto& record : records) ++counts[record.blend_entry];
  nlohmann::ordered_json manifest;
  manifest["total"] = records.size();
  manifest["counts"] = counts;
  manifest["config_digest"] = config_digest;
  manifest["seed"] = seed;
  jsonl::write_text_atomic(path + ".manifest.json", manifest.dump(2));
}

std::vector<TrainingRecord> load_records(const std::string& path) {
  std::vector<TrainingRecord> records;
  jsonl::for_each_line(path, [&](size_t line_no, const std::string& line) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      throw IoError("invalid training record at " + path + ":" + std::to_string(line_no));
    }
    records.push_back(record_from_json(j));
  });
  return records;
}

void save_blend_plan(const BlendPlan& plan, const std::string& path) {
  nlohmann::ordered_json j;
  j["total"] = plan.total;
  j["seed"] = plan.seed;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& planned : plan.entries) {
    nlohmann::ordered_json e;
    e["name"] = planned.entry.name;
    e["source"] = blend_source_to_string(planned.entry.source);
    e["ratio"] = planned.entry.ratio;
    e["instruction"] = planned.entry.instruction;
    e["path"] = planned.entry.path;
    e["count"] = planned.count;
    e["example_ids"] = planned.example_ids;
    e["external_indices"] = planned.external_indices;
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  j["warnings"] = plan.warnings;
  jsonl::write_text_atomic(path, j.dump(2));
}

BlendPlan load_blend_plan(const std::string& path) {
  json j = jsonl::read_json_file(path);
  BlendPlan plan;
  plan.total = j.at("total").get<size_t>();
  plan.seed = j.at("seed").get<uint64_t>();
  for (const auto& e : j.at("entries")) {
    BlendPlan::Entry planned;
    planned.entry.name = e.at("name").get<std::string>();
    planned.entry.source = blend_source_from_string(e.at("source").get<std::string>());
    planned.entry.ratio = e.at("ratio").get<double>();
    planned.entry.instruction = e.at("instruction").get<std::string>();
    planned.entry.path = e.value("path", "");
    planned.count = e.at("count").get<size_t>();
    for (const auto& id : e.at("example_ids")) {
      planned.example_ids.push_back(id.get<std::string>());
    }
    for (const auto& index : e.at("external_indices")) {
      planned.external_indices.push_back(index.get<size_t>());
    }
    plan.entries.push_back(std::move(planned));
  }
  for (const auto& w : j.value("warnings", json::array())) {
    plan.warnings.push_back(w.get<std::string>());
  }
  return plan;
}

std::string blend_source_to_string(BlendSource s) {
  switch (s) {
    case BlendSource::synthetic_short_span: return "synthetic_short_span";
    case BlendSource::synthetic_mc: return "synthetic_mc";
    case BlendSource::synthetic_claim: return "synthetic_claim";
    case BlendSource::external_file: return "external_file";
  }
  return "external_file";
}

BlendSource blend_source_from_string(std::string_view s) {
  if (s == "synthetic_short_span") return BlendSource::synthetic_short_span;
  if (s == "synthetic_mc") return BlendSource::synthetic_mc;
  if (s == "synthetic_claim") return BlendSource::synthetic_claim;
  if (s == "external_file") return BlendSource::external_file;
  throw ConfigError("unknown blend source: " + std::string(s));
}

}  // namespace raggen
