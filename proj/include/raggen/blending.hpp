#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "raggen/corpus.hpp"
#include "raggen/synthesis.hpp"

namespace raggen {

enum class BlendSource {
  synthetic_short_span,
  synthetic_mc,
  synthetic_claim,
  external_file,
};

struct BlendEntry {
  std::string name;
  BlendSource source = BlendSource::external_file;
  double ratio = 0.0;       // ratios across all entries sum to 1 +/- 1e-9
  std::string instruction;  // rendered into the user turn; may hold {claim}
  std::string path;         // external_file entries only
};

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// A single training conversation with an assistant-only loss mask.
struct TrainingRecord {
  std::vector<ChatMessage> messages;
  std::vector<bool> loss_mask;  // true exactly on the assistant message
  std::string blend_entry;
  std::string example_id;

  bool operator==(const TrainingRecord&) const = default;
};

// The default training mixture: the three synthetic entries plus placeholder
// entries for the user-supplied external datasets, with their per-dataset
// instructions. The ratios sum to 1.
std::vector<BlendEntry> default_blend();

// Attaches user files to external entries by name, drops external entries
// with no file, and renormalizes the remaining ratios proportionally.
// A dropped entry produces a warning.
std::vector<BlendEntry> resolve_blend(std::vector<BlendEntry> entries,
                                      const std::map<std::string, std::string>& external_paths,
                                      std::vector<std::string>* warnings = nullptr);

// Largest-remainder apportionment of `total` across entry ratios; remainder
// ties go to the lexicographically first entry name. Each count differs from
// ratio*total by less than 1 and the counts sum to total exactly.
std::vector<size_t> apportion(const std::vector<BlendEntry>& entries, size_t total);

struct BlendPools {
  std::vector<SyntheticExample> short_span;
  std::vector<SyntheticExample> multiple_choice;
  std::vector<SyntheticExample> claim;
  std::map<std::string, std::vector<TrainingRecord>> external;  // by entry name
};

// Partitions kept synthetic examples by task type.
BlendPools split_pools(const std::vector<SyntheticExample>& kept);

// Builds the three-turn conversation for one synthetic example: contexts in
// rank order, the entry instruction (with {claim} instantiated for claim
// entries), the question with options for multiple choice, and the bare gold
// text as the assistant turn.
TrainingRecord make_training_record(const SyntheticExample& example,
                                    const BlendEntry& entry, const PassageStore& store,
                                    std::string_view system_prompt);

// A fixed sampling decision: which pool members fill each entry's count.
// Separating the plan from materialization lets the CLI persist and inspect
// the allocation before records are built.
struct BlendPlan {
  struct Entry {
    BlendEntry entry;
    size_t count = 0;
    std::vector<std::string> example_ids;     // synthetic entries
    std::vector<size_t> external_indices;     // external entries
  };
  size_t total = 0;
  uint64_t seed = 0;
  std::vector<Entry> entries;
  std::vector<std::string> warnings;
};

// Apportions `total` across entries and samples each pool: without
// replacement when the pool is large enough, with replacement and a warning
// otherwise. Throws ConfigError for a positive-ratio entry with an empty pool.
BlendPlan plan_blend(const std::vector<BlendEntry>& entries, const BlendPools& pools,
                     size_t total, uint64_t seed);

// Builds the records fixed by the plan and applies the single global
// seed-determined shuffle.
std::vector<TrainingRecord> materialize(const BlendPlan& plan, const BlendPools& pools,
                                        const PassageStore& store);

// plan_blend + materialize in one step.
std::vector<TrainingRecord> blend(const std::vector<BlendEntry>& entries,
                                  const BlendPools& pools, const PassageStore& store,
                                  size_t total, uint64_t seed,
                                  std::vector<std::string>* warnings = nullptr);

void save_blend_plan(const BlendPlan& plan, const std::string& path);
BlendPlan load_blend_plan(const std::string& path);

// One record per line (field order: messages, loss_mask, meta) plus a
// manifest at <path>.manifest.json carrying per-entry counts, the config
// digest, and the seed. Partial files are cleaned up on failure.
void export_records(const std::vector<TrainingRecord>& records, const std::string& path,
                    const std::string& config_digest, uint64_t seed);

std::vector<TrainingRecord> load_records(const std::string& path);

std::string blend_source_to_string(BlendSource s);
BlendSource blend_source_from_string(std::string_view s);

}  // namespace raggen
