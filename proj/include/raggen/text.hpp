#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace raggen::text {

// Splits on Unicode whitespace (ASCII space/tab/newlines plus NBSP, the
// U+2000 block, ideographic space, etc.). This is the chunking tokenizer:
// model-free and deterministic.
std::vector<std::string> whitespace_tokens(std::string_view s);

// Lowercases ASCII letters, maps ASCII punctuation and Unicode whitespace to
// spaces, keeps other multi-byte characters verbatim, and collapses runs of
// spaces. Shared by the index, the round-trip containment check, and Rouge-L.
std::string normalize_light(std::string_view s);
std::vector<std::string> light_tokens(std::string_view s);

// normalize_light plus removal of the articles "a", "an", "the". This is the
// QA-metric normalizer (exact match, token F1).
std::string normalize_qa(std::string_view s);
std::vector<std::string> qa_tokens(std::string_view s);

// True when normalize_light(needle) is a substring of normalize_light(hay)
// and the needle is non-empty after normalization.
bool contains_normalized(std::string_view hay, std::string_view needle);

// True when lowercased `needle` occurs verbatim in lowercased `hay`
// (ASCII case folding only).
bool contains_ci(std::string_view hay, std::string_view needle);

std::string trim(std::string_view s);
std::string lower_ascii(std::string_view s);

uint64_t fnv1a64(std::string_view s);

}  // namespace raggen::text
