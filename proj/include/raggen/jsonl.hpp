#pragma once

#include <functional>
#include <string>

#include <json.hpp>

namespace raggen::jsonl {

// Calls `fn(line_number, line)` for every non-empty line; line numbers are
// 1-based. Throws IoError when the file cannot be opened.
void for_each_line(const std::string& path,
                   const std::function<void(size_t, const std::string&)>& fn);

// Writes lines produced by `fn` to `path` atomically: the content goes to a
// temp file first and is renamed into place, so a failed write never leaves a
// truncated artifact behind. `fn` returns false when there is nothing left.
void write_atomic(const std::string& path,
                  const std::function<bool(std::string&)>& next_line);

void write_text_atomic(const std::string& path, const std::string& content);

nlohmann::json read_json_file(const std::string& path);

}  // namespace raggen::jsonl
