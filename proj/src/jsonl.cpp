#include "raggen/jsonl.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "raggen/errors.hpp"

namespace raggen::jsonl {

void for_each_line(const std::string& path,
                   const std::function<void(size_t, const std::string&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(line_no, line);
  }
}

void write_atomic(const std::string& path,
                  const std::function<bool(std::string&)>& next_line) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    std::string line;
    while (next_line(line)) {
      out << line << '\n';
      line.clear();
    }
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw IoError("write failed: " + path);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw IoError("rename failed for " + path + ": " + ec.message());
  }
}

void write_text_atomic(const std::string& path, const std::string& content) {
  bool done = false;
  write_atomic(path, [&](std::string& line) {
    if (done) return false;
    line = content;
    done = true;
    return true;
  });
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace raggen::jsonl
