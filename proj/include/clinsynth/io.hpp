#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "clinsynth/errors.hpp"

namespace clinsynth {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// All outputs go through here: write to a sibling temp file, then rename.
// A failed command never leaves a partial file at the target path.
inline void atomic_write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("short write: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

// Splits on '\n', dropping a trailing empty line. '\r' before the break is
// stripped so CRLF inputs parse the same as LF. The views alias `content`,
// so the rvalue overload is deleted: callers must keep the string alive.
inline std::vector<std::string_view> split_lines(std::string&&) = delete;
inline std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t nl = content.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < content.size()) lines.push_back(content.substr(start));
      break;
    }
    std::size_t end = nl;
    if (end > start && content[end - 1] == '\r') --end;
    lines.push_back(content.substr(start, end - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace clinsynth
