#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "clinsynth/errors.hpp"
#include "clinsynth/io.hpp"
#include "clinsynth/text.hpp"

namespace clinsynth {

enum class NoteType { discharge_summary, radiology_report, other };

inline const char* to_string(NoteType t) {
  switch (t) {
    case NoteType::discharge_summary: return "discharge_summary";
    case NoteType::radiology_report: return "radiology_report";
    default: return "other";
  }
}

inline std::optional<NoteType> note_type_from_string(std::string_view s) {
  if (s == "discharge_summary") return NoteType::discharge_summary;
  if (s == "radiology_report") return NoteType::radiology_report;
  if (s == "other") return NoteType::other;
  return std::nullopt;
}

struct SourceNote {
  std::string note_id;
  std::string text;
  NoteType note_type = NoteType::other;
  std::optional<int> date_year;
  std::string corpus_id;
};

struct NoteFilter {
  std::optional<NoteType> note_type;
  std::optional<int> min_year;
  std::optional<int> max_year;

  bool empty() const { return !note_type && !min_year && !max_year; }

  // Year filters require a year: a note without one cannot be proven in
  // range and is skipped.
  bool passes(const SourceNote& n) const {
    if (note_type && n.note_type != *note_type) return false;
    if (min_year || max_year) {
      if (!n.date_year) return false;
      if (min_year && *n.date_year < *min_year) return false;
      if (max_year && *n.date_year > *max_year) return false;
    }
    return true;
  }
};

struct LoadSummary {
  std::uint64_t total = 0;
  std::uint64_t kept = 0;
  std::uint64_t skipped = 0;
  std::uint64_t malformed = 0;
  std::vector<std::string> warnings;
};

struct LoadedNotes {
  std::vector<SourceNote> notes;
  LoadSummary summary;
};

enum class NoteFormat { jsonl, csv };

inline NoteFormat note_format_from_string(std::string_view s) {
  if (s == "jsonl") return NoteFormat::jsonl;
  if (s == "csv") return NoteFormat::csv;
  throw ConfigError("unknown note format '" + std::string(s) +
                    "' (expected jsonl or csv)");
}

namespace detail {

// RFC-4180: quoted fields, doubled-quote escapes, LF or CRLF row breaks.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view s) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool row_started = false;
  std::size_t i = 0;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    if (row_started || !row.empty() || !field.empty()) {
      end_field();
      rows.push_back(std::move(row));
      row.clear();
    }
    row_started = false;
  };
  while (i < s.size()) {
    const char c = s[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        quoted = false;
        ++i;
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        row_started = true;
        ++i;
        break;
      case ',':
        end_field();
        row_started = true;
        ++i;
        break;
      case '\r':
        if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
        [[fallthrough]];
      case '\n':
        end_row();
        ++i;
        break;
      default:
        field += c;
        row_started = true;
        ++i;
        break;
    }
  }
  end_row();
  return rows;
}

struct ParsedNote {
  SourceNote note;
  std::string error;  // non-empty means malformed
};

inline ParsedNote note_from_fields(std::optional<std::string> note_id,
                                   std::optional<std::string> text,
                                   std::optional<std::string> note_type,
                                   std::optional<std::string> date_year_raw,
                                   std::optional<int> date_year) {
  ParsedNote out;
  if (!note_id || trim_view(*note_id).empty()) {
    out.error = "missing note_id";
    return out;
  }
  if (!text || trim_view(*text).empty()) {
    out.error = "missing or empty text";
    return out;
  }
  out.note.note_id = *note_id;
  out.note.text = *text;
  if (note_type && !trim_view(*note_type).empty()) {
    auto t = note_type_from_string(*note_type);
    if (!t) {
      out.error = "unknown note_type '" + *note_type + "'";
      return out;
    }
    out.note.note_type = *t;
  }
  if (date_year) {
    out.note.date_year = date_year;
  } else if (date_year_raw && !trim_view(*date_year_raw).empty()) {
    const std::string y(trim_view(*date_year_raw));
    std::size_t pos = 0;
    int value = 0;
    try {
      value = std::stoi(y, &pos);
    } catch (...) {
      pos = 0;
    }
    if (pos != y.size()) {
      out.error = "date_year not an integer: '" + y + "'";
      return out;
    }
    out.note.date_year = value;
  }
  return out;
}

}  // namespace detail

// Loads every record, skipping (and counting) notes that fail the filter
// and warning on malformed records instead of aborting. Duplicate note ids
// are fatal: the corpus itself is broken.
inline LoadedNotes load_notes(const fs::path& path, NoteFormat format,
                              const NoteFilter& filter = {},
                              std::string corpus_id = "") {
  const std::string content = read_file(path);
  if (corpus_id.empty()) corpus_id = path.stem().string();

  LoadedNotes out;
  std::unordered_set<std::string> seen_ids;

  auto add = [&](detail::ParsedNote&& parsed, std::uint64_t line_no) {
    ++out.summary.total;
    if (!parsed.error.empty()) {
      ++out.summary.malformed;
      out.summary.warnings.push_back(path.filename().string() + ":" +
                                     std::to_string(line_no) + ": " +
                                     parsed.error);
      return;
    }
    if (!seen_ids.insert(parsed.note.note_id).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": duplicate note_id '" + parsed.note.note_id + "'");
    }
    if (!filter.passes(parsed.note)) {
      ++out.summary.skipped;
      return;
    }
    parsed.note.corpus_id = corpus_id;
    out.notes.push_back(std::move(parsed.note));
    ++out.summary.kept;
  };

  if (format == NoteFormat::jsonl) {
    std::uint64_t line_no = 0;
    for (std::string_view line : split_lines(content)) {
      ++line_no;
      if (trim_view(line).empty()) continue;
      nlohmann::json row = nlohmann::json::parse(line, nullptr, false);
      if (row.is_discarded() || !row.is_object()) {
        detail::ParsedNote bad;
        bad.error = "invalid JSON";
        add(std::move(bad), line_no);
        continue;
      }
      auto opt_str = [&](const char* key) -> std::optional<std::string> {
        if (!row.contains(key)) return std::nullopt;
        if (!row.at(key).is_string()) return std::optional<std::string>("");
        return row.at(key).get<std::string>();
      };
      std::optional<int> year;
      std::optional<std::string> year_raw;
      if (row.contains("date_year")) {
        if (row.at("date_year").is_number_integer()) {
          year = row.at("date_year").get<int>();
        } else if (row.at("date_year").is_string()) {
          year_raw = row.at("date_year").get<std::string>();
        } else {
          year_raw = "?";  // forces a malformed diagnosis below
        }
      }
      add(detail::note_from_fields(opt_str("note_id"), opt_str("text"),
                                   opt_str("note_type"), year_raw, year),
          line_no);
    }
  } else {
    const auto rows = detail::parse_csv(content);
    if (rows.empty()) return out;
    const auto& header = rows.front();
    auto col = [&](std::string_view name) -> std::optional<std::size_t> {
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
      }
      return std::nullopt;
    };
    const auto id_col = col("note_id");
    const auto text_col = col("text");
    if (!id_col || !text_col) {
      throw DataError(path.string() +
                      ": CSV header must contain note_id and text columns");
    }
    const auto type_col = col("note_type");
    const auto year_col = col("date_year");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      auto cell = [&](std::optional<std::size_t> c)
          -> std::optional<std::string> {
        if (!c || *c >= row.size()) return std::nullopt;
        return row[*c];
      };
      add(detail::note_from_fields(cell(id_col), cell(text_col),
                                   cell(type_col), cell(year_col),
                                   std::nullopt),
          r + 1);
    }
  }
  return out;
}

}  // namespace clinsynth
