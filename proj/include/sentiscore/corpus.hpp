#pragma once

// Review ingestion and the three cleaning passes: tag removal, special
// character removal and per-user deduplication.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "utf8.hpp"

namespace sentiscore {

struct RawReview {
  std::string user_id;
  std::string text;
  double rating = 0.0;

  friend bool operator==(const RawReview&, const RawReview&) = default;
};

// Text has no tags and no characters outside letters, digits and single
// separating spaces; it is never empty.
struct CleanReview {
  std::string user_id;
  std::string text;
  double rating = 0.0;

  friend bool operator==(const CleanReview&, const CleanReview&) = default;
};

constexpr double kMinRating = 0.0;
constexpr double kMaxRating = 5.0;

inline bool rating_in_range(double r) noexcept { return r >= kMinRating && r <= kMaxRating; }

// Removes every `<...>` span. A `<` with no later `>` is kept as text.
inline std::string strip_html(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<') {
      const auto close = text.find('>', i + 1);
      if (close != std::string_view::npos) {
        i = close + 1;
        continue;
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

// Keeps letters and decimal digits. Each run of anything else between two
// kept characters becomes one space; leading and trailing runs vanish.
inline std::string strip_special_chars(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = utf8::decode(text, pos);
    if (utf8::is_alnum(cp)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      utf8::append(out, cp);
    } else {
      pending_space = true;
    }
  }
  return out;
}

inline std::string clean_text(std::string_view text) { return strip_special_chars(strip_html(text)); }

// Keeps the first review for each (user_id, cleaned text) key, in order.
inline std::vector<RawReview> deduplicate(const std::vector<RawReview>& reviews) {
  std::unordered_set<std::string> seen;
  std::vector<RawReview> out;
  out.reserve(reviews.size());
  for (const auto& r : reviews) {
    // user ids cannot contain '\0' in either input format
    std::string key = r.user_id;
    key.push_back('\0');
    key += clean_text(r.text);
    if (seen.insert(std::move(key)).second) out.push_back(r);
  }
  return out;
}

struct CleanResult {
  std::vector<CleanReview> reviews;
  std::size_t input_count = 0;
  std::size_t duplicates_removed = 0;
  std::size_t empty_dropped = 0;
};

inline CleanResult clean_reviews(const std::vector<RawReview>& raw) {
  CleanResult result;
  result.input_count = raw.size();
  const auto unique = deduplicate(raw);
  result.duplicates_removed = raw.size() - unique.size();
  result.reviews.reserve(unique.size());
  for (const auto& r : unique) {
    auto text = clean_text(r.text);
    if (text.empty()) {
      ++result.empty_dropped;
      continue;
    }
    result.reviews.push_back({r.user_id, std::move(text), r.rating});
  }
  return result;
}

enum class DatasetFormat { delimited, record_per_line };

// `.csv` is delimited; anything else is one JSON record per line.
inline DatasetFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::delimited : DatasetFormat::record_per_line;
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double parse_rating(std::string_view field, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  double value = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || end != field.data() + field.size() || field.empty()) {
    throw ParseError("rating is not a number: '" + std::string(field) + "'", line);
  }
  return value;
}

inline void check_record(const RawReview& r, std::size_t line) {
  if (!rating_in_range(r.rating)) {
    throw ParseError("rating " + std::to_string(r.rating) + " outside [0,5] for record of user '" + r.user_id + "'",
                     line);
  }
  if (!utf8::is_valid(r.text) || !utf8::is_valid(r.user_id)) throw ParseError("record is not valid UTF-8", line);
}

// RFC 4180 style fields. Returns records with the line each one starts on.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> split_csv(std::string_view data) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> fields;
  std::string field;
  std::size_t line = 1;
  std::size_t row_line = 1;
  bool in_quotes = false;
  bool field_started = false;
  auto end_row = [&] {
    fields.push_back(std::move(field));
    field.clear();
    const bool blank = fields.size() == 1 && fields[0].empty() && !field_started;
    if (!blank) rows.emplace_back(row_line, std::move(fields));
    fields.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw ParseError("quote inside unquoted field", line);
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        row_line = line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", row_line);
  if (!field.empty() || !fields.empty() || field_started) end_row();
  return rows;
}

inline std::string csv_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

inline std::vector<RawReview> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::string data = detail::read_file(path);
  if (data.starts_with("\xEF\xBB\xBF")) data.erase(0, 3);
  std::vector<RawReview> out;
  if (format == DatasetFormat::delimited) {
    auto rows = detail::split_csv(data);
    if (rows.empty()) throw ParseError("missing header row", 1);
    const auto& header = rows.front().second;
    if (header != std::vector<std::string>{"user_id", "text", "rating"}) {
      throw ParseError("header must be user_id,text,rating", rows.front().first);
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& [line, fields] = rows[r];
      if (fields.size() != 3) {
        throw ParseError("expected 3 fields, found " + std::to_string(fields.size()), line);
      }
      RawReview review{fields[0], fields[1], detail::parse_rating(fields[2], line)};
      detail::check_record(review, line);
      out.push_back(std::move(review));
    }
    return out;
  }
  std::size_t line = 0;
  std::size_t start = 0;
  while (start <= data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    ++line;
    std::string_view text(data.data() + start, end - start);
    start = end + 1;
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    if (text.find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line);
    }
    if (!record.is_object() || !record.contains("user_id") || !record.contains("text") ||
        !record.contains("rating")) {
      throw ParseError("record needs user_id, text and rating", line);
    }
    const auto& uid = record["user_id"];
    if (!record["text"].is_string() || !record["rating"].is_number() || !(uid.is_string() || uid.is_number())) {
      throw ParseError("record field has the wrong type", line);
    }
    RawReview review{uid.is_string() ? uid.get<std::string>() : uid.dump(), record["text"].get<std::string>(),
                     record["rating"].get<double>()};
    detail::check_record(review, line);
    out.push_back(std::move(review));
  }
  return out;
}

inline std::vector<RawReview> load_dataset(const std::filesystem::path& path) {
  return load_dataset(path, format_for_path(path));
}

template <class Review>
void save_dataset(const std::filesystem::path& path, const std::vector<Review>& reviews, DatasetFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file", path.string());
  if (format == DatasetFormat::delimited) {
    out << "user_id,text,rating\n";
    for (const auto& r : reviews) {
      out << detail::csv_quote(r.user_id) << ',' << detail::csv_quote(r.text) << ','
          << nlohmann::json(r.rating).dump() << '\n';
    }
  } else {
    for (const auto& r : reviews) {
      nlohmann::json j = {{"user_id", r.user_id}, {"text", r.text}, {"rating", r.rating}};
      out << j.dump() << '\n';
    }
  }
  if (!out) throw IoError("write failed", path.string());
}

}  // namespace sentiscore
