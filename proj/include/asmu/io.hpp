#pragma once

#include <atomic>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "asmu/error.hpp"
#include "asmu/geometry.hpp"

namespace asmu {

/// One annotated (or predicted) image: {"id", "width", "height", "points"}.
struct Annotation {
  std::string id;
  PointSet points;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io, "cannot read " + path.string());
  return text;
}

inline nlohmann::json parse_json_text(std::string_view text, const std::string& source) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::parse, "malformed JSON in " + source);
  return j;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  return parse_json_text(read_text_file(path), path.string());
}

inline Annotation annotation_from_json(const nlohmann::json& j) {
  const auto bad = [](const std::string& m) { throw Error(ErrorCode::parse, "annotation: " + m); };
  if (!j.is_object()) bad("expected an object");
  for (const auto& [k, v] : j.items()) {
    if (k != "id" && k != "width" && k != "height" && k != "points") bad("unknown key '" + k + "'");
  }
  if (!j.contains("id") || !j["id"].is_string()) bad("'id' must be a string");
  if (!j.contains("width") || !j["width"].is_number()) bad("'width' must be a number");
  if (!j.contains("height") || !j["height"].is_number()) bad("'height' must be a number");
  if (!j.contains("points") || !j["points"].is_array()) bad("'points' must be an array");
  std::vector<Point> pts;
  pts.reserve(j["points"].size());
  for (const auto& p : j["points"]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      bad("each point must be [x, y]");
    }
    pts.push_back(Point{p[0].get<double>(), p[1].get<double>()});
  }
  return Annotation{j["id"].get<std::string>(),
                    PointSet(j["width"].get<double>(), j["height"].get<double>(), std::move(pts))};
}

inline nlohmann::json to_json(const Annotation& a) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : a.points) pts.push_back({p.x, p.y});
  return {{"id", a.id}, {"width", a.points.frame_width()}, {"height", a.points.frame_height()}, {"points", pts}};
}

/// A file holds either one annotation object or an array of them. Ids must
/// be unique within a file.
inline std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  std::vector<Annotation> out;
  try {
    if (j.is_array()) {
      for (const auto& item : j) out.push_back(annotation_from_json(item));
    } else {
      out.push_back(annotation_from_json(j));
    }
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  std::map<std::string, int> seen;
  for (const auto& a : out) {
    if (seen[a.id]++) throw Error(ErrorCode::parse, path.string() + ": duplicate id '" + a.id + "'");
  }
  return out;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_number(std::uint64_t v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row_strings(header); }

  CsvWriter& field(std::string_view s) {
    sep();
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
      out_ += s;
    } else {
      out_ += '"';
      for (char c : s) {
        if (c == '"') out_ += '"';
        out_ += c;
      }
      out_ += '"';
    }
    return *this;
  }
  CsvWriter& field(const std::string& s) { return field(std::string_view(s)); }
  CsvWriter& field(const char* s) { return field(std::string_view(s)); }
  CsvWriter& field(double v) { return field(std::string_view(format_number(v))); }
  CsvWriter& field(std::uint64_t v) { return field(std::string_view(format_number(v))); }
  CsvWriter& field(int v) { return field(std::string_view(std::to_string(v))); }
  CsvWriter& empty() { return field(std::string_view()); }

  void end_row() {
    if (in_row_ != columns_) throw Error(ErrorCode::shape, "CSV row has the wrong number of fields");
    out_ += '\n';
    in_row_ = 0;
  }

  const std::string& str() const noexcept { return out_; }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (const auto& c : cells) field(c);
    end_row();
  }
  void sep() {
    if (in_row_ > 0) out_ += ',';
    ++in_row_;
  }

  std::size_t columns_;
  std::size_t in_row_ = 0;
  std::string out_;
};

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// readers see the old file or the complete new one, never a partial write.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  static std::atomic<std::uint64_t> counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot create " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::io, "cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::io, "cannot rename into " + path.string());
  }
}

inline void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace asmu
