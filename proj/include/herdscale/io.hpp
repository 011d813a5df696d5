#pragma once

// Point cloud readers/writers: XYZ text, CSV, ASCII PLY and little-endian
// binary PLY. Only x, y, z survive loading; other vertex properties are skipped.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "herdscale/error.hpp"
#include "herdscale/point_cloud.hpp"

namespace herdscale {

enum class CloudFormat { XyzAscii, Csv, PlyAscii, PlyBinaryLE };

inline std::string_view to_string(CloudFormat format) noexcept {
  switch (format) {
    case CloudFormat::XyzAscii: return "xyz-ascii";
    case CloudFormat::Csv: return "csv";
    case CloudFormat::PlyAscii: return "ply-ascii";
    case CloudFormat::PlyBinaryLE: return "ply-binary-le";
  }
  return "unknown";
}

inline std::optional<CloudFormat> parse_format(std::string_view name) {
  if (name == "xyz-ascii") return CloudFormat::XyzAscii;
  if (name == "csv") return CloudFormat::Csv;
  if (name == "ply-ascii") return CloudFormat::PlyAscii;
  if (name == "ply-binary-le") return CloudFormat::PlyBinaryLE;
  return std::nullopt;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string_view> split_char(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Parses a full token as a double; accepts "nan"/"inf" so callers can
/// report them as non-finite rather than as syntax errors.
inline std::optional<double> parse_double(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc::result_out_of_range) {
    return std::nullopt;
  }
  if (ec != std::errc{} || ptr != last || token.empty()) return std::nullopt;
  return value;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec) || std::filesystem::is_directory(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Point3 checked_point(double x, double y, double z, std::size_t index) {
  Point3 p{x, y, z};
  if (!p.finite()) {
    throw Error(ErrorCode::NonFiniteCoordinate, "vertex " + std::to_string(index), std::to_string(index));
  }
  return p;
}

inline Error parse_error(std::size_t line, const std::string& what) {
  return Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

// Lines are 1-based in diagnostics.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::optional<std::string_view> next() {
    if (pos_ >= text_.size()) return std::nullopt;
    const auto nl = text_.find('\n', pos_);
    const auto end = nl == std::string_view::npos ? text_.size() : nl;
    auto line = text_.substr(pos_, end - pos_);
    pos_ = nl == std::string_view::npos ? text_.size() : nl + 1;
    ++line_;
    return line;
  }

  std::size_t line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return pos_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

inline PointCloud finish(std::vector<Point3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyCloud, "no vertices");
  return PointCloud(std::move(points));
}

inline PointCloud parse_xyz(std::string_view text) {
  LineReader reader(text);
  std::vector<Point3> points;
  while (auto line = reader.next()) {
    auto body = trim(*line);
    if (body.empty() || body.front() == '#') continue;
    auto tokens = split_ws(body);
    if (tokens.size() < 3) throw parse_error(reader.line(), "expected 3 coordinates");
    double c[3];
    for (int a = 0; a < 3; ++a) {
      auto v = parse_double(tokens[a]);
      if (!v) throw parse_error(reader.line(), "bad number '" + std::string(tokens[a]) + "'");
      c[a] = *v;
    }
    points.push_back(checked_point(c[0], c[1], c[2], points.size()));
  }
  return finish(std::move(points));
}

inline PointCloud parse_csv(std::string_view text) {
  LineReader reader(text);
  std::vector<Point3> points;
  std::size_t col[3] = {0, 1, 2};
  bool first_content = true;
  while (auto line = reader.next()) {
    auto body = trim(*line);
    if (body.empty() || body.front() == '#') continue;
    auto fields = split_char(body, ',');
    if (first_content) {
      first_content = false;
      if (!parse_double(fields[0])) {
        // header row: locate x, y, z by name
        const char* names[3] = {"x", "y", "z"};
        for (int a = 0; a < 3; ++a) {
          auto it = std::find_if(fields.begin(), fields.end(), [&](std::string_view f) {
            return f.size() == 1 && (f[0] == names[a][0] || f[0] == names[a][0] - 32);
          });
          if (it == fields.end()) throw parse_error(reader.line(), std::string("header lacks column ") + names[a]);
          col[a] = static_cast<std::size_t>(it - fields.begin());
        }
        continue;
      }
    }
    double c[3];
    for (int a = 0; a < 3; ++a) {
      if (col[a] >= fields.size()) throw parse_error(reader.line(), "missing column");
      auto v = parse_double(fields[col[a]]);
      if (!v) throw parse_error(reader.line(), "bad number '" + std::string(fields[col[a]]) + "'");
      c[a] = *v;
    }
    points.push_back(checked_point(c[0], c[1], c[2], points.size()));
  }
  return finish(std::move(points));
}

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or list item type
  std::string count_type;  // non-empty for list properties
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  bool binary = false;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;
};

inline std::size_t ply_type_size(std::string_view t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

inline PlyHeader parse_ply_header(std::string_view text) {
  LineReader reader(text);
  auto magic = reader.next();
  if (!magic || trim(*magic) != "ply") throw parse_error(1, "missing 'ply' magic");
  PlyHeader header;
  bool have_format = false;
  while (auto line = reader.next()) {
    auto tokens = split_ws(trim(*line));
    if (tokens.empty()) continue;
    if (tokens[0] == "end_header") {
      if (!have_format) throw parse_error(reader.line(), "missing format line");
      header.body_offset = reader.offset();
      return header;
    }
    if (tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2) throw parse_error(reader.line(), "bad format line");
      if (tokens[1] == "ascii") {
        header.binary = false;
      } else if (tokens[1] == "binary_little_endian") {
        header.binary = true;
      } else {
        throw parse_error(reader.line(), "unsupported PLY format '" + std::string(tokens[1]) + "'");
      }
      have_format = true;
    } else if (tokens[0] == "element") {
      if (tokens.size() < 3) throw parse_error(reader.line(), "bad element line");
      PlyElement el;
      el.name = std::string(tokens[1]);
      auto n = parse_double(tokens[2]);
      if (!n || *n < 0 || *n != static_cast<double>(static_cast<std::size_t>(*n))) {
        throw parse_error(reader.line(), "bad element count");
      }
      el.count = static_cast<std::size_t>(*n);
      header.elements.push_back(std::move(el));
    } else if (tokens[0] == "property") {
      if (header.elements.empty()) throw parse_error(reader.line(), "property before element");
      PlyProperty prop;
      if (tokens.size() >= 5 && tokens[1] == "list") {
        prop.count_type = std::string(tokens[2]);
        prop.type = std::string(tokens[3]);
        prop.name = std::string(tokens[4]);
        if (ply_type_size(prop.count_type) == 0) throw parse_error(reader.line(), "bad list count type");
      } else if (tokens.size() >= 3) {
        prop.type = std::string(tokens[1]);
        prop.name = std::string(tokens[2]);
      } else {
        throw parse_error(reader.line(), "bad property line");
      }
      if (ply_type_size(prop.type) == 0) throw parse_error(reader.line(), "unknown property type '" + prop.type + "'");
      header.elements.back().properties.push_back(std::move(prop));
    } else {
      throw parse_error(reader.line(), "unexpected header keyword '" + std::string(tokens[0]) + "'");
    }
  }
  throw parse_error(reader.line(), "missing end_header");
}

inline double read_le(const unsigned char* p, std::string_view type) {
  auto load = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
      // byte-swap for big-endian hosts
      unsigned char b[sizeof(T)];
      std::memcpy(b, &v, sizeof(T));
      std::reverse(b, b + sizeof(T));
      std::memcpy(&v, b, sizeof(T));
    }
    return static_cast<double>(v);
  };
  if (type == "char" || type == "int8") return load(std::int8_t{});
  if (type == "uchar" || type == "uint8") return load(std::uint8_t{});
  if (type == "short" || type == "int16") return load(std::int16_t{});
  if (type == "ushort" || type == "uint16") return load(std::uint16_t{});
  if (type == "int" || type == "int32") return load(std::int32_t{});
  if (type == "uint" || type == "uint32") return load(std::uint32_t{});
  if (type == "float" || type == "float32") return load(float{});
  return load(double{});
}

inline PointCloud parse_ply(std::string_view text, bool expect_binary) {
  const auto header = parse_ply_header(text);
  if (header.binary != expect_binary) {
    throw Error(ErrorCode::ParseError, expect_binary ? "PLY body is ascii, expected binary_little_endian"
                                                     : "PLY body is binary, expected ascii");
  }
  const auto vertex_it = std::find_if(header.elements.begin(), header.elements.end(),
                                      [](const PlyElement& e) { return e.name == "vertex"; });
  if (vertex_it == header.elements.end()) throw Error(ErrorCode::ParseError, "no vertex element");
  int xyz[3] = {-1, -1, -1};
  for (std::size_t i = 0; i < vertex_it->properties.size(); ++i) {
    const auto& prop = vertex_it->properties[i];
    if (!prop.count_type.empty()) continue;
    if (prop.name == "x") xyz[0] = static_cast<int>(i);
    if (prop.name == "y") xyz[1] = static_cast<int>(i);
    if (prop.name == "z") xyz[2] = static_cast<int>(i);
  }
  if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0) throw Error(ErrorCode::ParseError, "vertex element lacks x/y/z");
  if (vertex_it->count == 0) throw Error(ErrorCode::EmptyCloud, "element vertex 0");

  std::vector<Point3> points;
  points.reserve(vertex_it->count);

  if (!header.binary) {
    LineReader reader(text.substr(header.body_offset));
    std::size_t header_lines = static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(header.body_offset), '\n'));
    for (const auto& el : header.elements) {
      for (std::size_t r = 0; r < el.count; ++r) {
        std::optional<std::string_view> line;
        do {
          line = reader.next();
        } while (line && trim(*line).empty());
        if (!line) throw parse_error(header_lines + reader.line(), "unexpected end of file in element '" + el.name + "'");
        if (&el != &*vertex_it) continue;
        auto tokens = split_ws(trim(*line));
        double c[3] = {0.0, 0.0, 0.0};
        // walk properties; list properties consume a variable number of tokens
        std::size_t t = 0;
        for (std::size_t pi = 0; pi < el.properties.size(); ++pi) {
          if (t >= tokens.size()) throw parse_error(header_lines + reader.line(), "too few values");
          const auto& prop = el.properties[pi];
          if (!prop.count_type.empty()) {
            auto n = parse_double(tokens[t]);
            if (!n || *n < 0) throw parse_error(header_lines + reader.line(), "bad list count");
            t += 1 + static_cast<std::size_t>(*n);
            continue;
          }
          for (int a = 0; a < 3; ++a) {
            if (xyz[a] == static_cast<int>(pi)) {
              auto v = parse_double(tokens[t]);
              if (!v) throw parse_error(header_lines + reader.line(), "bad number '" + std::string(tokens[t]) + "'");
              c[a] = *v;
            }
          }
          ++t;
        }
        points.push_back(checked_point(c[0], c[1], c[2], points.size()));
      }
      if (&el == &*vertex_it) break;
    }
    return finish(std::move(points));
  }

  const auto* data = reinterpret_cast<const unsigned char*>(text.data());
  std::size_t pos = header.body_offset;
  const std::size_t size = text.size();
  auto need = [&](std::size_t n) {
    if (pos + n > size) {
      throw Error(ErrorCode::ParseError, "offset " + std::to_string(pos) + ": truncated binary body");
    }
  };
  for (const auto& el : header.elements) {
    const bool is_vertex = &el == &*vertex_it;
    for (std::size_t r = 0; r < el.count; ++r) {
      double c[3] = {0, 0, 0};
      for (std::size_t pi = 0; pi < el.properties.size(); ++pi) {
        const auto& prop = el.properties[pi];
        if (!prop.count_type.empty()) {
          const auto cs = ply_type_size(prop.count_type);
          need(cs);
          const double n = read_le(data + pos, prop.count_type);
          pos += cs;
          const auto bytes = static_cast<std::size_t>(n) * ply_type_size(prop.type);
          need(bytes);
          pos += bytes;
          continue;
        }
        const auto s = ply_type_size(prop.type);
        need(s);
        if (is_vertex) {
          for (int a = 0; a < 3; ++a) {
            if (xyz[a] == static_cast<int>(pi)) c[a] = read_le(data + pos, prop.type);
          }
        }
        pos += s;
      }
      if (is_vertex) points.push_back(checked_point(c[0], c[1], c[2], points.size()));
    }
    if (is_vertex) break;
  }
  return finish(std::move(points));
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

inline void append_float_le(std::string& out, float v) {
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
  out.append(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

/// Guess the format from the extension; `.ply` files are sniffed for the body encoding.
inline CloudFormat detect_format(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".xyz" || ext == ".txt") return CloudFormat::XyzAscii;
  if (ext == ".csv") return CloudFormat::Csv;
  if (ext == ".ply") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, path.string());
    std::string line;
    for (int i = 0; i < 64 && std::getline(in, line); ++i) {
      if (line.rfind("format", 0) == 0) {
        return line.find("binary_little_endian") != std::string::npos ? CloudFormat::PlyBinaryLE : CloudFormat::PlyAscii;
      }
    }
    throw Error(ErrorCode::ParseError, "no PLY format line in " + path.string());
  }
  throw Error(ErrorCode::ParseError, "cannot infer point cloud format from '" + ext + "'");
}

inline PointCloud parse_point_cloud(std::string_view text, CloudFormat format) {
  switch (format) {
    case CloudFormat::XyzAscii: return detail::parse_xyz(text);
    case CloudFormat::Csv: return detail::parse_csv(text);
    case CloudFormat::PlyAscii: return detail::parse_ply(text, false);
    case CloudFormat::PlyBinaryLE: return detail::parse_ply(text, true);
  }
  throw Error(ErrorCode::ParseError, "unknown format");
}

inline PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  const auto text = detail::read_file(path);
  try {
    return parse_point_cloud(text, format);
  } catch (const Error& e) {
    e.rethrow_in(path.filename().string());
  }
}

inline std::string serialize_point_cloud(const PointCloud& cloud, CloudFormat format) {
  using detail::format_double;
  std::string out;
  switch (format) {
    case CloudFormat::XyzAscii:
      for (const auto& p : cloud) out += format_double(p.x) + ' ' + format_double(p.y) + ' ' + format_double(p.z) + '\n';
      break;
    case CloudFormat::Csv:
      out = "x,y,z\n";
      for (const auto& p : cloud) out += format_double(p.x) + ',' + format_double(p.y) + ',' + format_double(p.z) + '\n';
      break;
    case CloudFormat::PlyAscii:
    case CloudFormat::PlyBinaryLE: {
      const bool binary = format == CloudFormat::PlyBinaryLE;
      out = "ply\nformat ";
      out += binary ? "binary_little_endian" : "ascii";
      out += " 1.0\nelement vertex " + std::to_string(cloud.size()) + "\n";
      const char* type = binary ? "float" : "double";
      for (const char* axis : {"x", "y", "z"}) out += std::string("property ") + type + " " + axis + "\n";
      out += "end_header\n";
      for (const auto& p : cloud) {
        if (binary) {
          detail::append_float_le(out, static_cast<float>(p.x));
          detail::append_float_le(out, static_cast<float>(p.y));
          detail::append_float_le(out, static_cast<float>(p.z));
        } else {
          out += format_double(p.x) + ' ' + format_double(p.y) + ' ' + format_double(p.z) + '\n';
        }
      }
      break;
    }
  }
  return out;
}

/// ASCII formats use shortest round-trip decimal text, so reloading is exact.
/// Binary PLY stores float32, exact for float-representable coordinates.
inline void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  detail::write_file(path, serialize_point_cloud(cloud, format));
}

}  // namespace herdscale
