#include "qtrack/mot_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qtrack::io {

namespace {

[[noreturn]] void line_error(const std::string& path, std::size_t line,
                             const std::string& reason) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + reason);
}

double parse_double(std::string_view field, const std::string& path,
                    std::size_t line) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(),
                                   out);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    line_error(path, line, "not a number: '" + std::string(field) + "'");
  return out;
}

int parse_int(std::string_view field, const std::string& path,
              std::size_t line) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(),
                                   out);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    line_error(path, line, "not an integer: '" + std::string(field) + "'");
  return out;
}

/// Shortest representation that parses back to the same double; period
/// decimal separator, no locale involvement.
void append_number(std::string& out, double v) {
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::logic_error("number formatting failed");
  out.append(buf.data(), ptr);
}

}  // namespace

std::vector<MotRecord> read_mot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::vector<MotRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) line_error(path, line_no, "empty line");
    std::array<std::string_view, 10> fields;
    std::string_view rest = line;
    for (int f = 0; f < 10; ++f) {
      std::size_t comma = rest.find(',');
      if (f < 9) {
        if (comma == std::string_view::npos)
          line_error(path, line_no, "expected 10 comma-separated fields");
        fields[f] = rest.substr(0, comma);
        rest = rest.substr(comma + 1);
      } else {
        if (comma != std::string_view::npos)
          line_error(path, line_no, "expected 10 comma-separated fields");
        fields[f] = rest;
      }
    }
    MotRecord r;
    r.frame = parse_int(fields[0], path, line_no);
    r.id = parse_int(fields[1], path, line_no);
    r.bb_left = parse_double(fields[2], path, line_no);
    r.bb_top = parse_double(fields[3], path, line_no);
    r.bb_width = parse_double(fields[4], path, line_no);
    r.bb_height = parse_double(fields[5], path, line_no);
    r.conf = parse_double(fields[6], path, line_no);
    r.x = parse_double(fields[7], path, line_no);
    r.y = parse_double(fields[8], path, line_no);
    r.z = parse_double(fields[9], path, line_no);
    if (r.bb_width < 0.0 || r.bb_height < 0.0)
      line_error(path, line_no, "negative box dimensions");
    records.push_back(r);
  }
  return records;
}

void write_mot(std::vector<MotRecord> records, const std::string& path) {
  for (const MotRecord& r : records) {
    if (r.frame < 1 || r.id < 1)
      throw std::invalid_argument(path + ": frame and id must be positive");
    if (r.bb_width < 0.0 || r.bb_height < 0.0)
      throw std::invalid_argument(path + ": negative box dimensions");
    for (double v : {r.bb_left, r.bb_top, r.bb_width, r.bb_height, r.conf,
                     r.x, r.y, r.z}) {
      if (!std::isfinite(v))
        throw std::invalid_argument(path + ": non-finite field");
    }
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const MotRecord& a, const MotRecord& b) {
                     return a.frame != b.frame ? a.frame < b.frame
                                               : a.id < b.id;
                   });
  std::string out;
  for (const MotRecord& r : records) {
    out += std::to_string(r.frame);
    out += ',';
    out += std::to_string(r.id);
    for (double v : {r.bb_left, r.bb_top, r.bb_width, r.bb_height, r.conf,
                     r.x, r.y, r.z}) {
      out += ',';
      append_number(out, v);
    }
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error(path + ": cannot open for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error(path + ": write failed");
}

std::vector<MotRecord> to_mot(const std::vector<track::TrackRecord>& records,
                              double image_w, double image_h) {
  std::vector<MotRecord> out;
  out.reserve(records.size());
  for (const track::TrackRecord& r : records) {
    MotRecord m;
    m.frame = r.frame + 1;
    m.id = r.id;
    m.bb_left = (r.box.cx - 0.5 * r.box.w) * image_w;
    m.bb_top = (r.box.cy - 0.5 * r.box.h) * image_h;
    m.bb_width = r.box.w * image_w;
    m.bb_height = r.box.h * image_h;
    m.conf = r.score;
    out.push_back(m);
  }
  return out;
}

std::vector<track::TrackRecord> from_mot(const std::vector<MotRecord>& records,
                                         double image_w, double image_h) {
  std::vector<track::TrackRecord> out;
  out.reserve(records.size());
  for (const MotRecord& m : records) {
    track::TrackRecord r;
    r.frame = m.frame - 1;
    r.id = m.id;
    r.box.w = m.bb_width / image_w;
    r.box.h = m.bb_height / image_h;
    r.box.cx = m.bb_left / image_w + 0.5 * r.box.w;
    r.box.cy = m.bb_top / image_h + 0.5 * r.box.h;
    r.score = m.conf;
    out.push_back(r);
  }
  return out;
}

}  // namespace qtrack::io
