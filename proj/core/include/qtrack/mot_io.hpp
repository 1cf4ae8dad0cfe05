#pragma once

#include <string>
#include <vector>

#include "qtrack/lifecycle.hpp"

namespace qtrack::io {

/// One MOTChallenge CSV row: "frame,id,bb_left,bb_top,bb_width,bb_height,
/// conf,x,y,z". Frames and ids are 1-based; boxes are top-left pixel units;
/// x/y/z stay -1 for 2D data.
struct MotRecord {
  int frame = 1;
  int id = 1;
  double bb_left = 0.0;
  double bb_top = 0.0;
  double bb_width = 0.0;
  double bb_height = 0.0;
  double conf = 1.0;
  double x = -1.0;
  double y = -1.0;
  double z = -1.0;

  friend bool operator==(const MotRecord&, const MotRecord&) = default;
};

/// Parses a MOT CSV file. Malformed lines (wrong field count, unparseable
/// numbers, negative box dimensions) raise std::runtime_error naming the
/// file and 1-based line number.
std::vector<MotRecord> read_mot(const std::string& path);

/// Writes records sorted by (frame, id), newline-terminated, shortest
/// round-trip number formatting with a period decimal separator -- so
/// write(read(file)) reproduces a canonical file byte for byte. Positive
/// frame/id and non-negative box dimensions are enforced.
void write_mot(std::vector<MotRecord> records, const std::string& path);

/// Tracker records (0-based frames, normalized center boxes) to MOT rows
/// (1-based frames, pixel top-left boxes) and back.
std::vector<MotRecord> to_mot(const std::vector<track::TrackRecord>& records,
                              double image_w, double image_h);
std::vector<track::TrackRecord> from_mot(const std::vector<MotRecord>& records,
                                         double image_w, double image_h);

}  // namespace qtrack::io
