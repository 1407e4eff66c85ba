#pragma once

#include <cstdint>
#include <vector>

#include "lsilt/fields.hpp"

namespace lsilt {

struct MetricsReport {
  std::int64_t l2 = 0;      // nm^2
  std::int64_t pvband = 0;  // nm^2
  std::int64_t shots = 0;
  double wall_time = 0.0;   // seconds
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  std::int64_t area() const { return static_cast<std::int64_t>(w) * h; }
  bool operator==(const Rect&) const = default;
};

using ShotList = std::vector<Rect>;

/// Disagreeing pixel count scaled by pitch^2.
std::int64_t l2_error(const BinaryGrid& printed, const BinaryGrid& target, double pitch_nm = 1.0);

/// Area of inner XOR outer, scaled by pitch^2.
std::int64_t pvband(const BinaryGrid& inner, const BinaryGrid& outer, double pitch_nm = 1.0);

/// Greedy fracturing: repeatedly remove the largest all-ones rectangle
/// (ties: topmost, then leftmost, then widest) until the mask is empty.
ShotList fracture(const BinaryGrid& mask);
std::int64_t shot_count(const BinaryGrid& mask);

BinaryGrid paint(const ShotList& shots, int width, int height);

}  // namespace lsilt
