#include "lsilt/metrics.hpp"

#include <cmath>
#include <tuple>

namespace lsilt {

namespace {

std::int64_t scaled_area(std::int64_t pixels, double pitch_nm) {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(pixels) * pitch_nm * pitch_nm));
}

std::int64_t xor_count(const BinaryGrid& a, const BinaryGrid& b) {
  std::int64_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += (a[i] != 0) != (b[i] != 0);
  return n;
}

// Candidate order: larger area, then smaller top, then smaller left, then wider.
bool better(const Rect& a, const Rect& b) {
  return std::make_tuple(-a.area(), a.y, a.x, -a.w) < std::make_tuple(-b.area(), b.y, b.x, -b.w);
}

struct Bounds {
  int x0, y0, x1, y1;  // inclusive; empty when x0 > x1
};

Bounds lit_bounds(const BinaryGrid& mask) {
  Bounds b{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) {
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }
  }
  return b;
}

// Largest all-ones rectangle inside `b`, via per-row histograms and a monotone stack.
// Every maximal rectangle is produced when its limiting column is popped.
Rect largest_rectangle(const BinaryGrid& mask, const Bounds& b) {
  const int n = b.x1 - b.x0 + 1;
  std::vector<int> heights(n, 0);
  std::vector<int> stack;
  stack.reserve(n + 1);
  Rect best{};
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int i = 0; i < n; ++i) heights[i] = mask(b.x0 + i, y) ? heights[i] + 1 : 0;
    stack.clear();
    for (int i = 0; i <= n; ++i) {
      const int h = i < n ? heights[i] : 0;
      while (!stack.empty() && heights[stack.back()] >= h) {
        const int top = stack.back();
        stack.pop_back();
        const int hb = heights[top];
        if (hb == 0) continue;
        const int left = stack.empty() ? 0 : stack.back() + 1;
        const Rect r{b.x0 + left, y - hb + 1, i - left, hb};
        if (best.area() == 0 || better(r, best)) best = r;
      }
      stack.push_back(i);
    }
  }
  return best;
}

}  // namespace

std::int64_t l2_error(const BinaryGrid& printed, const BinaryGrid& target, double pitch_nm) {
  require_same_shape(printed, target, "l2_error");
  return scaled_area(xor_count(printed, target), pitch_nm);
}

std::int64_t pvband(const BinaryGrid& inner, const BinaryGrid& outer, double pitch_nm) {
  require_same_shape(inner, outer, "pvband");
  return scaled_area(xor_count(inner, outer), pitch_nm);
}

ShotList fracture(const BinaryGrid& mask) {
  require_binary(mask);
  BinaryGrid work = mask;
  ShotList shots;
  Bounds b = lit_bounds(work);
  while (b.x0 <= b.x1) {
    const Rect r = largest_rectangle(work, b);
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) work(x, y) = 0;
    }
    shots.push_back(r);
    b = lit_bounds(work);
  }
  return shots;
}

std::int64_t shot_count(const BinaryGrid& mask) { return static_cast<std::int64_t>(fracture(mask).size()); }

BinaryGrid paint(const ShotList& shots, int width, int height) {
  BinaryGrid out(width, height);
  for (const auto& r : shots) {
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) {
        if (out.contains(x, y)) out(x, y) = 1;
      }
    }
  }
  return out;
}

}  // namespace lsilt
