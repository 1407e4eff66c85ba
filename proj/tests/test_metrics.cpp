#include <random>

#include "doctest.h"
#include "lsilt/metrics.hpp"
#include "oracles.hpp"

using namespace lsilt;

namespace {

BinaryGrid square(int n, int x0, int y0, int side) {
  BinaryGrid g(n, n);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) g(x, y) = 1;
  return g;
}

std::int64_t lit(const BinaryGrid& g) {
  std::int64_t n = 0;
  for (auto v : g) n += v;
  return n;
}

void check_exact_cover(const BinaryGrid& mask, const ShotList& shots) {
  std::int64_t area = 0;
  for (const auto& r : shots) {
    REQUIRE(r.w > 0);
    REQUIRE(r.h > 0);
    area += r.area();
  }
  CHECK(paint(shots, mask.width(), mask.height()) == mask);
  CHECK(area == lit(mask));  // with exact coverage this forces disjointness
}

}  // namespace

TEST_CASE("l2 error") {
  std::mt19937_64 rng(31);
  const BinaryGrid a = gen::random_mask(rng, 32, 32);
  CHECK(l2_error(a, a) == 0);
  BinaryGrid b = a;
  for (int i = 0; i < 7; ++i) b(i * 3, i) ^= 1;
  CHECK(l2_error(b, a) == 7);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryGrid x = gen::random_mask(rng, 24, 17), y = gen::random_mask(rng, 24, 17);
    CHECK(l2_error(x, y) == oracle::xor_count(x, y));
    CHECK(l2_error(x, y) == l2_error(y, x));
  }
  CHECK(l2_error(b, a, 2.0) == 28);
  CHECK_THROWS_AS(l2_error(BinaryGrid(3, 3), BinaryGrid(3, 4)), InvalidArgument);
}

TEST_CASE("pvband") {
  CHECK(pvband(square(16, 2, 2, 10), square(16, 2, 2, 10)) == 0);
  CHECK(pvband(square(16, 3, 3, 8), square(16, 2, 2, 10)) == 36);
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryGrid x = gen::random_mask(rng, 20, 20), y = gen::random_mask(rng, 20, 20);
    CHECK(pvband(x, y) == oracle::xor_count(x, y));
  }
  CHECK_THROWS_AS(pvband(BinaryGrid(3, 3), BinaryGrid(4, 3)), InvalidArgument);
}

TEST_CASE("fracture of simple shapes") {
  CHECK(fracture(BinaryGrid(8, 8)).empty());
  CHECK(shot_count(BinaryGrid(8, 8)) == 0);

  const BinaryGrid rect = square(16, 3, 5, 7);
  const ShotList one = fracture(rect);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Rect{3, 5, 7, 7});

  BinaryGrid cross(9, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 3; x < 6; ++x) cross(x, y) = 1;
  for (int y = 3; y < 6; ++y)
    for (int x = 0; x < 9; ++x) cross(x, y) = 1;
  const ShotList shots = fracture(cross);
  CHECK(shots.size() == 3);
  CHECK(shots[0] == Rect{3, 0, 3, 9});  // tie on area goes to the topmost bar
  check_exact_cover(cross, shots);
}

TEST_CASE("fracture ties prefer topmost then leftmost") {
  BinaryGrid g(10, 10);
  g(7, 2) = 1;
  g(1, 2) = 1;
  g(4, 6) = 1;
  const ShotList shots = fracture(g);
  REQUIRE(shots.size() == 3);
  CHECK(shots[0] == Rect{1, 2, 1, 1});
  CHECK(shots[1] == Rect{7, 2, 1, 1});
  CHECK(shots[2] == Rect{4, 6, 1, 1});
}

TEST_CASE("fracture reproduces random masks exactly") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = std::uniform_int_distribution<int>(1, 30)(rng);
    const int h = std::uniform_int_distribution<int>(1, 30)(rng);
    BinaryGrid m(w, h);
    std::bernoulli_distribution on(std::uniform_real_distribution<double>(0.1, 0.9)(rng));
    for (auto& v : m) v = on(rng);
    check_exact_cover(m, fracture(m));
  }
}

TEST_CASE("separated rectangles need at most one shot each") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 60; ++trial) {
    BinaryGrid m(40, 40);
    int placed = 0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const int x = std::uniform_int_distribution<int>(0, 35)(rng);
      const int y = std::uniform_int_distribution<int>(0, 35)(rng);
      const int w = std::uniform_int_distribution<int>(1, 40 - x)(rng);
      const int h = std::uniform_int_distribution<int>(1, 40 - y)(rng);
      bool clear = true;  // keep a one-pixel gap so rectangles never touch
      for (int yy = std::max(0, y - 1); yy < std::min(40, y + h + 1) && clear; ++yy)
        for (int xx = std::max(0, x - 1); xx < std::min(40, x + w + 1) && clear; ++xx) clear = m(xx, yy) == 0;
      if (!clear) continue;
      for (int yy = y; yy < y + h; ++yy)
        for (int xx = x; xx < x + w; ++xx) m(xx, yy) = 1;
      ++placed;
    }
    CHECK(shot_count(m) <= placed);
  }
}
