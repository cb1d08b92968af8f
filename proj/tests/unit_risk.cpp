#include <doctest.h>

#include <array>
#include <vector>

#include "pettrace/risk.hpp"
#include "pettrace/rng.hpp"

using namespace pet;
using namespace pet::risk;

TEST_CASE("additive scorer sums in-window seconds") {
  AdditiveScorer s;
  std::vector<ExposureEntry> entries{
      {100, 600, {}},
      {100, 300, {}},
      {99, 120, {}},
      {86, 1000, {}},   // today - day == window: still counted
      {85, 5000, {}},   // one past the window: dropped
      {101, 7777, {}},  // future-dated: dropped
      {0, 9999, {}},    // ancient: dropped
  };
  CHECK(s.score(entries, 100, 14) == doctest::Approx(600 + 300 + 120 + 1000));
  CHECK(s.score({}, 100, 14) == 0.0);
  CHECK(s.name() == "additive");
}

TEST_CASE("window boundaries near day zero") {
  AdditiveScorer s;
  std::vector<ExposureEntry> entries{{0, 100, {}}, {1, 200, {}}};
  // today < window_days: everything from day 0 on is in window, and the
  // unsigned arithmetic must not wrap.
  CHECK(s.score(entries, 3, 14) == doctest::Approx(300));
}

TEST_CASE("metadata is carried but does not affect the additive score") {
  AdditiveScorer s;
  std::vector<ExposureEntry> entries{{10, 500, Bytes{1, 2, 3}}, {10, 500, {}}};
  CHECK(s.score(entries, 10, 14) == doctest::Approx(1000));
}

TEST_CASE("aggregation over per-day partials equals a flat sum") {
  AdditiveScorer s;
  std::array<double, 4> days{100.0, 0.0, 250.5, 49.5};
  CHECK(s.aggregate(days) == doctest::Approx(400.0));
  CHECK(s.aggregate({}) == 0.0);

  // Additivity: splitting a history by day and aggregating gives the same
  // result as scoring it whole.
  std::vector<ExposureEntry> all{{100, 600, {}}, {99, 300, {}}, {99, 60, {}}, {98, 120, {}}};
  double whole = s.score(all, 100, 14);
  std::vector<ExposureEntry> d100{all[0]};
  std::vector<ExposureEntry> d99{all[1], all[2]};
  std::vector<ExposureEntry> d98{all[3]};
  std::array<double, 3> partials{s.score(d100, 100, 14), s.score(d99, 100, 14),
                                 s.score(d98, 100, 14)};
  CHECK(s.aggregate(partials) == doctest::Approx(whole));
}

TEST_CASE("scorer factory") {
  auto s = make_scorer("additive");
  REQUIRE(s != nullptr);
  CHECK(s->name() == "additive");
  CHECK_THROWS_AS(make_scorer("quadratic"), std::invalid_argument);
  CHECK_THROWS_AS(make_scorer(""), std::invalid_argument);
}

TEST_CASE("decision is strictly above threshold") {
  CHECK_FALSE(decide(900.0, 900.0));
  CHECK(decide(900.0 + 1e-9, 900.0));
  CHECK(decide(901.0, 900.0));
  CHECK_FALSE(decide(0.0, 0.0));
  CHECK(decide(1.0, 0.0));
}

TEST_CASE("probabilistic notification passes positives through") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    CHECK(probabilistic_notify(true, 0.0, rng));
  }
}

TEST_CASE("probabilistic notification with p = 0 never flips a negative") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    CHECK_FALSE(probabilistic_notify(false, 0.0, rng));
  }
}

TEST_CASE("probabilistic notification with p = 1 always flips a negative") {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    CHECK(probabilistic_notify(false, 1.0, rng));
  }
}

TEST_CASE("flip rate tracks p") {
  Rng rng(4);
  int flipped = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    if (probabilistic_notify(false, 0.05, rng)) ++flipped;
  }
  double rate = static_cast<double>(flipped) / n;
  // 5 sigma of a Bernoulli(0.05) mean over 20k draws is ~0.0077.
  CHECK(rate > 0.05 - 0.008);
  CHECK(rate < 0.05 + 0.008);
}
