#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"

#include "dgne/delay.hpp"
#include "dgne/errors.hpp"

using namespace dgne;

namespace {

const ClusterLayout kLayout({3, 3, 1});

std::vector<int> to_vec(std::span<const int> s) { return {s.begin(), s.end()}; }

std::vector<int> range(int lo, int hi) {
  std::vector<int> v(hi - lo + 1);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

// Containment, disjointness and conservation for every agent.
void check_calendar_structure(const FeedbackCalendar& cal) {
  const CalendarStats stats = calendar_stats(cal);
  for (int a = 0; a < cal.agent_count(); ++a) {
    std::vector<char> seen(cal.horizon() + 1, 0);
    int delivered = 0;
    for (int t = 1; t <= cal.horizon(); ++t) {
      for (int s : cal.timestamps(a, t)) {
        REQUIRE(s >= 1);
        REQUIRE(s <= t);
        REQUIRE(seen[s] == 0);
        seen[s] = 1;
        ++delivered;
        CHECK(cal.arrival(a, s) == t);
      }
    }
    const int undelivered = static_cast<int>(std::count(seen.begin() + 1, seen.end(), 0));
    CHECK(delivered + undelivered == cal.horizon());
    CHECK(stats.delivered[a] == delivered);
    CHECK(stats.undelivered[a] == undelivered);
  }
}

}  // namespace

TEST_CASE("constant delays") {
  SUBCASE("t0 = 0 is delay-free") {
    const auto cal = make_calendar(*constant_delay_schedule(0), kLayout, 50);
    for (int a = 0; a < 7; ++a)
      for (int t = 1; t <= 50; ++t) CHECK(to_vec(cal.timestamps(a, t)) == std::vector<int>{t});
  }
  SUBCASE("t0 = 10") {
    const auto cal = make_calendar(*constant_delay_schedule(10), kLayout, 100);
    for (int t = 1; t <= 9; ++t) CHECK(cal.timestamps(0, t).empty());
    for (int s = 1; s <= 91; ++s) CHECK(to_vec(cal.timestamps(3, s + 9)) == std::vector<int>{s});
    CHECK(cal.arrival(0, 92) == 0);
  }
  SUBCASE("negative t0 rejected") { CHECK_THROWS_AS(constant_delay_schedule(-1), ConfigError); }
}

TEST_CASE("type 1 batches") {
  const auto cal = make_calendar(*type1_schedule(30), kLayout, 100);
  CHECK(to_vec(cal.timestamps(0, 31)) == range(1, 30));
  CHECK(cal.timestamps(0, 30).empty());
  CHECK(cal.timestamps(0, 1).empty());
  CHECK(to_vec(cal.timestamps(6, 91)) == range(61, 90));
  for (int s = 91; s <= 100; ++s) CHECK(cal.arrival(2, s) == 0);
  CHECK(calendar_stats(cal).max_batch == 30);

  const auto cal200 = make_calendar(*type1_schedule(30), kLayout, 200);
  check_calendar_structure(cal200);
  CHECK_THROWS_AS(type1_schedule(0), ConfigError);
}

TEST_CASE("type 2 batches") {
  const auto cal = make_calendar(*type2_schedule(30), kLayout, 200);
  CHECK(to_vec(cal.timestamps(0, 31)) == range(1, 30));
  CHECK(to_vec(cal.timestamps(0, 91)) == range(31, 90));
  CHECK(to_vec(cal.timestamps(0, 181)) == range(91, 180));
  CHECK(cal.timestamps(0, 90).empty());
  check_calendar_structure(cal);

  // Delay sums grow faster than linearly: about T^1.5 with these batch sizes.
  double prev_ratio = 0.0;
  for (int T : {2000, 8000, 32000}) {
    const auto stats = calendar_stats(make_calendar(*type2_schedule(30), ClusterLayout({1}), T));
    const double ratio = static_cast<double>(stats.delay_sum[0]) / T;
    CHECK(ratio > prev_ratio);
    prev_ratio = ratio;
  }
}

TEST_CASE("type 3 warm-up") {
  const auto cal = make_calendar(*type3_schedule(), kLayout, 300);
  CHECK(cal.timestamps(0, 30).empty());
  CHECK(to_vec(cal.timestamps(0, 31)) == std::vector<int>{1, 31});
  CHECK(to_vec(cal.timestamps(0, 60)) == std::vector<int>{30, 60});
  CHECK(to_vec(cal.timestamps(0, 61)) == std::vector<int>{61});
  // Agent (3, 1): t4 = 7.
  CHECK(cal.timestamps(6, 70).empty());
  CHECK(to_vec(cal.timestamps(6, 71)) == std::vector<int>{1, 71});
  check_calendar_structure(cal);
}

TEST_CASE("calendar structure holds exhaustively for every schedule") {
  const std::vector<std::shared_ptr<const DelaySchedule>> schedules{
      constant_delay_schedule(0),  constant_delay_schedule(1), constant_delay_schedule(17),
      constant_delay_schedule(80), type1_schedule(30),         type1_schedule(7),
      type2_schedule(30),          type2_schedule(3),          type3_schedule()};
  for (const auto& s : schedules) {
    CAPTURE(s->describe());
    check_calendar_structure(make_calendar(*s, kLayout, 1000));
  }
}

TEST_CASE("delay recovery for delay-given schedules") {
  std::mt19937 rng(4);
  std::vector<int> table(7 * 400);
  std::uniform_int_distribution<int> d(1, 25);
  for (int& v : table) v = d(rng);
  const auto sched = function_delay_schedule(
      [&](AgentId a, int s) { return table[kLayout.flat(a) * 400 + (s - 1)]; }, "random");
  const auto cal = make_calendar(*sched, kLayout, 400);
  check_calendar_structure(cal);
  for (int a = 0; a < 7; ++a)
    for (int s = 1; s <= 400; ++s)
      if (cal.arrival(a, s) != 0) CHECK(cal.recovered_delay(a, s) == table[a * 400 + (s - 1)]);
}

TEST_CASE("calendar statistics") {
  SUBCASE("delay-free") {
    const auto stats = calendar_stats(make_calendar(*constant_delay_schedule(0), kLayout, 500));
    CHECK(stats.max_batch == 1);
    for (int a = 0; a < 7; ++a) {
      CHECK(stats.miss_max[a] == 0);
      CHECK(stats.delay_sum[a] == 500);
    }
  }
  SUBCASE("constant t0") {
    const int T = 500;
    for (int t0 : {2, 10, 80}) {
      const auto stats = calendar_stats(make_calendar(*constant_delay_schedule(t0), kLayout, T));
      for (int a = 0; a < 7; ++a) {
        CHECK(stats.miss_max[a] == t0 - 1);
        CHECK(stats.delay_sum[a] == static_cast<long long>(t0) * (T - t0 + 1));
      }
    }
  }
}

TEST_CASE("calendar validation") {
  CHECK_THROWS_AS(build_calendar(*constant_delay_schedule(105), kLayout, 100), AssumptionViolation);
  CHECK_NOTHROW(make_calendar(*constant_delay_schedule(105), kLayout, 100));
  CHECK_THROWS_AS(
      make_calendar(*function_delay_schedule([](AgentId, int) { return 0; }, "zero"), kLayout, 10),
      ConfigError);

  using Sets = std::vector<std::vector<std::vector<int>>>;
  CHECK_THROWS_AS(FeedbackCalendar(2, Sets{{{1}, {1}}}), CalendarError);  // repeated timestamp
  CHECK_THROWS_AS(FeedbackCalendar(2, Sets{{{2}, {}}}), CalendarError);   // from the future
  CHECK_THROWS_AS(FeedbackCalendar(2, Sets{{{0}, {}}}), CalendarError);
  CHECK_THROWS_AS(FeedbackCalendar(2, Sets{{{1}}}), CalendarError);  // wrong length
  const FeedbackCalendar ok(2, Sets{{{}, {2, 1}}});
  CHECK(to_vec(ok.timestamps(0, 2)) == std::vector<int>{1, 2});
  CHECK_THROWS_AS(ok.timestamps(0, 3), ContractViolation);
  CHECK_THROWS_AS(ok.recovered_delay(0, 5), std::out_of_range);
}
