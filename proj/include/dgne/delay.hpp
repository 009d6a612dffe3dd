#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dgne/topology.hpp"

namespace dgne {

/// Source of feedback delays. Either delay-given (tau per agent and round) or
/// set-given (the timestamp set delivered to an agent at each round).
class DelaySchedule {
 public:
  enum class Kind { delay_given, set_given };

  virtual ~DelaySchedule() = default;
  virtual Kind kind() const = 0;
  virtual std::string describe() const = 0;

  /// tau(a, s) >= 1: the cost and constraint of round s land during (s + tau - 1, s + tau].
  virtual int delay(AgentId a, int s) const;
  /// Timestamps delivered to `a` during (t, t + 1].
  virtual std::vector<int> timestamps(AgentId a, int t) const;
};

/// tau = max(t0, 1); t0 = 0 is the delay-free case.
std::shared_ptr<const DelaySchedule> constant_delay_schedule(int t0);
/// Batches {t - t1, ..., t - 1} delivered at t = 1 (mod t1), t != 1.
std::shared_ptr<const DelaySchedule> type1_schedule(int t1);
/// Batches of t2*k timestamps delivered at t = t2 * k(k+1)/2 + 1.
std::shared_ptr<const DelaySchedule> type2_schedule(int t2);
/// Per-agent warm-up of 10*(2i + j) silent rounds, then catch-up, then delay-free.
std::shared_ptr<const DelaySchedule> type3_schedule();
/// Arbitrary delay process (e.g. for tests or programmatic experiments).
std::shared_ptr<const DelaySchedule> function_delay_schedule(std::function<int(AgentId, int)> tau,
                                                             std::string description);

/// Precomputed timestamp sets S_{a,t} for every agent and round of the horizon.
class FeedbackCalendar {
 public:
  /// sets[a][t - 1] holds S_{a,t}. Validates containment in [1, t] and disjointness.
  FeedbackCalendar(int horizon, std::vector<std::vector<std::vector<int>>> sets);

  int horizon() const { return horizon_; }
  int agent_count() const { return static_cast<int>(offsets_.size()); }

  std::span<const int> timestamps(int agent, int t) const;
  /// Round t with s in S_{a,t}, or 0 when round s is never delivered.
  int arrival(int agent, int s) const { return arrival_.at(agent).at(s - 1); }
  /// Delay recovered from the calendar: arrival + 1 - s.
  int recovered_delay(int agent, int s) const;
  bool has_feedback(int agent) const;

 private:
  int horizon_;
  std::vector<std::vector<int>> offsets_;     // per agent, size horizon + 1
  std::vector<std::vector<int>> timestamps_;  // per agent, flattened
  std::vector<std::vector<int>> arrival_;     // per agent, size horizon
};

/// Builds the calendar without checking that every agent receives feedback.
FeedbackCalendar make_calendar(const DelaySchedule& schedule, const ClusterLayout& layout,
                               int horizon);

/// make_calendar plus the feedback check: throws AssumptionViolation when some
/// agent never receives any feedback within the horizon.
FeedbackCalendar build_calendar(const DelaySchedule& schedule, const ClusterLayout& layout,
                                int horizon);

struct CalendarStats {
  int max_batch = 0;                // c: max |S_{a,t}|
  std::vector<int> miss_max;        // per agent: max_t |U_{a,t}|
  std::vector<long long> delay_sum; // per agent: sum of delays of delivered rounds
  std::vector<int> delivered;       // per agent: |union of S_{a,t}|
  std::vector<int> undelivered;     // per agent: |U_{a,T}|
};

CalendarStats calendar_stats(const FeedbackCalendar& calendar);

}  // namespace dgne
