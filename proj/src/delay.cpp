#include "dgne/delay.hpp"

#include <algorithm>
#include <string>

#include "dgne/errors.hpp"

namespace dgne {

int DelaySchedule::delay(AgentId, int) const {
  throw ContractViolation(describe() + " is set-given and has no per-round delay");
}

std::vector<int> DelaySchedule::timestamps(AgentId, int) const {
  throw ContractViolation(describe() + " is delay-given; build a calendar to get timestamps");
}

namespace {

class FunctionDelay final : public DelaySchedule {
 public:
  FunctionDelay(std::function<int(AgentId, int)> tau, std::string description)
      : tau_(std::move(tau)), description_(std::move(description)) {}

  Kind kind() const override { return Kind::delay_given; }
  std::string describe() const override { return description_; }
  int delay(AgentId a, int s) const override { return tau_(a, s); }

 private:
  std::function<int(AgentId, int)> tau_;
  std::string description_;
};

class Type1 final : public DelaySchedule {
 public:
  explicit Type1(int t1) : t1_(t1) {}
  Kind kind() const override { return Kind::set_given; }
  std::string describe() const override { return "type1(t1=" + std::to_string(t1_) + ")"; }

  std::vector<int> timestamps(AgentId, int t) const override {
    if (t == 1 || t % t1_ != 1 % t1_) return {};
    std::vector<int> out;
    for (int s = t - t1_; s < t; ++s) out.push_back(s);
    return out;
  }

 private:
  int t1_;
};

class Type2 final : public DelaySchedule {
 public:
  explicit Type2(int t2) : t2_(t2) {}
  Kind kind() const override { return Kind::set_given; }
  std::string describe() const override { return "type2(t2=" + std::to_string(t2_) + ")"; }

  std::vector<int> timestamps(AgentId, int t) const override {
    // t = t2 * k(k+1)/2 + 1 for some k >= 1; batch length t2 * k.
    for (long long k = 1;; ++k) {
      const long long at = static_cast<long long>(t2_) * k * (k + 1) / 2 + 1;
      if (at > t) return {};
      if (at == t) {
        std::vector<int> out;
        for (long long s = t - t2_ * k; s < t; ++s) out.push_back(static_cast<int>(s));
        return out;
      }
    }
  }

 private:
  int t2_;
};

class Type3 final : public DelaySchedule {
 public:
  Kind kind() const override { return Kind::set_given; }
  std::string describe() const override { return "type3"; }

  std::vector<int> timestamps(AgentId a, int t) const override {
    const int t4 = 2 * (a.cluster + 1) + (a.index + 1);
    if (t <= 10 * t4) return {};
    if (t <= 20 * t4) return {t - 10 * t4, t};
    return {t};
  }
};

}  // namespace

std::shared_ptr<const DelaySchedule> constant_delay_schedule(int t0) {
  if (t0 < 0) throw ConfigError("constant delay t0 must be >= 0");
  const int tau = std::max(t0, 1);
  return std::make_shared<FunctionDelay>([tau](AgentId, int) { return tau; },
                                         "constant(t0=" + std::to_string(t0) + ")");
}

std::shared_ptr<const DelaySchedule> type1_schedule(int t1) {
  if (t1 < 1) throw ConfigError("type-1 period t1 must be >= 1");
  return std::make_shared<Type1>(t1);
}

std::shared_ptr<const DelaySchedule> type2_schedule(int t2) {
  if (t2 < 1) throw ConfigError("type-2 base t2 must be >= 1");
  return std::make_shared<Type2>(t2);
}

std::shared_ptr<const DelaySchedule> type3_schedule() { return std::make_shared<Type3>(); }

std::shared_ptr<const DelaySchedule> function_delay_schedule(std::function<int(AgentId, int)> tau,
                                                             std::string description) {
  return std::make_shared<FunctionDelay>(std::move(tau), std::move(description));
}

// ---------------------------------------------------------------------------
// Calendar

FeedbackCalendar::FeedbackCalendar(int horizon, std::vector<std::vector<std::vector<int>>> sets)
    : horizon_(horizon) {
  if (horizon < 1) throw ConfigError("calendar horizon must be >= 1");
  const int agents = static_cast<int>(sets.size());
  offsets_.resize(agents);
  timestamps_.resize(agents);
  arrival_.assign(agents, std::vector<int>(horizon, 0));

  for (int a = 0; a < agents; ++a) {
    if (static_cast<int>(sets[a].size()) != horizon)
      throw CalendarError("agent " + std::to_string(a) + " calendar has " +
                          std::to_string(sets[a].size()) + " rounds, expected " +
                          std::to_string(horizon));
    auto& offs = offsets_[a];
    auto& flat = timestamps_[a];
    offs.reserve(horizon + 1);
    offs.push_back(0);
    for (int t = 1; t <= horizon; ++t) {
      auto& batch = sets[a][t - 1];
      std::sort(batch.begin(), batch.end());
      for (int s : batch) {
        if (s < 1 || s > t)
          throw CalendarError("agent " + std::to_string(a) + ": timestamp " + std::to_string(s) +
                              " delivered at round " + std::to_string(t) + " is outside [1, t]");
        if (arrival_[a][s - 1] != 0)
          throw CalendarError("agent " + std::to_string(a) + ": timestamp " + std::to_string(s) +
                              " delivered twice (rounds " + std::to_string(arrival_[a][s - 1]) +
                              " and " + std::to_string(t) + ")");
        arrival_[a][s - 1] = t;
        flat.push_back(s);
      }
      offs.push_back(static_cast<int>(flat.size()));
    }
  }
}

std::span<const int> FeedbackCalendar::timestamps(int agent, int t) const {
  if (t < 1 || t > horizon_)
    throw ContractViolation("calendar round " + std::to_string(t) + " outside horizon");
  const auto& offs = offsets_.at(agent);
  const auto& flat = timestamps_[agent];
  return {flat.data() + offs[t - 1], flat.data() + offs[t]};
}

int FeedbackCalendar::recovered_delay(int agent, int s) const {
  const int t = arrival(agent, s);
  if (t == 0) throw ContractViolation("round " + std::to_string(s) + " is never delivered");
  return t + 1 - s;
}

bool FeedbackCalendar::has_feedback(int agent) const { return !timestamps_.at(agent).empty(); }

FeedbackCalendar make_calendar(const DelaySchedule& schedule, const ClusterLayout& layout,
                               int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  const int n = layout.agent_count();
  std::vector<std::vector<std::vector<int>>> sets(n, std::vector<std::vector<int>>(horizon));

  for (int a = 0; a < n; ++a) {
    const AgentId id = layout.agent(a);
    if (schedule.kind() == DelaySchedule::Kind::delay_given) {
      for (int s = 1; s <= horizon; ++s) {
        const int tau = schedule.delay(id, s);
        if (tau < 1)
          throw ConfigError(schedule.describe() + " gave delay " + std::to_string(tau) +
                            " at round " + std::to_string(s) + "; delays must be >= 1");
        // Lands in (t, t + 1] with t = s + tau - 1; later than T + 1 is dropped.
        const long long t = static_cast<long long>(s) + tau - 1;
        if (t <= horizon) sets[a][t - 1].push_back(s);
      }
    } else {
      for (int t = 1; t <= horizon; ++t) sets[a][t - 1] = schedule.timestamps(id, t);
    }
  }

  return FeedbackCalendar(horizon, std::move(sets));
}

FeedbackCalendar build_calendar(const DelaySchedule& schedule, const ClusterLayout& layout,
                                int horizon) {
  FeedbackCalendar calendar = make_calendar(schedule, layout, horizon);
  for (int a = 0; a < layout.agent_count(); ++a) {
    if (!calendar.has_feedback(a)) {
      const AgentId id = layout.agent(a);
      throw AssumptionViolation("agent (" + std::to_string(id.cluster + 1) + ", " +
                                std::to_string(id.index + 1) + ") receives no feedback within T = " +
                                std::to_string(horizon) + " under " + schedule.describe());
    }
  }
  return calendar;
}

CalendarStats calendar_stats(const FeedbackCalendar& calendar) {
  const int n = calendar.agent_count();
  const int horizon = calendar.horizon();
  CalendarStats stats;
  stats.miss_max.assign(n, 0);
  stats.delay_sum.assign(n, 0);
  stats.delivered.assign(n, 0);
  stats.undelivered.assign(n, 0);

  for (int a = 0; a < n; ++a) {
    int received = 0;
    for (int t = 1; t <= horizon; ++t) {
      const auto batch = calendar.timestamps(a, t);
      stats.max_batch = std::max(stats.max_batch, static_cast<int>(batch.size()));
      for (int s : batch) stats.delay_sum[a] += t + 1 - s;
      received += static_cast<int>(batch.size());
      // U_{a,t} = [t] minus everything delivered so far.
      stats.miss_max[a] = std::max(stats.miss_max[a], t - received);
    }
    stats.delivered[a] = received;
    stats.undelivered[a] = horizon - received;
  }
  return stats;
}

}  // namespace dgne
