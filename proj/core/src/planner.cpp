#include "infsamp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "infsamp/error.hpp"

namespace infsamp {

namespace {

void check_lengths(std::span<const std::int64_t> lengths) {
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) {
      throw DataError("length of sample " + std::to_string(i) + " must be >= 1");
    }
  }
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw CapacityError("scaled load overflows 64-bit range");
  return out;
}

// ceil(q), except that values within rounding noise of an integer snap to
// it, so l / K == 3.0000000000000004 still scales to 3.
std::int64_t scaled_ceil(double q) {
  constexpr double kLimit = 0x1.0p62;
  if (!(q < kLimit)) throw CapacityError("scaled length exceeds 2^62; epsilon is too small");
  const double nearest = std::nearbyint(q);
  if (std::abs(q - nearest) <= 1e-9 * std::max(1.0, std::abs(q))) {
    return static_cast<std::int64_t>(nearest);
  }
  return static_cast<std::int64_t>(std::ceil(q));
}

std::vector<int> ids_by_descending(std::span<const std::int64_t> keys) {
  std::vector<int> ids(keys.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return keys[static_cast<std::size_t>(a)] > keys[static_cast<std::size_t>(b)];
  });
  return ids;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::vector<int>> GroupPlan::members() const {
  std::vector<std::vector<int>> out(group_loads.size());
  for (std::size_t id = 0; id < mask.size(); ++id) {
    auto& group = out.at(static_cast<std::size_t>(mask[id].group - 1));
    const auto pos = static_cast<std::size_t>(mask[id].position);
    if (group.size() <= pos) group.resize(pos + 1, -1);
    group[pos] = static_cast<int>(id);
  }
  return out;
}

std::vector<int> GroupPlan::execution_order() const {
  std::vector<int> order;
  order.reserve(mask.size());
  for (const auto& group : members()) order.insert(order.end(), group.begin(), group.end());
  return order;
}

std::int64_t GroupPlan::max_scaled_length() const {
  if (scaled_lengths.empty()) return 0;
  return *std::max_element(scaled_lengths.begin(), scaled_lengths.end());
}

GroupPlan fptas_plan(std::span<const std::int64_t> pred_lengths, int n_groups, double epsilon) {
  if (n_groups < 1) throw ConfigError("number of groups must be >= 1");
  if (!(epsilon > 0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be > 0");
  if (pred_lengths.empty()) throw DataError("cannot plan an empty sample set");
  check_lengths(pred_lengths);

  std::int64_t total = 0;
  for (auto l : pred_lengths) total = checked_add(total, l);

  GroupPlan plan;
  plan.scale_k = epsilon * static_cast<double>(total) / static_cast<double>(n_groups);
  plan.scaled_lengths.reserve(pred_lengths.size());
  std::int64_t scaled_total = 0;
  for (auto l : pred_lengths) {
    const auto scaled = scaled_ceil(static_cast<double>(l) / plan.scale_k);
    plan.scaled_lengths.push_back(scaled);
    scaled_total = checked_add(scaled_total, scaled);
  }
  plan.capacity = scaled_total / n_groups + (scaled_total % n_groups != 0 ? 1 : 0);

  plan.mask.assign(pred_lengths.size(), GroupSlot{});
  plan.group_loads.assign(static_cast<std::size_t>(n_groups), 0);
  std::vector<int> group_sizes(static_cast<std::size_t>(n_groups), 0);

  for (int id : ids_by_descending(plan.scaled_lengths)) {
    const auto item = plan.scaled_lengths[static_cast<std::size_t>(id)];
    std::size_t target = plan.group_loads.size();
    for (std::size_t n = 0; n < plan.group_loads.size(); ++n) {
      if (plan.group_loads[n] + item <= plan.capacity) {
        target = n;
        break;
      }
    }
    if (target == plan.group_loads.size()) {
      // No group has room: least-loaded group, lowest index on ties.
      target = static_cast<std::size_t>(
          std::min_element(plan.group_loads.begin(), plan.group_loads.end()) -
          plan.group_loads.begin());
      plan.overflow_ids.push_back(id);
    }
    plan.mask[static_cast<std::size_t>(id)] = GroupSlot{static_cast<int>(target) + 1, group_sizes[target]};
    ++group_sizes[target];
    plan.group_loads[target] = checked_add(plan.group_loads[target], item);
  }
  return plan;
}

void write_plan(const GroupPlan& plan, std::ostream& out) {
  std::ostringstream k;
  k.precision(17);
  k << plan.scale_k;
  out << "# K=" << k.str() << " capacity=" << plan.capacity << " overflow=";
  for (std::size_t i = 0; i < plan.overflow_ids.size(); ++i) {
    if (i > 0) out << ';';
    out << plan.overflow_ids[i];
  }
  out << '\n' << "id,group,position,scaled_len\n";
  for (std::size_t id = 0; id < plan.mask.size(); ++id) {
    out << id << ',' << plan.mask[id].group << ',' << plan.mask[id].position << ','
        << plan.scaled_lengths[id] << '\n';
  }
}

// ---------------------------------------------------------------------------

SlotQueueState::SlotQueueState(std::size_t n_samples, int n_slots)
    : pos_(static_cast<std::size_t>(std::max(n_slots, 0)), 0),
      started_(n_samples, 0),
      finished_(n_samples, 0),
      record_(n_samples) {
  if (n_slots < 1) throw ConfigError("slot count must be >= 1");
}

void SlotQueueState::mark_started(int id, int slot) {
  const auto i = static_cast<std::size_t>(id);
  if (i >= started_.size()) throw DataError("sample id " + std::to_string(id) + " out of range");
  if (slot < 0 || slot >= slot_count()) throw ConfigError("slot " + std::to_string(slot) + " out of range");
  if (started_[i]) throw IntegrityError("sample " + std::to_string(id) + " started twice");
  auto& p = pos_[static_cast<std::size_t>(slot)];
  record_[i] = SlotAssignment{slot, p};
  ++p;
  started_[i] = 1;
  ++started_count_;
}

void SlotQueueState::mark_finished(int id) {
  const auto i = static_cast<std::size_t>(id);
  if (i >= finished_.size()) throw DataError("sample id " + std::to_string(id) + " out of range");
  if (!started_[i]) throw IntegrityError("sample " + std::to_string(id) + " finished before it started");
  if (finished_[i]) return;
  finished_[i] = 1;
  ++finished_count_;
}

std::optional<int> sjf_refill(SlotQueueState& state, int slot,
                              std::span<const std::int64_t> pred_lengths) {
  if (pred_lengths.size() < state.sample_count()) {
    throw DataError("prediction vector shorter than sample set");
  }
  std::optional<int> best;
  for (std::size_t i = 0; i < state.sample_count(); ++i) {
    const int id = static_cast<int>(i);
    if (state.is_finished(id) || state.is_started(id)) continue;
    if (!best || pred_lengths[i] < pred_lengths[static_cast<std::size_t>(*best)]) best = id;
  }
  if (best) state.mark_started(*best, slot);
  return best;
}

// ---------------------------------------------------------------------------

SlotSchedule lpt_plan(std::span<const std::int64_t> lengths, int n_slots) {
  if (n_slots < 1) throw ConfigError("slot count must be >= 1");
  check_lengths(lengths);
  SlotSchedule out;
  out.queues.resize(static_cast<std::size_t>(n_slots));
  out.loads.assign(static_cast<std::size_t>(n_slots), 0);
  for (int id : ids_by_descending(lengths)) {
    const auto slot = static_cast<std::size_t>(
        std::min_element(out.loads.begin(), out.loads.end()) - out.loads.begin());
    out.queues[slot].push_back(id);
    out.loads[slot] += lengths[static_cast<std::size_t>(id)];
  }
  out.makespan = *std::max_element(out.loads.begin(), out.loads.end());
  return out;
}

namespace {

class MakespanSearch {
public:
  MakespanSearch(std::span<const std::int64_t> lengths, int n_slots, SlotSchedule incumbent)
      : lengths_(lengths),
        order_(ids_by_descending(lengths)),
        loads_(static_cast<std::size_t>(n_slots), 0),
        assignment_(lengths.size(), -1),
        best_(std::move(incumbent)) {
    suffix_.assign(order_.size() + 1, 0);
    for (std::size_t k = order_.size(); k-- > 0;) {
      suffix_[k] = suffix_[k + 1] + lengths_[static_cast<std::size_t>(order_[k])];
    }
    const auto n = static_cast<std::int64_t>(n_slots);
    lower_bound_ = std::max(lengths_.empty() ? 0 : lengths_[static_cast<std::size_t>(order_.front())],
                            (suffix_[0] + n - 1) / n);
  }

  SlotSchedule run() {
    if (best_.makespan > lower_bound_) descend(0, 0);
    return best_;
  }

private:
  void descend(std::size_t k, std::int64_t current_max) {
    if (best_.makespan == lower_bound_) return;
    if (k == order_.size()) {
      record(current_max);
      return;
    }
    const auto n = static_cast<std::int64_t>(loads_.size());
    const std::int64_t placed = suffix_[0] - suffix_[k];
    const std::int64_t bound = std::max(current_max, (placed + suffix_[k] + n - 1) / n);
    if (bound >= best_.makespan) return;

    const int job = order_[k];
    const auto len = lengths_[static_cast<std::size_t>(job)];
    for (std::size_t m = 0; m < loads_.size(); ++m) {
      // Slots with equal load are interchangeable; try only the first.
      bool seen = false;
      for (std::size_t p = 0; p < m && !seen; ++p) seen = loads_[p] == loads_[m];
      if (seen) continue;
      if (loads_[m] + len >= best_.makespan) continue;

      loads_[m] += len;
      assignment_[static_cast<std::size_t>(job)] = static_cast<int>(m);
      descend(k + 1, std::max(current_max, loads_[m]));
      loads_[m] -= len;
      if (best_.makespan == lower_bound_) return;
    }
  }

  void record(std::int64_t makespan) {
    if (makespan >= best_.makespan) return;
    SlotSchedule s;
    s.queues.resize(loads_.size());
    s.loads.assign(loads_.size(), 0);
    for (int job : order_) {
      const auto m = static_cast<std::size_t>(assignment_[static_cast<std::size_t>(job)]);
      s.queues[m].push_back(job);
      s.loads[m] += lengths_[static_cast<std::size_t>(job)];
    }
    s.makespan = makespan;
    best_ = std::move(s);
  }

  std::span<const std::int64_t> lengths_;
  std::vector<int> order_;
  std::vector<std::int64_t> suffix_;
  std::vector<std::int64_t> loads_;
  std::vector<int> assignment_;
  SlotSchedule best_;
  std::int64_t lower_bound_ = 0;
};

}  // namespace

SlotSchedule optimal_schedule(std::span<const std::int64_t> lengths, int n_slots, std::size_t max_jobs) {
  if (n_slots < 1) throw ConfigError("slot count must be >= 1");
  if (lengths.size() > max_jobs) {
    throw CapacityError("exact makespan search limited to " + std::to_string(max_jobs) + " jobs (got " +
                        std::to_string(lengths.size()) + "); use lpt_plan for larger instances");
  }
  auto incumbent = lpt_plan(lengths, n_slots);
  if (lengths.empty()) return incumbent;
  return MakespanSearch(lengths, n_slots, std::move(incumbent)).run();
}

std::int64_t optimal_makespan(std::span<const std::int64_t> lengths, int n_slots, std::size_t max_jobs) {
  return optimal_schedule(lengths, n_slots, max_jobs).makespan;
}

}  // namespace infsamp
