#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace infsamp {

/// Where a sample sits in a grouping plan. `group` is 1-based.
struct GroupSlot {
  int group = 0;
  int position = 0;

  friend bool operator==(const GroupSlot&, const GroupSlot&) = default;
};

/// Output of the scaled first-fit-decreasing micro-group assignment.
///
/// Sample ids are indices into the length vector the plan was built from.
/// `group_loads` and `scaled_lengths` are in scaled units (ceil(l / K)).
/// Items that fit no group under `capacity` are placed on the least-loaded
/// group and listed in `overflow_ids`.
struct GroupPlan {
  std::vector<GroupSlot> mask;
  std::vector<std::int64_t> group_loads;
  std::vector<std::int64_t> scaled_lengths;
  double scale_k = 0.0;
  std::int64_t capacity = 0;
  std::vector<int> overflow_ids;

  int group_count() const { return static_cast<int>(group_loads.size()); }
  /// members()[n] lists the ids of group n + 1 in position order.
  std::vector<std::vector<int>> members() const;
  /// All ids ordered by (group, position).
  std::vector<int> execution_order() const;
  std::int64_t max_scaled_length() const;
};

GroupPlan fptas_plan(std::span<const std::int64_t> pred_lengths, int n_groups, double epsilon);

/// CSV `id,group,position,scaled_len` preceded by `# K=<real> capacity=<int> overflow=<ids>`.
void write_plan(const GroupPlan& plan, std::ostream& out);

// ---------------------------------------------------------------------------

struct SlotAssignment {
  int slot = 0;
  std::int64_t position = 0;

  friend bool operator==(const SlotAssignment&, const SlotAssignment&) = default;
};

/// Book-keeping for slot-level refill. `record[id]` is the (slot, position)
/// each started sample was given; `pos[s]` counts samples ever assigned to s.
class SlotQueueState {
public:
  SlotQueueState(std::size_t n_samples, int n_slots);

  void mark_started(int id, int slot);
  void mark_finished(int id);

  bool is_started(int id) const { return started_.at(static_cast<std::size_t>(id)) != 0; }
  bool is_finished(int id) const { return finished_.at(static_cast<std::size_t>(id)) != 0; }
  std::size_t sample_count() const { return started_.size(); }
  std::size_t started_count() const { return started_count_; }
  std::size_t finished_count() const { return finished_count_; }
  int slot_count() const { return static_cast<int>(pos_.size()); }
  std::int64_t pos(int slot) const { return pos_.at(static_cast<std::size_t>(slot)); }
  const std::optional<SlotAssignment>& record(int id) const {
    return record_.at(static_cast<std::size_t>(id));
  }

private:
  std::vector<std::int64_t> pos_;
  std::vector<std::uint8_t> started_;
  std::vector<std::uint8_t> finished_;
  std::vector<std::optional<SlotAssignment>> record_;
  std::size_t started_count_ = 0;
  std::size_t finished_count_ = 0;
};

/// Shortest-predicted-first pick among samples neither started nor finished;
/// ties go to the lower id. Returns nullopt when nothing is left to start.
std::optional<int> sjf_refill(SlotQueueState& state, int slot,
                              std::span<const std::int64_t> pred_lengths);

// ---------------------------------------------------------------------------

/// Per-slot job queues (sample ids, execution order) and their loads.
struct SlotSchedule {
  std::vector<std::vector<int>> queues;
  std::vector<std::int64_t> loads;
  std::int64_t makespan = 0;
};

SlotSchedule lpt_plan(std::span<const std::int64_t> lengths, int n_slots);

inline constexpr std::size_t kDefaultExactJobLimit = 16;

/// Exact minimum-makespan schedule by branch and bound. Throws CapacityError
/// when lengths.size() exceeds `max_jobs`.
SlotSchedule optimal_schedule(std::span<const std::int64_t> lengths, int n_slots,
                              std::size_t max_jobs = kDefaultExactJobLimit);

std::int64_t optimal_makespan(std::span<const std::int64_t> lengths, int n_slots,
                              std::size_t max_jobs = kDefaultExactJobLimit);

}  // namespace infsamp
