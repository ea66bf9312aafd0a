#include "crowdfuse/hit_manager.hpp"

#include <algorithm>
#include <tuple>

namespace crowdfuse {

int compute_deficit(int open_tasks, int unfinished_hits, int batch_size) {
  if (batch_size < 1)
    throw Error(Errc::BadArgument, "batch_size must be >= 1");
  if (open_tasks < 0 || unfinished_hits < 0)
    throw Error(Errc::BadArgument, "negative task or HIT count");
  const int needed = (open_tasks + batch_size - 1) / batch_size;
  return std::max(0, needed - unfinished_hits);
}

std::vector<std::string> select_tasks(
    const std::string& worker_id, const std::string& job_id, int k,
    std::span<const TaskState* const> tasks, Rng& rng,
    const std::function<bool(const TaskState&)>& extra_filter) {
  struct Entry {
    std::size_t load;
    std::uint64_t draw;
    const TaskState* task;
  };
  std::vector<Entry> pool;
  for (const TaskState* t : tasks) {
    if (t->status != TaskStatus::Open) continue;
    if (t->job_id != job_id) continue;
    if (t->served_workers.count(worker_id)) continue;
    if (extra_filter && !extra_filter(*t)) continue;
    // One draw per eligible candidate keeps ties random but reproducible.
    pool.push_back({t->results.size(), rng.next_u64(), t});
  }
  if (pool.empty())
    throw Error(Errc::NoEligibleTasks,
                "no open task available for worker " + worker_id);
  std::sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.load, a.draw, a.task->task_id) <
           std::tie(b.load, b.draw, b.task->task_id);
  });
  std::vector<std::string> picked;
  for (const auto& e : pool) {
    if (static_cast<int>(picked.size()) >= k) break;
    picked.push_back(e.task->task_id);
  }
  return picked;
}

void update_price(PricingState& state, double approved_duration) {
  if (approved_duration <= 0)
    throw Error(Errc::BadArgument, "approved duration must be > 0");
  state.approved_durations.push_back(approved_duration);
  std::vector<double> sorted = state.approved_durations;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median =
      n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  state.current_price = state.target_hourly_rate * median / 3600.0;
}

Settlement settle_hit(HitRecord& hit, const std::vector<bool>& per_task_accept,
                      double payment_threshold, WorkerProfile& profile) {
  if (hit.status != HitStatus::Submitted)
    throw Error(Errc::NotSubmitted,
                "HIT " + hit.hit_id + " is not awaiting settlement");
  if (per_task_accept.empty()) return Settlement::Deferred;

  int accepted = 0;
  auto& [approved, rejected] = profile.tallies[hit.job_id];
  for (bool ok : per_task_accept) {
    if (ok) {
      ++accepted;
      ++approved;
    } else {
      ++rejected;
    }
  }
  const double fraction =
      static_cast<double>(accepted) / static_cast<double>(per_task_accept.size());
  hit.status = fraction > payment_threshold ? HitStatus::Paid : HitStatus::Rejected;
  return hit.status == HitStatus::Paid ? Settlement::Paid : Settlement::Rejected;
}

bool admit_worker(const WorkerProfile* profile, const std::string& job_id,
                  const AdmissionPolicy& policy, double draw) {
  std::optional<double> rate;
  if (profile) rate = profile->approval_rate(job_id);
  if (rate && *rate < policy.min_approval_rate) return false;
  const double cut = 1.0 - policy.exploration_share;
  // Assignments are split per draw: the main share goes to workers with a
  // good record, the exploration share to workers without any record.
  return rate ? draw < cut : draw >= cut;
}

void purge_task(TaskState& task) {
  if (task.status != TaskStatus::Aggregated)
    throw Error(Errc::NotAggregated,
                "task " + task.task_id + " has not been aggregated");
  task.status = TaskStatus::Purged;
}

} // namespace crowdfuse
