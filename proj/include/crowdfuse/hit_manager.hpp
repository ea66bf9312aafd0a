#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crowdfuse/rng.hpp"
#include "crowdfuse/types.hpp"

namespace crowdfuse {

// HITs to list right now: enough to cover every open task at batch_size
// tasks per HIT, minus the HITs already out there.
int compute_deficit(int open_tasks, int unfinished_hits, int batch_size);

// Picks up to k tasks for a worker: Open, same job, never served to this
// worker, and passing the optional extra filter. Least-worked-on first;
// ties break by a per-candidate random draw, then task id. Throws
// NoEligibleTasks when the pool is empty.
std::vector<std::string> select_tasks(
    const std::string& worker_id, const std::string& job_id, int k,
    std::span<const TaskState* const> tasks, Rng& rng,
    const std::function<bool(const TaskState&)>& extra_filter = {});

// Folds one approved duration into the price: per-task price is the target
// hourly rate times the median approved duration, in hours.
void update_price(PricingState& state, double approved_duration);

enum class Settlement { Paid, Rejected, Deferred };

// Pays when the accepted fraction of the HIT's evaluated tasks is strictly
// above the threshold. Each verdict also lands in the worker's per-job
// tally. No evaluated tasks yet means no decision. Throws NotSubmitted
// unless the HIT is in the Submitted state.
Settlement settle_hit(HitRecord& hit, const std::vector<bool>& per_task_accept,
                      double payment_threshold, WorkerProfile& profile);

struct AdmissionPolicy {
  double min_approval_rate = 0.5;
  double exploration_share = 0.2;
};

// Gate applied per assignment. Workers below the approval cutoff are
// turned away. The remaining draws split the assignments: workers with a
// good record fill the main share, workers without any record the
// exploration share. The uniform draw comes from the caller so the
// randomness stays outside.
bool admit_worker(const WorkerProfile* profile, const std::string& job_id,
                  const AdmissionPolicy& policy, double draw);

// Aggregated tasks leave the pool for good.
void purge_task(TaskState& task);

} // namespace crowdfuse
