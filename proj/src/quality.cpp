#include "crowdfuse/quality.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace crowdfuse {
namespace {

constexpr double kSlack = 1e-9; // guards >=/<= comparisons on ratios

FusedResult verdict_to_fused(const std::optional<std::pair<std::string, int>>& winner,
                             std::span<const LabelVote> votes) {
  FusedResult fr;
  for (const auto& v : votes) fr.per_worker_accept.try_emplace(v.worker_id, 0);
  if (winner) {
    fr.corroborated.push_back(
        {AnnotationElement(ClassLabel{winner->first}), winner->second});
    fr.uncorroborated_groups = 0;
    fr.coverage = 1.0;
    for (const auto& v : votes)
      if (v.label == winner->first) fr.per_worker_accept[v.worker_id] = 1;
  } else {
    fr.uncorroborated_groups = 1;
    fr.coverage = 0.0;
  }
  return fr;
}

FusedResult count_to_fused(const CountFusion& cf, bool convincing,
                           std::span<const CountVote> votes) {
  FusedResult fr;
  for (const auto& v : votes) fr.per_worker_accept.try_emplace(v.worker_id, 0);
  if (convincing) {
    fr.corroborated.push_back({AnnotationElement(Count{cf.fused}),
                               static_cast<int>(cf.dominant_workers.size())});
    fr.uncorroborated_groups = 0;
    fr.coverage = 1.0;
    for (const auto& w : cf.dominant_workers) fr.per_worker_accept[w] = 1;
  } else {
    fr.uncorroborated_groups = 1;
    fr.coverage = 0.0;
  }
  return fr;
}

} // namespace

std::vector<LabelVote> label_votes(std::span<const WorkerResult> results) {
  std::vector<LabelVote> votes;
  votes.reserve(results.size());
  for (const auto& r : results) {
    if (r.elements.empty() || !std::holds_alternative<ClassLabel>(r.elements.front()))
      throw Error(Errc::CategoryMismatch,
                  "classification result must carry exactly one label");
    votes.push_back({std::get<ClassLabel>(r.elements.front()).value, r.worker_id});
  }
  return votes;
}

std::vector<CountVote> count_votes(std::span<const WorkerResult> results) {
  std::vector<CountVote> votes;
  votes.reserve(results.size());
  for (const auto& r : results) {
    if (r.elements.empty()) {
      votes.push_back({0.0, r.worker_id}); // an empty sheet counts nothing
      continue;
    }
    if (!std::holds_alternative<Count>(r.elements.front()))
      throw Error(Errc::CategoryMismatch, "counting result must carry a count");
    votes.push_back({std::get<Count>(r.elements.front()).value, r.worker_id});
  }
  return votes;
}

FuseOutcome fuse_once(std::span<const WorkerResult> results, Category category,
                      const FusionParams& params) {
  FuseOutcome out;
  const int n = static_cast<int>(results.size());
  switch (category) {
    case Category::ImageClassification:
    case Category::VideoClassification: {
      const auto votes = label_votes(results);
      const auto winner = fuse_classification(votes, params.beta);
      out.criterion_met = winner.has_value();
      out.fused = verdict_to_fused(winner, votes);
      break;
    }
    case Category::Counting: {
      const auto votes = count_votes(results);
      const auto cf = fuse_counts(votes, params.epsilon);
      // Convincing when the dominant cluster holds at least half the
      // results, rounded up.
      const int need = (n + 1) / 2;
      out.criterion_met = static_cast<int>(cf.dominant_workers.size()) >= need;
      out.fused_count = cf.fused;
      out.fused = count_to_fused(cf, out.criterion_met, votes);
      break;
    }
    case Category::Detection:
    case Category::Segmentation:
    case Category::Tracking: {
      if (category == Category::Detection)
        out.fused = fuse_detections(results, params);
      else if (category == Category::Segmentation)
        out.fused = fuse_segments(results, params);
      else
        out.fused = fuse_tracks(results, params);
      out.criterion_met = out.fused.coverage >= params.eta_cov - kSlack;
      break;
    }
  }
  return out;
}

LoopDecision qc_step(const TaskState& task, Category category,
                     const FusionParams& params) {
  if (task.status != TaskStatus::Open)
    throw Error(Errc::AlreadyAggregated,
                "task " + task.task_id + " is no longer open");

  LoopDecision d;
  const int n = static_cast<int>(task.results.size());
  if (n < params.n_min) {
    d.solicit = 1;
    return d;
  }
  FuseOutcome outcome = fuse_once(task.results, category, params);
  if (outcome.criterion_met || n >= params.n_max) {
    d.aggregated = true;
    d.outcome = std::move(outcome);
  } else {
    d.solicit = 1;
  }
  return d;
}

void apply_decision(TaskState& task, const LoopDecision& decision) {
  if (!decision.aggregated) return;
  if (task.status != TaskStatus::Open)
    throw Error(Errc::AlreadyAggregated,
                "task " + task.task_id + " is no longer open");
  task.status = TaskStatus::Aggregated;
  if (decision.outcome) task.fused = decision.outcome->fused;
}

std::map<std::string, bool> evaluate_classification(
    std::span<const LabelVote> votes,
    const std::optional<std::string>& fused_label, double beta) {
  std::map<std::string, bool> verdicts;
  if (fused_label) {
    for (const auto& v : votes) verdicts[v.worker_id] = v.label == *fused_label;
    return verdicts;
  }
  // No super-majority: approve the voters of the most popular labels,
  // taking labels until a beta fraction of the votes is covered.
  std::map<std::string, int> counts;
  for (const auto& v : votes) ++counts[v.label];
  std::vector<std::pair<std::string, int>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const double n = static_cast<double>(votes.size());
  std::set<std::string> approved_labels;
  int covered = 0;
  for (const auto& [label, count] : ranked) {
    approved_labels.insert(label);
    covered += count;
    if (static_cast<double>(covered) >= beta * n - kSlack) break;
  }
  for (const auto& v : votes)
    verdicts[v.worker_id] = approved_labels.count(v.label) > 0;
  return verdicts;
}

std::map<std::string, bool> evaluate_counting(std::span<const CountVote> votes,
                                              double fused, double epsilon) {
  std::map<std::string, bool> verdicts;
  const double band = epsilon * std::fabs(fused) + kSlack;
  for (const auto& v : votes)
    verdicts[v.worker_id] = std::fabs(v.count - fused) <= band;
  return verdicts;
}

std::map<std::string, bool> evaluate_spatial(
    std::span<const WorkerResult> results, const FusedResult& fused) {
  std::map<std::string, bool> verdicts;
  const int k = static_cast<int>(fused.corroborated.size());
  for (const auto& r : results) {
    if (k == 0) {
      verdicts[r.worker_id] = true; // nothing corroborated, no one to blame
      continue;
    }
    int hits = 0;
    auto it = fused.per_worker_accept.find(r.worker_id);
    if (it != fused.per_worker_accept.end()) hits = it->second;
    verdicts[r.worker_id] = 2 * hits > k;
  }
  return verdicts;
}

std::map<std::string, bool> evaluate_results(std::span<const WorkerResult> results,
                                             Category category,
                                             const FusionParams& params,
                                             const FuseOutcome& outcome) {
  if (is_classification(category)) {
    const auto votes = label_votes(results);
    std::optional<std::string> fused_label;
    if (!outcome.fused.corroborated.empty())
      fused_label =
          std::get<ClassLabel>(outcome.fused.corroborated.front().element).value;
    return evaluate_classification(votes, fused_label, params.beta);
  }
  if (category == Category::Counting) {
    const auto votes = count_votes(results);
    return evaluate_counting(votes, outcome.fused_count.value_or(0.0),
                             params.epsilon);
  }
  return evaluate_spatial(results, outcome.fused);
}

} // namespace crowdfuse
