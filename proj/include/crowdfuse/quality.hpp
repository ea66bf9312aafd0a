#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include "crowdfuse/fusion.hpp"
#include "crowdfuse/types.hpp"

namespace crowdfuse {

struct FuseOutcome {
  // Whether the category's agreement bar is met: spatial coverage at least
  // eta_cov, a super-majority label, or a count cluster holding at least
  // half the results.
  bool criterion_met = false;
  FusedResult fused;
  // Counting only: the dominant-cluster mean, kept even when the cluster
  // was not convincing.
  std::optional<double> fused_count;
};

// Fuses whatever results are present, with no solicitation bookkeeping.
FuseOutcome fuse_once(std::span<const WorkerResult> results, Category category,
                      const FusionParams& params);

struct LoopDecision {
  bool aggregated = false;
  int solicit = 0; // additional results to request when not aggregated
  std::optional<FuseOutcome> outcome;
};

// One step of the solicit/fuse/decide loop. Fewer than n_min results asks
// for one more; otherwise the task aggregates when the agreement bar is
// met or when n_max results have been spent, whichever comes first.
// Throws AlreadyAggregated when the task is no longer Open.
LoopDecision qc_step(const TaskState& task, Category category,
                     const FusionParams& params);

// Writes an aggregating decision back into the task.
void apply_decision(TaskState& task, const LoopDecision& decision);

// Approval verdicts, one per worker.
//
// Classification: voters of the fused label when one exists; otherwise
// labels are ranked by vote count and every voter inside the smallest
// prefix reaching a beta fraction is approved.
std::map<std::string, bool> evaluate_classification(
    std::span<const LabelVote> votes,
    const std::optional<std::string>& fused_label, double beta);

// Counting: approved when the submitted count sits within epsilon of the
// fused count (relative). A fused count of zero approves only exact zeros.
std::map<std::string, bool> evaluate_counting(std::span<const CountVote> votes,
                                              double fused, double epsilon);

// Spatial: approved when the worker's elements sit in the dominant cluster
// of more than half of the corroborated groups. With nothing corroborated
// there is no evidence against anyone, so everyone is approved.
std::map<std::string, bool> evaluate_spatial(
    std::span<const WorkerResult> results, const FusedResult& fused);

// Verdicts routed by category; the one entry point the loop uses.
std::map<std::string, bool> evaluate_results(std::span<const WorkerResult> results,
                                             Category category,
                                             const FusionParams& params,
                                             const FuseOutcome& outcome);

// Vote extraction helpers shared by the loop and the offline tool.
std::vector<LabelVote> label_votes(std::span<const WorkerResult> results);
std::vector<CountVote> count_votes(std::span<const WorkerResult> results);

} // namespace crowdfuse
