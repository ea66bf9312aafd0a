#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdfuse/types.hpp"

namespace crowdfuse {

struct MatchReport {
  int matched = 0;
  int fused_total = 0;
  int reference_total = 0;
  // reference label -> produced label -> count; "" stands for no output.
  std::map<std::string, std::map<std::string, int>> confusion;

  // Empty sides are vacuously perfect: no output means nothing wrong, no
  // reference means nothing missed.
  double precision() const {
    return fused_total ? static_cast<double>(matched) / fused_total : 1.0;
  }
  double recall() const {
    return reference_total ? static_cast<double>(matched) / reference_total : 1.0;
  }
};

// Compares one task's fused elements against its reference. Spatial
// elements pair greedily by descending overlap, one-to-one, same label,
// and count as matched only when the overlap strictly exceeds the
// threshold. Classification compares the single labels directly and fills
// the confusion matrix. Counting has no match semantics here and throws
// CategoryMismatch.
MatchReport match_pr(std::span<const AnnotationElement> fused,
                     std::span<const AnnotationElement> reference,
                     Category category, double iou_threshold);

// Pools several per-task reports into one.
MatchReport combine_matches(std::span<const MatchReport> reports);

using TaskElements = std::vector<AnnotationElement>;

// Mean pooled precision over thresholds 0.50, 0.55, ..., 0.95.
double average_precision(std::span<const TaskElements> fused,
                         std::span<const TaskElements> reference,
                         Category category);

// First index such that every price from there on stays within
// tolerance * target of target; 0 when the whole trace conforms, nullopt
// when the trace never settles (including an empty trace).
std::optional<std::size_t> price_convergence(std::span<const double> trace,
                                             double target, double tolerance);

} // namespace crowdfuse
