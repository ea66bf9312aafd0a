#include "crowdfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "crowdfuse/geometry.hpp"

namespace crowdfuse {
namespace {

const std::string& element_label(const AnnotationElement& e) {
  if (const auto* b = std::get_if<LabeledBox>(&e)) return b->label;
  if (const auto* s = std::get_if<Segment>(&e)) return s->label;
  if (const auto* t = std::get_if<Track>(&e)) return t->label;
  throw Error(Errc::CategoryMismatch, "element has no spatial label");
}

double overlap_of(const AnnotationElement& a, const AnnotationElement& b,
                  Category category) {
  switch (category) {
    case Category::Detection: {
      const auto& ba = std::get<LabeledBox>(a).box;
      const auto& bb = std::get<LabeledBox>(b).box;
      if (ba.area() == 0 && bb.area() == 0) return 0.0;
      return iou_box(ba, bb);
    }
    case Category::Segmentation:
      return iou_pixels(std::get<Segment>(a), std::get<Segment>(b));
    case Category::Tracking:
      try {
        return iou_3d(std::get<Track>(a), std::get<Track>(b));
      } catch (const Error& e) {
        if (e.code() == Errc::DegeneratePair) return 0.0;
        throw;
      }
    default:
      throw Error(Errc::CategoryMismatch, "no overlap metric for this category");
  }
}

MatchReport match_classification(std::span<const AnnotationElement> fused,
                                 std::span<const AnnotationElement> reference) {
  MatchReport r;
  if (reference.size() != 1)
    throw Error(Errc::BadArgument,
                "classification reference must hold exactly one label");
  if (fused.size() > 1)
    throw Error(Errc::BadArgument,
                "classification output must hold at most one label");
  const std::string ref = std::get<ClassLabel>(reference.front()).value;
  r.reference_total = 1;
  std::string got; // empty marks a task that produced nothing
  if (!fused.empty()) {
    got = std::get<ClassLabel>(fused.front()).value;
    r.fused_total = 1;
    if (got == ref) r.matched = 1;
  }
  ++r.confusion[ref][got];
  return r;
}

} // namespace

MatchReport match_pr(std::span<const AnnotationElement> fused,
                     std::span<const AnnotationElement> reference,
                     Category category, double iou_threshold) {
  if (category == Category::Counting)
    throw Error(Errc::CategoryMismatch,
                "counts are scored by relative deviation, not matching");
  for (const auto& e : fused)
    if (!element_matches_category(e, category))
      throw Error(Errc::CategoryMismatch, "fused element of the wrong kind");
  for (const auto& e : reference)
    if (!element_matches_category(e, category))
      throw Error(Errc::CategoryMismatch, "reference element of the wrong kind");

  if (is_classification(category)) return match_classification(fused, reference);

  MatchReport r;
  r.fused_total = static_cast<int>(fused.size());
  r.reference_total = static_cast<int>(reference.size());

  struct Cand {
    double iou;
    std::size_t f, g;
  };
  std::vector<Cand> cands;
  for (std::size_t f = 0; f < fused.size(); ++f) {
    for (std::size_t g = 0; g < reference.size(); ++g) {
      if (element_label(fused[f]) != element_label(reference[g])) continue;
      const double iou = overlap_of(fused[f], reference[g], category);
      if (iou > iou_threshold) cands.push_back({iou, f, g});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    return std::tie(b.iou, a.f, a.g) < std::tie(a.iou, b.f, b.g);
  });
  std::vector<bool> used_f(fused.size(), false), used_g(reference.size(), false);
  for (const auto& c : cands) {
    if (used_f[c.f] || used_g[c.g]) continue;
    used_f[c.f] = true;
    used_g[c.g] = true;
    ++r.matched;
  }
  return r;
}

MatchReport combine_matches(std::span<const MatchReport> reports) {
  MatchReport out;
  for (const auto& r : reports) {
    out.matched += r.matched;
    out.fused_total += r.fused_total;
    out.reference_total += r.reference_total;
    for (const auto& [ref, row] : r.confusion)
      for (const auto& [got, count] : row) out.confusion[ref][got] += count;
  }
  return out;
}

double average_precision(std::span<const TaskElements> fused,
                         std::span<const TaskElements> reference,
                         Category category) {
  if (!is_spatial(category))
    throw Error(Errc::CategoryMismatch,
                "average precision is defined for spatial categories");
  if (fused.size() != reference.size())
    throw Error(Errc::BadArgument, "fused and reference task lists differ in size");
  double total = 0;
  int steps = 0;
  for (int i = 0; i < 10; ++i) {
    const double threshold = 0.5 + 0.05 * i;
    std::vector<MatchReport> per_task;
    per_task.reserve(fused.size());
    for (std::size_t t = 0; t < fused.size(); ++t)
      per_task.push_back(match_pr(fused[t], reference[t], category, threshold));
    total += combine_matches(per_task).precision();
    ++steps;
  }
  return total / steps;
}

std::optional<std::size_t> price_convergence(std::span<const double> trace,
                                             double target, double tolerance) {
  if (trace.empty()) return std::nullopt;
  const double band = tolerance * std::fabs(target) + 1e-12;
  std::size_t settle = 0; // first index of the conforming suffix
  for (std::size_t i = trace.size(); i-- > 0;) {
    if (std::fabs(trace[i] - target) > band) {
      settle = i + 1;
      break;
    }
  }
  if (settle >= trace.size()) return std::nullopt;
  return settle;
}

} // namespace crowdfuse
