#include "crowdfuse/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace crowdfuse {
namespace {

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_br, b.x_br) - std::max(a.x_tl, b.x_tl);
  const double h = std::min(a.y_br, b.y_br) - std::max(a.y_tl, b.y_tl);
  if (w <= 0 || h <= 0) return 0.0;
  return w * h;
}

} // namespace

double iou_box(const BoundingBox& a, const BoundingBox& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a == 0 && area_b == 0)
    throw Error(Errc::DegeneratePair, "IoU of two zero-area boxes");
  const double inter = intersection_area(a, b);
  const double uni = area_a + area_b - inter;
  return inter / uni; // uni > 0: at least one operand has positive area
}

double iou_pixels(const Segment& a, const Segment& b) {
  if (a.width != b.width || a.height != b.height)
    throw Error(Errc::GridMismatch, "segments live on different grids");
  // Both cell lists are sorted; count the intersection with two cursors.
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.cells.size() && j < b.cells.size()) {
    if (a.cells[i] < b.cells[j]) ++i;
    else if (b.cells[j] < a.cells[i]) ++j;
    else { ++inter; ++i; ++j; }
  }
  const std::size_t uni = a.cells.size() + b.cells.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double iou_3d(const Track& a, const Track& b) {
  if (a.frames.empty() && b.frames.empty())
    throw Error(Errc::EmptyTracks, "3d IoU of two empty tracks");
  double inter = 0, uni = 0;
  auto ia = a.frames.begin();
  auto ib = b.frames.begin();
  while (ia != a.frames.end() || ib != b.frames.end()) {
    if (ib == b.frames.end() || (ia != a.frames.end() && ia->first < ib->first)) {
      uni += ia->second.area();
      ++ia;
    } else if (ia == a.frames.end() || ib->first < ia->first) {
      uni += ib->second.area();
      ++ib;
    } else {
      const double x = intersection_area(ia->second, ib->second);
      inter += x;
      uni += ia->second.area() + ib->second.area() - x;
      ++ia;
      ++ib;
    }
  }
  if (uni == 0)
    throw Error(Errc::DegeneratePair, "3d IoU with zero total volume");
  return inter / uni;
}

BoundingBox box_average(std::span<const BoundingBox> boxes) {
  if (boxes.empty())
    throw Error(Errc::EmptyInput, "average of zero boxes");
  BoundingBox out;
  for (const auto& b : boxes) {
    out.x_tl += b.x_tl;
    out.y_tl += b.y_tl;
    out.x_br += b.x_br;
    out.y_br += b.y_br;
  }
  const double n = static_cast<double>(boxes.size());
  out.x_tl /= n;
  out.y_tl /= n;
  out.x_br /= n;
  out.y_br /= n;
  return out;
}

double corner_distance(const BoundingBox& a, const BoundingBox& b) {
  return std::max({std::fabs(a.x_tl - b.x_tl), std::fabs(a.y_tl - b.y_tl),
                   std::fabs(a.x_br - b.x_br), std::fabs(a.y_br - b.y_br)});
}

} // namespace crowdfuse
