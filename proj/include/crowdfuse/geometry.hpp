#pragma once

#include <span>

#include "crowdfuse/types.hpp"

namespace crowdfuse {

// Intersection over union of two boxes. Throws DegeneratePair when both
// boxes have zero area; a single degenerate operand yields 0.
double iou_box(const BoundingBox& a, const BoundingBox& b);

// Pixel-set IoU. Both segments must live on the same raster grid.
double iou_pixels(const Segment& a, const Segment& b);

// Per-frame overlap summed over the union of frames:
//   sum_f inter(a_f, b_f) / sum_f union(a_f, b_f)
// Frames present in only one track contribute their area to the
// denominator. Throws EmptyTracks when both tracks have no frames.
double iou_3d(const Track& a, const Track& b);

// Coordinate-wise mean box. Throws EmptyInput on an empty span.
BoundingBox box_average(std::span<const BoundingBox> boxes);

// Largest absolute difference over the four corner coordinates; the
// distance the detection clusterer compares against tau.
double corner_distance(const BoundingBox& a, const BoundingBox& b);

} // namespace crowdfuse
