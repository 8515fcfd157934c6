#pragma once

#include "medctx/core/grid.hpp"

namespace medctx::eval {

struct SegMetrics {
  double dice = 1.0;
  double iou = 1.0;
  double pixel_acc = 1.0;
  double hausdorff = 0.0;
};

/// Dice and IoU define 0/0 as 1. Hausdorff is the symmetric maximum of the
/// directed boundary-to-boundary distances (Euclidean, pixels) over
/// 8-connected boundary pixels: 0 when both masks are empty and the image
/// diagonal when exactly one is.
SegMetrics seg_metrics(const Mask& pred, const Mask& gt);

/// Foreground pixels with at least one background 8-neighbour; pixels outside
/// the image count as background.
Mask boundary(const Mask& mask);

/// Squared Euclidean distance from every pixel to the nearest set pixel of
/// `sites` (exact, separable lower-envelope transform). Infinity if no site.
Grid<double> squared_distance_transform(const Mask& sites);

double hausdorff_distance(const Mask& a, const Mask& b);

}  // namespace medctx::eval
