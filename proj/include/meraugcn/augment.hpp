#pragma once

#include <vector>

#include "meraugcn/flow_io.hpp"

namespace meraugcn {

struct FramePositions {
  int onset = 0;
  int apex = 0;
  int offset = 0;

  /// Throws ValidationError unless onset <= apex <= offset.
  void validate() const;
  bool operator==(const FramePositions&) const = default;
};

/// Frames at onset + (apex - onset) * {0.6..0.9} and
/// apex + (offset - apex) * {0.1..0.5}, rounded half away from zero,
/// deduplicated in formula order, with the onset frame itself dropped.
std::vector<int> enriched_apex_positions(const FramePositions& pos);

/// -15..15 degrees in steps of 5.
std::vector<int> rotation_angles();

struct AugmentVariant {
  int apex = 0;
  int angle = 0;
  bool operator==(const AugmentVariant&) const = default;
};

struct AugmentPlan {
  std::vector<int> apex_positions;  // original apex first, then enriched
  std::vector<int> angles;
  std::vector<AugmentVariant> variants;  // apex-major Cartesian product
};

AugmentPlan build_plan(const FramePositions& pos);

/// Rigid rotation of a flow field about the image center: positions are
/// resampled bilinearly (outside = 0) and every vector is rotated by the
/// same angle. Intended range is |angle| <= 15 degrees.
FlowField rotate_flow(const FlowField& flow, double angle_degrees);

/// Relative motion magnitude at `frame`: piecewise linear, 0 at onset,
/// 1 at apex, 0 at offset.
double temporal_intensity(const FramePositions& pos, int frame);

/// Flow for one plan variant, derived from the onset->apex flow: scaled by
/// the temporal intensity of the variant's apex frame, then rotated.
FlowField materialize_variant(const FlowField& apex_flow, const FramePositions& pos,
                              const AugmentVariant& variant);

}  // namespace meraugcn
