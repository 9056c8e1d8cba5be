#include "meraugcn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "meraugcn/errors.hpp"

namespace meraugcn {

namespace {

// round(num / 10), halves away from zero; exact for integer frame arithmetic.
int round_tenths(long long num) {
  const long long mag = (num < 0 ? -num : num) + 5;
  const long long q = mag / 10;
  return static_cast<int>(num < 0 ? -q : q);
}

double bilinear(const FlowField& f, std::size_t c, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const double tx = x - fx, ty = y - fy;
  const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  auto sample = [&](long xi, long yi) -> double {
    if (xi < 0 || yi < 0 || xi >= static_cast<long>(f.width) || yi >= static_cast<long>(f.height)) return 0.0;
    return f.at(c, static_cast<std::size_t>(yi), static_cast<std::size_t>(xi));
  };
  return (1 - tx) * (1 - ty) * sample(x0, y0) + tx * (1 - ty) * sample(x0 + 1, y0) +
         (1 - tx) * ty * sample(x0, y0 + 1) + tx * ty * sample(x0 + 1, y0 + 1);
}

}  // namespace

void FramePositions::validate() const {
  if (!(onset <= apex && apex <= offset)) {
    throw ValidationError("frame positions must satisfy onset <= apex <= offset (got " +
                          std::to_string(onset) + "," + std::to_string(apex) + "," +
                          std::to_string(offset) + ")");
  }
}

std::vector<int> enriched_apex_positions(const FramePositions& pos) {
  pos.validate();
  std::vector<int> out;
  auto push = [&](int frame) {
    if (frame == pos.onset) return;
    if (std::find(out.begin(), out.end(), frame) == out.end()) out.push_back(frame);
  };
  const long long rise = pos.apex - pos.onset;
  const long long fall = pos.offset - pos.apex;
  for (int tenth : {6, 7, 8, 9}) push(round_tenths(10LL * pos.onset + rise * tenth));
  for (int tenth : {1, 2, 3, 4, 5}) push(round_tenths(10LL * pos.apex + fall * tenth));
  return out;
}

std::vector<int> rotation_angles() { return {-15, -10, -5, 0, 5, 10, 15}; }

AugmentPlan build_plan(const FramePositions& pos) {
  AugmentPlan plan;
  plan.apex_positions.push_back(pos.apex);
  for (int frame : enriched_apex_positions(pos)) {
    if (frame != pos.apex) plan.apex_positions.push_back(frame);
  }
  plan.angles = rotation_angles();
  for (int apex : plan.apex_positions) {
    for (int angle : plan.angles) plan.variants.push_back({apex, angle});
  }
  return plan;
}

FlowField rotate_flow(const FlowField& flow, double angle_degrees) {
  if (angle_degrees == 0.0) return flow;
  const double theta = angle_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (static_cast<double>(flow.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(flow.height) - 1.0) / 2.0;
  FlowField out(flow.height, flow.width);
  for (std::size_t y = 0; y < flow.height; ++y) {
    for (std::size_t x = 0; x < flow.width; ++x) {
      // Inverse-map the output pixel into the source grid.
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      const double u = bilinear(flow, 0, sx, sy);
      const double v = bilinear(flow, 1, sx, sy);
      out.at(0, y, x) = static_cast<float>(c * u - s * v);
      out.at(1, y, x) = static_cast<float>(s * u + c * v);
    }
  }
  return out;
}

double temporal_intensity(const FramePositions& pos, int frame) {
  pos.validate();
  if (frame <= pos.apex) {
    if (pos.apex == pos.onset) return frame == pos.apex ? 1.0 : 0.0;
    return std::clamp(double(frame - pos.onset) / double(pos.apex - pos.onset), 0.0, 1.0);
  }
  if (pos.offset == pos.apex) return 0.0;
  return std::clamp(double(pos.offset - frame) / double(pos.offset - pos.apex), 0.0, 1.0);
}

FlowField materialize_variant(const FlowField& apex_flow, const FramePositions& pos,
                              const AugmentVariant& variant) {
  const double gain = temporal_intensity(pos, variant.apex);
  FlowField scaled = apex_flow;
  if (gain != 1.0) {
    for (float& v : scaled.data) v = static_cast<float>(v * gain);
  }
  return rotate_flow(scaled, variant.angle);
}

}  // namespace meraugcn
