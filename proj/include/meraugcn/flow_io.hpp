#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace meraugcn {

/// Two-channel optical-flow field, channel-major then row-major:
/// data[(c * height + y) * width + x], c = 0 horizontal (u), 1 vertical (v).
struct FlowField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  FlowField() = default;
  FlowField(std::size_t h, std::size_t w) : height(h), width(w), data(2 * h * w, 0.0f) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }

  bool operator==(const FlowField&) const = default;
};

inline constexpr std::size_t kMaxFlowExtent = 4096;
/// magic + version + H + W + channels.
inline constexpr std::size_t kFlowHeaderBytes = 20;

// "OFLW", u32 version = 1, u32 H, u32 W, u32 channels = 2, then float32
// values, all little-endian.
std::string encode_flow(const FlowField& field);
FlowField decode_flow(const std::string& bytes);

void write_flow(const std::string& path, const FlowField& field);
FlowField read_flow(const std::string& path);

}  // namespace meraugcn
