#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "meraugcn/errors.hpp"

namespace meraugcn {

/// Row-major M x K matrix of 0/1 AU labels (one row per sample).
struct LabelMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;

  LabelMatrix() = default;
  LabelMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}
  LabelMatrix(std::size_t r, std::size_t c, std::vector<std::uint8_t> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) {
      throw ShapeError("LabelMatrix: " + std::to_string(data.size()) + " values for " +
                       std::to_string(r) + "x" + std::to_string(c));
    }
    for (auto v : data) {
      if (v > 1) throw ValidationError("LabelMatrix: entries must be 0 or 1");
    }
  }

  std::uint8_t operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::uint8_t& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }

  bool operator==(const LabelMatrix&) const = default;
};

}  // namespace meraugcn
