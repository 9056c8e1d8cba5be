#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "meraugcn/tensor.hpp"

namespace meraugcn::ad {

// Differentiable primitives. Every one throws ShapeError naming itself and
// the offending extents when its operands do not conform.

/// (m,k)x(k,n), (B,m,k)x(k,n), (m,k)x(B,k,n) or (B,m,k)x(B,k,n).
Tensor matmul(const Tensor& a, const Tensor& b);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// x (N,Cin,H,W), weight (Cout,Cin,KH,KW), bias (Cout) -> (N,Cout,H',W').
/// Zero padding; H' = (H + 2p - KH) / stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              Conv2dOptions options = {});

/// x (N,C,H,W). Windows that do not fit are dropped. Ties route the
/// gradient to the first (row-major) maximal element.
Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);

/// Subgradient 0 at exactly 0.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x, int axis = -1);
/// Gradient passes through on [lo, hi] and is 0 outside.
Tensor clamp(const Tensor& x, double lo, double hi);

// Elementwise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Sums out one axis (the axis is removed from the shape).
Tensor sum(const Tensor& x, int axis);
/// Sum of all elements, shape ().
Tensor sum(const Tensor& x);
/// Mean of all elements, shape ().
Tensor mean(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// While alive, relu, clamp and max_pool2d fold the branch taken by every
/// element into a per-thread fingerprint. Two evaluations with equal
/// fingerprints took the same linear piece everywhere.
class BranchTrace {
public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  void reset();
  std::uint64_t fingerprint() const;

private:
  bool saved_active_;
  std::uint64_t saved_hash_;
};

}  // namespace meraugcn::ad
