#pragma once

#include <functional>
#include <string>
#include <vector>

#include "meraugcn/tensor.hpp"

namespace meraugcn::ad {

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every element
/// of x. f receives a perturbed constant copy; x itself is untouched.
/// Throws NumericError when f returns a non-finite value.
std::vector<double> finite_difference(const std::function<double(const Tensor&)>& f,
                                      const Tensor& x, double h);

struct GradTolerance {
  double relative = 1e-4;
  /// Below this analytic magnitude elements are compared absolutely.
  double small_cutoff = 1e-8;
  double absolute = 1e-7;
  /// Lower bound on the relative-error denominator, per unit of
  /// max(1, |loss|); 0 gives the pure relative error.
  double denominator_floor = 0.0;
  /// Drop elements whose +-h probes switch a relu/clamp/max-pool branch.
  bool skip_kinks = true;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_absolute_error_small = 0.0;
  std::size_t elements_checked = 0;
  std::size_t kinks_skipped = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Compares backward() of loss() against central differences over every
/// element of every listed leaf. Leaves are perturbed in place and restored.
/// With skip_kinks, an element is excluded (and counted) when the branch
/// fingerprint at x+h or x-h differs from the one at x.
GradCheckReport check_gradients(const std::function<Tensor()>& loss,
                                const std::vector<NamedTensor>& leaves, double h,
                                GradTolerance tol = {});

/// |a - n| / max(|a|, |n|, floor); 0 when all three are 0.
double relative_error(double analytic, double numeric, double floor = 0.0);

}  // namespace meraugcn::ad
