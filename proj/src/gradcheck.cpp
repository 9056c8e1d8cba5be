#include "meraugcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "meraugcn/errors.hpp"
#include "meraugcn/ops.hpp"

namespace meraugcn::ad {

namespace {

double checked(double v, const char* where) {
  if (!std::isfinite(v)) throw NumericError(std::string(where) + ": function value is not finite");
  return v;
}

}  // namespace

std::vector<double> finite_difference(const std::function<double(const Tensor&)>& f,
                                      const Tensor& x, double h) {
  if (!(h > 0.0)) throw ContractError("finite_difference: step must be positive");
  Tensor probe = Tensor::constant(x.shape(), {x.values().begin(), x.values().end()});
  auto vals = probe.mutable_values();
  std::vector<double> grad(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double orig = vals[i];
    vals[i] = orig + h;
    const double up = checked(f(probe), "finite_difference");
    vals[i] = orig - h;
    const double down = checked(f(probe), "finite_difference");
    vals[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const std::function<Tensor()>& loss,
                                const std::vector<NamedTensor>& leaves, double h,
                                GradTolerance tol) {
  if (!(h > 0.0)) throw ContractError("check_gradients: step must be positive");
  for (const auto& leaf : leaves) {
    Tensor t = leaf.tensor;
    t.zero_grad();
  }
  BranchTrace trace;
  Tensor root = loss();
  const std::uint64_t base = trace.fingerprint();
  const double floor = tol.denominator_floor * std::max(1.0, std::abs(checked(root.item(), "check_gradients")));
  backward(root);

  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) {
    if (leaf.tensor.has_grad()) {
      analytic.emplace_back(leaf.tensor.grad().begin(), leaf.tensor.grad().end());
    } else {
      analytic.emplace_back(leaf.tensor.numel(), 0.0);
    }
  }

  auto probe = [&](double& slot, double value, bool& kink) {
    slot = value;
    trace.reset();
    const double v = checked(loss().item(), "check_gradients");
    if (trace.fingerprint() != base) kink = true;
    return v;
  };

  GradCheckReport report;
  for (std::size_t p = 0; p < leaves.size(); ++p) {
    Tensor t = leaves[p].tensor;
    auto vals = t.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      bool kink = false;
      const double up = probe(vals[i], orig + h, kink);
      const double down = probe(vals[i], orig - h, kink);
      vals[i] = orig;
      if (kink && tol.skip_kinks) {
        ++report.kinks_skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      ++report.elements_checked;
      if (std::abs(a) < tol.small_cutoff) {
        const double err = std::abs(a - numeric);
        report.max_absolute_error_small = std::max(report.max_absolute_error_small, err);
        if (!(err < tol.absolute)) report.passed = false;
        continue;
      }
      const double err = relative_error(a, numeric, floor);
      if (err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = leaves[p].name;
        report.worst_index = i;
      }
      if (!(err < tol.relative)) report.passed = false;
    }
  }
  return report;
}

}  // namespace meraugcn::ad
