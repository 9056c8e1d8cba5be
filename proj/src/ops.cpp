#include "meraugcn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "meraugcn/errors.hpp"

namespace meraugcn::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

using NodePtr = std::shared_ptr<Node>;

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

struct TraceState {
  bool active = false;
  std::uint64_t hash = kFnvBasis;
};

thread_local TraceState trace;

void trace_branch(std::uint64_t choice) {
  trace.hash = (trace.hash ^ choice) * 0x100000001b3ULL;
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<NodePtr> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const NodePtr& n) { return n->requires_grad; });
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward_fn);
  }
  return Tensor::from_node(std::move(node));
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

std::size_t normalize_axis(const char* op, int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    shape_fail(op, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit out{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) out.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  return out;
}

// ---- broadcasting -------------------------------------------------------

struct Broadcast {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia, ib;  // operand index per output element
};

Broadcast plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
  plan.out.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      shape_fail(op, "cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
  }
  // Strides are 0 along broadcast dimensions.
  auto strides = [&](const Shape& p) {
    std::vector<std::size_t> st(rank, 0);
    std::size_t acc = 1;
    for (std::size_t i = rank; i-- > 0;) {
      st[i] = p[i] == 1 ? 0 : acc;
      acc *= p[i];
    }
    return st;
  };
  const auto sa = strides(pa);
  const auto sb = strides(pb);
  const std::size_t n = numel(plan.out);
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t offa = 0, offb = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    plan.ia[flat] = offa;
    plan.ib[flat] = offb;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      offa += sa[d];
      offb += sb[d];
      if (idx[d] < plan.out[d]) break;
      offa -= sa[d] * idx[d];
      offb -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return plan;
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const char* op, BinaryKind kind, const Tensor& a, const Tensor& b) {
  auto plan = std::make_shared<Broadcast>(plan_broadcast(op, a.shape(), b.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t n = numel(plan->out);
  std::vector<double> out(n);
  auto ia = [&](std::size_t i) { return plan->same ? i : plan->ia[i]; };
  auto ib = [&](std::size_t i) { return plan->same ? i : plan->ib[i]; };
  switch (kind) {
    case BinaryKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[ia(i)] + bv[ib(i)];
      break;
    case BinaryKind::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[ia(i)] - bv[ib(i)];
      break;
    case BinaryKind::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[ia(i)] * bv[ib(i)];
      break;
  }
  return make_result(op, plan->out, std::move(out), {a.node(), b.node()},
                     [plan, kind](Node& self) {
                       Node& na = *self.inputs[0];
                       Node& nb = *self.inputs[1];
                       const auto& g = self.grad;
                       const std::size_t n = g.size();
                       auto ia = [&](std::size_t i) { return plan->same ? i : plan->ia[i]; };
                       auto ib = [&](std::size_t i) { return plan->same ? i : plan->ib[i]; };
                       if (na.requires_grad) {
                         na.ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           const double d = kind == BinaryKind::mul ? g[i] * nb.value[ib(i)] : g[i];
                           na.grad[ia(i)] += d;
                         }
                       }
                       if (nb.requires_grad) {
                         nb.ensure_grad();
                         for (std::size_t i = 0; i < n; ++i) {
                           double d = g[i];
                           if (kind == BinaryKind::sub) d = -d;
                           if (kind == BinaryKind::mul) d *= na.value[ia(i)];
                           nb.grad[ib(i)] += d;
                         }
                       }
                     });
}

template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df_from_x_y) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result(op, x.shape(), std::move(out), {x.node()}, [df_from_x_y](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      in.grad[i] += self.grad[i] * df_from_x_y(in.value[i], self.value[i]);
    }
  });
}

}  // namespace

// ---- matmul -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() < 2 || sa.size() > 3 || sb.size() < 2 || sb.size() > 3) {
    shape_fail("matmul", "operands must be rank 2 or 3, got " + to_string(sa) + " and " + to_string(sb));
  }
  const std::size_t m = sa[sa.size() - 2], k = sa.back();
  const std::size_t kb = sb[sb.size() - 2], n = sb.back();
  if (k != kb) {
    shape_fail("matmul", "inner extents differ: " + to_string(sa) + " x " + to_string(sb));
  }
  const bool a_batched = sa.size() == 3, b_batched = sb.size() == 3;
  if (a_batched && b_batched && sa[0] != sb[0]) {
    shape_fail("matmul", "batch extents differ: " + to_string(sa) + " x " + to_string(sb));
  }
  const std::size_t batch = a_batched ? sa[0] : (b_batched ? sb[0] : 1);
  Shape out_shape = (a_batched || b_batched) ? Shape{batch, m, n} : Shape{m, n};
  std::vector<double> out(batch * m * n);

  const double* ap = a.values().data();
  const double* bp = b.values().data();
  if (!b_batched) {
    // Shared right operand: fold the batch into the row dimension.
    const std::size_t rows = a_batched ? batch * m : m;
    if (a_batched || batch == 1) {
      MutMap(out.data(), rows, n).noalias() = ConstMap(ap, rows, k) * ConstMap(bp, k, n);
    } else {
      for (std::size_t t = 0; t < batch; ++t) {
        MutMap(out.data() + t * m * n, m, n).noalias() = ConstMap(ap, m, k) * ConstMap(bp, k, n);
      }
    }
  } else {
    for (std::size_t t = 0; t < batch; ++t) {
      const double* at = a_batched ? ap + t * m * k : ap;
      MutMap(out.data() + t * m * n, m, n).noalias() =
          ConstMap(at, m, k) * ConstMap(bp + t * k * n, k, n);
    }
  }

  return make_result(
      "matmul", std::move(out_shape), std::move(out), {a.node(), b.node()},
      [=](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        const double* g = self.grad.data();
        if (na.requires_grad) na.ensure_grad();
        if (nb.requires_grad) nb.ensure_grad();
        if (!b_batched && a_batched) {
          const std::size_t rows = batch * m;
          ConstMap G(g, rows, n);
          if (na.requires_grad) {
            MutMap(na.grad.data(), rows, k).noalias() += G * ConstMap(nb.value.data(), k, n).transpose();
          }
          if (nb.requires_grad) {
            MutMap(nb.grad.data(), k, n).noalias() += ConstMap(na.value.data(), rows, k).transpose() * G;
          }
          return;
        }
        for (std::size_t t = 0; t < batch; ++t) {
          ConstMap G(g + t * m * n, m, n);
          const std::size_t a_off = a_batched ? t * m * k : 0;
          const std::size_t b_off = b_batched ? t * k * n : 0;
          if (na.requires_grad) {
            MutMap(na.grad.data() + a_off, m, k).noalias() +=
                G * ConstMap(nb.value.data() + b_off, k, n).transpose();
          }
          if (nb.requires_grad) {
            MutMap(nb.grad.data() + b_off, k, n).noalias() +=
                ConstMap(na.value.data() + a_off, m, k).transpose() * G;
          }
        }
      });
}

// ---- convolution / pooling ---------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Conv2dOptions opt) {
  const auto& sx = x.shape();
  const auto& sw = weight.shape();
  if (sx.size() != 4) shape_fail("conv2d", "input must be (N,C,H,W), got " + to_string(sx));
  if (sw.size() != 4) shape_fail("conv2d", "weight must be (Cout,Cin,KH,KW), got " + to_string(sw));
  if (sw[1] != sx[1]) {
    shape_fail("conv2d", "input channels " + std::to_string(sx[1]) + " != weight channels " +
                             std::to_string(sw[1]));
  }
  if (bias.shape() != Shape{sw[0]}) {
    shape_fail("conv2d", "bias must be (" + std::to_string(sw[0]) + "), got " + to_string(bias.shape()));
  }
  if (opt.stride == 0) shape_fail("conv2d", "stride must be positive");
  const std::size_t N = sx[0], Cin = sx[1], H = sx[2], W = sx[3];
  const std::size_t Cout = sw[0], KH = sw[2], KW = sw[3];
  const std::size_t P = opt.padding, S = opt.stride;
  if (H + 2 * P < KH || W + 2 * P < KW) {
    shape_fail("conv2d", "kernel " + to_string(sw) + " larger than padded input " + to_string(sx));
  }
  const std::size_t OH = (H + 2 * P - KH) / S + 1;
  const std::size_t OW = (W + 2 * P - KW) / S + 1;

  const double* xp = x.values().data();
  const double* wp = weight.values().data();
  const double* bp = bias.values().data();
  std::vector<double> out(N * Cout * OH * OW);

  // Visits every (output, input, weight) triple of the direct definition.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t nn = 0; nn < N; ++nn)
      for (std::size_t co = 0; co < Cout; ++co)
        for (std::size_t ci = 0; ci < Cin; ++ci)
          for (std::size_t kh = 0; kh < KH; ++kh)
            for (std::size_t kw = 0; kw < KW; ++kw) {
              const std::size_t w_idx = ((co * Cin + ci) * KH + kh) * KW + kw;
              for (std::size_t oh = 0; oh < OH; ++oh) {
                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * S + kh) - static_cast<std::ptrdiff_t>(P);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                const std::size_t x_row = ((nn * Cin + ci) * H + static_cast<std::size_t>(ih)) * W;
                const std::size_t o_row = ((nn * Cout + co) * OH + oh) * OW;
                for (std::size_t ow = 0; ow < OW; ++ow) {
                  const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * S + kw) - static_cast<std::ptrdiff_t>(P);
                  if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                  fn(o_row + ow, x_row + static_cast<std::size_t>(iw), w_idx);
                }
              }
            }
  };

  for (std::size_t nn = 0; nn < N; ++nn)
    for (std::size_t co = 0; co < Cout; ++co)
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((nn * Cout + co) * OH * OW), OH * OW, bp[co]);
  for_each_tap([&](std::size_t o, std::size_t i, std::size_t w) { out[o] += xp[i] * wp[w]; });

  return make_result("conv2d", {N, Cout, OH, OW}, std::move(out),
                     {x.node(), weight.node(), bias.node()},
                     [=](Node& self) {
                       Node& nx = *self.inputs[0];
                       Node& nw = *self.inputs[1];
                       Node& nb = *self.inputs[2];
                       const auto& g = self.grad;
                       if (nx.requires_grad) {
                         nx.ensure_grad();
                         for_each_tap([&](std::size_t o, std::size_t i, std::size_t w) {
                           nx.grad[i] += g[o] * nw.value[w];
                         });
                       }
                       if (nw.requires_grad) {
                         nw.ensure_grad();
                         for_each_tap([&](std::size_t o, std::size_t i, std::size_t w) {
                           nw.grad[w] += g[o] * nx.value[i];
                         });
                       }
                       if (nb.requires_grad) {
                         nb.ensure_grad();
                         for (std::size_t nn = 0; nn < N; ++nn)
                           for (std::size_t co = 0; co < Cout; ++co)
                             for (std::size_t j = 0; j < OH * OW; ++j)
                               nb.grad[co] += g[(nn * Cout + co) * OH * OW + j];
                       }
                     });
}

Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  const auto& sx = x.shape();
  if (sx.size() != 4) shape_fail("max_pool2d", "input must be (N,C,H,W), got " + to_string(sx));
  if (kernel == 0 || stride == 0) shape_fail("max_pool2d", "kernel and stride must be positive");
  const std::size_t N = sx[0], C = sx[1], H = sx[2], W = sx[3];
  if (H < kernel || W < kernel) {
    shape_fail("max_pool2d", "kernel " + std::to_string(kernel) + " larger than input " + to_string(sx));
  }
  const std::size_t OH = (H - kernel) / stride + 1;
  const std::size_t OW = (W - kernel) / stride + 1;
  const auto xv = x.values();
  std::vector<double> out(N * C * OH * OW);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t ow = 0; ow < OW; ++ow) {
        std::size_t best = plane * H * W + oh * stride * W + ow * stride;
        for (std::size_t kh = 0; kh < kernel; ++kh) {
          for (std::size_t kw = 0; kw < kernel; ++kw) {
            const std::size_t idx = plane * H * W + (oh * stride + kh) * W + ow * stride + kw;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (plane * OH + oh) * OW + ow;
        if (trace.active) trace_branch(best);
        out[o] = xv[best];
        (*argmax)[o] = best;
      }
    }
  }
  return make_result("max_pool2d", {N, C, OH, OW}, std::move(out), {x.node()}, [argmax](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t o = 0; o < self.grad.size(); ++o) in.grad[(*argmax)[o]] += self.grad[o];
  });
}

// ---- pointwise ----------------------------------------------------------

Tensor relu(const Tensor& x) {
  if (trace.active) {
    for (double v : x.values()) trace_branch(v > 0.0);
  }
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
  if (trace.active) {
    for (double v : x.values()) trace_branch(v < lo ? 0 : v > hi ? 2 : 1);
  }
  return unary("clamp", x, [=](double v) { return std::clamp(v, lo, hi); },
               [=](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary("scale", x, [=](double v) { return v * factor; },
               [=](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary("add_scalar", x, [=](double v) { return v + value; },
               [](double, double) { return 1.0; });
}

Tensor softmax(const Tensor& x, int axis_arg) {
  const auto axis = normalize_axis("softmax", axis_arg, x.rank());
  const auto sp = split_at(x.shape(), axis);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.n * sp.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < sp.n; ++j) mx = std::max(mx, xv[base + j * sp.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < sp.n; ++j) {
        const double e = std::exp(xv[base + j * sp.inner] - mx);
        out[base + j * sp.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < sp.n; ++j) out[base + j * sp.inner] /= total;
    }
  }
  return make_result("softmax", x.shape(), std::move(out), {x.node()}, [sp](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.n * sp.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < sp.n; ++j) dot += g[base + j * sp.inner] * y[base + j * sp.inner];
        for (std::size_t j = 0; j < sp.n; ++j) {
          const std::size_t idx = base + j * sp.inner;
          in.grad[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& x, int axis_arg) {
  const auto axis = normalize_axis("log_softmax", axis_arg, x.rank());
  const auto sp = split_at(x.shape(), axis);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.n * sp.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < sp.n; ++j) mx = std::max(mx, xv[base + j * sp.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < sp.n; ++j) total += std::exp(xv[base + j * sp.inner] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t j = 0; j < sp.n; ++j) out[base + j * sp.inner] = xv[base + j * sp.inner] - lse;
    }
  }
  return make_result("log_softmax", x.shape(), std::move(out), {x.node()}, [sp](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.n * sp.inner + i;
        double gsum = 0.0;
        for (std::size_t j = 0; j < sp.n; ++j) gsum += g[base + j * sp.inner];
        for (std::size_t j = 0; j < sp.n; ++j) {
          const std::size_t idx = base + j * sp.inner;
          in.grad[idx] += g[idx] - std::exp(y[idx]) * gsum;
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinaryKind::mul, a, b); }

// ---- structural ---------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis_arg) {
  if (parts.empty()) shape_fail("concat", "no operands");
  const Shape& first = parts.front().shape();
  const auto axis = normalize_axis("concat", axis_arg, first.size());
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) shape_fail("concat", "operand " + to_string(s) + " does not match " + to_string(first));
    out_shape[axis] += s[axis];
    widths.push_back(s[axis]);
  }
  const auto sp = split_at(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::vector<NodePtr> inputs;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    const std::size_t chunk = widths[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * sp.n * sp.inner + offset * sp.inner));
    }
    offset += widths[p];
    inputs.push_back(parts[p].node());
  }
  return make_result("concat", std::move(out_shape), std::move(out), std::move(inputs),
                     [sp, widths](Node& self) {
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < self.inputs.size(); ++p) {
                         Node& in = *self.inputs[p];
                         const std::size_t chunk = widths[p] * sp.inner;
                         if (in.requires_grad) {
                           in.ensure_grad();
                           for (std::size_t o = 0; o < sp.outer; ++o) {
                             const double* src = self.grad.data() + o * sp.n * sp.inner + offset * sp.inner;
                             double* dst = in.grad.data() + o * chunk;
                             for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
                           }
                         }
                         offset += widths[p];
                       }
                     });
}

Tensor sum(const Tensor& x, int axis_arg) {
  const auto axis = normalize_axis("sum", axis_arg, x.rank());
  const auto sp = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  const auto xv = x.values();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.n; ++j)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[o * sp.inner + i] += xv[(o * sp.n + j) * sp.inner + i];
  return make_result("sum", std::move(out_shape), std::move(out), {x.node()}, [sp](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t j = 0; j < sp.n; ++j)
        for (std::size_t i = 0; i < sp.inner; ++i)
          in.grad[(o * sp.n + j) * sp.inner + i] += self.grad[o * sp.inner + i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return make_result("sum_all", {}, {total}, {x.node()}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (double& g : in.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) shape_fail("mean", "empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    shape_fail("reshape", "cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return make_result("reshape", std::move(shape), std::move(out), {x.node()}, [](Node& self) {
    Node& in = *self.inputs[0];
    in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) in.grad[i] += self.grad[i];
  });
}

BranchTrace::BranchTrace() : saved_active_(trace.active), saved_hash_(trace.hash) {
  trace.active = true;
  trace.hash = kFnvBasis;
}

BranchTrace::~BranchTrace() {
  trace.active = saved_active_;
  trace.hash = saved_hash_;
}

void BranchTrace::reset() { trace.hash = kFnvBasis; }

std::uint64_t BranchTrace::fingerprint() const { return trace.hash; }

}  // namespace meraugcn::ad
