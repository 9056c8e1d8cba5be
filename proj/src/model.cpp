#include "meraugcn/model.hpp"

#include <cmath>

#include "meraugcn/errors.hpp"
#include "meraugcn/ops.hpp"
#include "meraugcn/rng.hpp"

namespace meraugcn {

using namespace ad;

AttentionKind parse_attention_kind(std::string_view name) {
  if (name == "sigmoid") return AttentionKind::sigmoid;
  if (name == "softmax") return AttentionKind::softmax;
  throw ValidationError("unknown attention kind '" + std::string(name) + "' (expected sigmoid|softmax)");
}

FusionKind parse_fusion_kind(std::string_view name) {
  if (name == "sum") return FusionKind::sum;
  if (name == "concat") return FusionKind::concat;
  throw ValidationError("unknown fusion kind '" + std::string(name) + "' (expected sum|concat)");
}

std::string_view to_string(AttentionKind kind) {
  return kind == AttentionKind::sigmoid ? "sigmoid" : "softmax";
}

std::string_view to_string(FusionKind kind) { return kind == FusionKind::sum ? "sum" : "concat"; }

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError("model config: " + what);
  };
  require(input_h >= 4 && input_w >= 4, "input must be at least 4x4");
  require(d > 0 && d1 > 0 && d2 > 0, "feature widths must be positive");
  require(num_classes >= 2, "num_classes must be at least 2");
  require(num_aus >= 1, "num_aus must be at least 1");
  require(conv1_channels > 0 && conv2_channels > 0, "conv channel widths must be positive");
  require(detector_hidden > 0, "detector_hidden must be positive");
}

std::size_t ModelConfig::path_features() const {
  // conv(pad 1) keeps the size, each 2x2 pool halves it (floor).
  return conv2_channels * ((input_h / 2) / 2) * ((input_w / 2) / 2);
}

std::size_t ModelConfig::fused_width() const {
  return fusion == FusionKind::sum ? d2 : 2 * d2;
}

ModelConfig tiny_model_config(std::size_t num_aus) {
  ModelConfig c;
  c.input_h = 8;
  c.input_w = 8;
  c.d = 16;
  c.d1 = 8;
  c.d2 = 4;
  c.num_aus = num_aus;
  c.detector_hidden = 4;
  return c;
}

std::vector<ParamSpec> parameter_schedule(const ModelConfig& c) {
  c.validate();
  std::vector<ParamSpec> s;
  auto weight = [&](std::string name, Shape shape, Partition part, std::size_t fan_in) {
    s.push_back({std::move(name), std::move(shape), part, fan_in, false});
  };
  auto bias = [&](std::string name, std::size_t n, Partition part) {
    s.push_back({std::move(name), {n}, part, 0, true});
  };
  for (int path = 0; path < 2; ++path) {
    const std::string p = "backbone.path" + std::to_string(path);
    weight(p + ".conv1.weight", {c.conv1_channels, 1, 3, 3}, Partition::theta, 9);
    bias(p + ".conv1.bias", c.conv1_channels, Partition::theta);
    weight(p + ".conv2.weight", {c.conv2_channels, c.conv1_channels, 3, 3}, Partition::theta,
           9 * c.conv1_channels);
    bias(p + ".conv2.bias", c.conv2_channels, Partition::theta);
  }
  weight("backbone.fc.weight", {2 * c.path_features(), c.d}, Partition::theta, 2 * c.path_features());
  bias("backbone.fc.bias", c.d, Partition::theta);
  for (std::size_t k = 0; k < c.num_aus; ++k) {
    const std::string a = "attention." + std::to_string(k);
    weight(a + ".weight", {c.d, c.d}, Partition::theta, c.d);
    bias(a + ".bias", c.d, Partition::theta);
  }
  for (std::size_t k = 0; k < c.num_aus; ++k) {
    const std::string a = "detector." + std::to_string(k);
    weight(a + ".hidden.weight", {c.d, c.detector_hidden}, Partition::theta, c.d);
    bias(a + ".hidden.bias", c.detector_hidden, Partition::theta);
    weight(a + ".out.weight", {c.detector_hidden, 1}, Partition::theta, c.detector_hidden);
    bias(a + ".out.bias", 1, Partition::theta);
  }
  weight("gcn.0.weight", {c.d, c.d1}, Partition::phi, c.d);
  weight("gcn.1.weight", {c.d1, c.d2}, Partition::phi, c.d1);
  weight("fusion.proj.weight", {c.d, c.d2}, Partition::phi, c.d);
  bias("fusion.proj.bias", c.d2, Partition::phi);
  weight("classifier.weight", {c.fused_width(), c.num_classes}, Partition::phi, c.fused_width());
  bias("classifier.bias", c.num_classes, Partition::phi);
  return s;
}

void ModelParams::add(std::string name, Partition partition, Tensor tensor) {
  if (index_.contains(name)) throw ValidationError("duplicate parameter name " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), partition, std::move(tensor)});
}

const Tensor& ModelParams::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter " + std::string(name));
  return entries_[it->second].tensor;
}

bool ModelParams::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ModelParams::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

void ModelParams::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<ad::NamedTensor> ModelParams::named() const {
  std::vector<ad::NamedTensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back({e.name, e.tensor});
  return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams params;
  for (const auto& spec : parameter_schedule(config)) {
    std::vector<double> values(ad::numel(spec.shape), 0.0);
    if (!spec.is_bias) {
      Rng rng(derive_seed(seed, spec.name));
      const double fan_in = static_cast<double>(spec.fan_in);
      const double bound =
          spec.partition == Partition::theta ? std::sqrt(6.0 / fan_in) : 1.0 / std::sqrt(fan_in);
      for (double& v : values) v = rng.uniform(-bound, bound);
    }
    params.add(spec.name, spec.partition, Tensor::parameter(spec.shape, std::move(values)));
  }
  return params;
}

Tensor graph_operator(const AuGraph& graph, bool normalize) {
  const std::size_t k = graph.size();
  auto m = graph.as_matrix();
  if (normalize) {
    std::vector<double> inv_sqrt_deg(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      double deg = 0.0;
      for (std::size_t j = 0; j < k; ++j) deg += m[i * k + j];
      inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) m[i * k + j] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
  }
  return Tensor::constant({k, k}, std::move(m));
}

Tensor backbone_forward(const Tensor& flow, const ModelParams& params, const ModelConfig& c) {
  const Shape expected{2, c.input_h, c.input_w};
  if (flow.rank() != 4 || Shape(flow.shape().begin() + 1, flow.shape().end()) != expected) {
    throw ShapeError("backbone_forward: expected flow (M,2," + std::to_string(c.input_h) + "," +
                     std::to_string(c.input_w) + "), got " + to_string(flow.shape()));
  }
  const std::size_t m = flow.dim(0);
  const std::size_t plane = c.input_h * c.input_w;
  const auto fv = flow.values();

  std::vector<Tensor> path_out;
  for (std::size_t path = 0; path < 2; ++path) {
    std::vector<double> channel(m * plane);
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(fv.begin() + static_cast<std::ptrdiff_t>((i * 2 + path) * plane), plane,
                  channel.begin() + static_cast<std::ptrdiff_t>(i * plane));
    }
    Tensor x = Tensor::constant({m, 1, c.input_h, c.input_w}, std::move(channel));
    const std::string p = "backbone.path" + std::to_string(path);
    x = max_pool2d(relu(conv2d(x, params.at(p + ".conv1.weight"), params.at(p + ".conv1.bias"), {1, 1})), 2, 2);
    x = max_pool2d(relu(conv2d(x, params.at(p + ".conv2.weight"), params.at(p + ".conv2.bias"), {1, 1})), 2, 2);
    path_out.push_back(reshape(x, {m, c.path_features()}));
  }
  Tensor joined = concat(path_out, 1);
  return add(matmul(joined, params.at("backbone.fc.weight")), params.at("backbone.fc.bias"));
}

AuFeatures attention_au_features(const Tensor& z, const ModelParams& params, const ModelConfig& c) {
  if (z.rank() != 2 || z.dim(1) != c.d) {
    throw ShapeError("attention_au_features: expected z (M," + std::to_string(c.d) + "), got " +
                     to_string(z.shape()));
  }
  const std::size_t m = z.dim(0);
  AuFeatures out;
  std::vector<Tensor> rows;
  for (std::size_t k = 0; k < c.num_aus; ++k) {
    const std::string a = "attention." + std::to_string(k);
    Tensor logits = add(matmul(z, params.at(a + ".weight")), params.at(a + ".bias"));
    Tensor gate = c.attention == AttentionKind::sigmoid ? sigmoid(logits) : softmax(logits, -1);
    Tensor head = mul(gate, z);
    rows.push_back(reshape(head, {m, 1, c.d}));
    out.heads.push_back(std::move(head));
  }
  out.stacked = concat(rows, 1);
  return out;
}

Tensor au_detect(const AuFeatures& features, const ModelParams& params, const ModelConfig& c) {
  if (features.heads.size() != c.num_aus) {
    throw ShapeError("au_detect: got " + std::to_string(features.heads.size()) + " AU heads, expected " +
                     std::to_string(c.num_aus));
  }
  std::vector<Tensor> probs;
  for (std::size_t k = 0; k < c.num_aus; ++k) {
    const std::string a = "detector." + std::to_string(k);
    Tensor h = relu(add(matmul(features.heads[k], params.at(a + ".hidden.weight")),
                        params.at(a + ".hidden.bias")));
    probs.push_back(sigmoid(add(matmul(h, params.at(a + ".out.weight")), params.at(a + ".out.bias"))));
  }
  return concat(probs, 1);
}

Tensor gcn_forward(const Tensor& X, const Tensor& graph_op, const ModelParams& params,
                   const ModelConfig& c) {
  if (X.rank() != 3 || X.dim(1) != c.num_aus || X.dim(2) != c.d) {
    throw ShapeError("gcn_forward: expected X (M," + std::to_string(c.num_aus) + "," +
                     std::to_string(c.d) + "), got " + to_string(X.shape()));
  }
  if (graph_op.shape() != Shape{c.num_aus, c.num_aus}) {
    throw ShapeError("gcn_forward: graph " + to_string(graph_op.shape()) + " does not match K=" +
                     std::to_string(c.num_aus));
  }
  const std::size_t m = X.dim(0), k = c.num_aus;
  auto layer = [&](const Tensor& z, const Tensor& w) {
    const std::size_t in = z.dim(2), out = w.dim(1);
    Tensor zw = reshape(matmul(reshape(z, {m * k, in}), w), {m, k, out});
    return relu(matmul(graph_op, zw));
  };
  Tensor z1 = layer(X, params.at("gcn.0.weight"));
  return layer(z1, params.at("gcn.1.weight"));
}

FusedFeatures aggregate_and_fuse(const Tensor& X, const Tensor& gcn_out, const ModelParams& params,
                                 const ModelConfig& c) {
  FusedFeatures f;
  f.z_r = sum(gcn_out, 1);
  f.z_o = add(matmul(sum(X, 1), params.at("fusion.proj.weight")), params.at("fusion.proj.bias"));
  f.fused = c.fusion == FusionKind::sum ? add(f.z_o, f.z_r) : concat({f.z_o, f.z_r}, 1);
  return f;
}

Classification classify(const Tensor& fused, const ModelParams& params, const ModelConfig& c) {
  if (fused.rank() != 2 || fused.dim(1) != c.fused_width()) {
    throw ShapeError("classify: expected fused (M," + std::to_string(c.fused_width()) + "), got " +
                     to_string(fused.shape()));
  }
  Classification out;
  out.logits = add(matmul(fused, params.at("classifier.weight")), params.at("classifier.bias"));
  out.probs = softmax(out.logits, -1);
  return out;
}

ForwardOutput forward(const Tensor& flow, const Tensor& graph_op, const ModelParams& params,
                      const ModelConfig& config) {
  ForwardOutput out;
  out.z = backbone_forward(flow, params, config);
  auto features = attention_au_features(out.z, params, config);
  out.X = features.stacked;
  out.au_probs = au_detect(features, params, config);
  out.gcn_out = gcn_forward(out.X, graph_op, params, config);
  auto fused = aggregate_and_fuse(out.X, out.gcn_out, params, config);
  out.z_r = fused.z_r;
  out.z_o = fused.z_o;
  out.fused = fused.fused;
  auto cls = classify(out.fused, params, config);
  out.logits = cls.logits;
  out.class_probs = cls.probs;
  return out;
}

}  // namespace meraugcn
