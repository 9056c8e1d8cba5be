#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "meraugcn/augraph.hpp"
#include "meraugcn/gradcheck.hpp"
#include "meraugcn/tensor.hpp"

namespace meraugcn {

using ad::Shape;
using ad::Tensor;

enum class AttentionKind { sigmoid, softmax };
enum class FusionKind { sum, concat };

AttentionKind parse_attention_kind(std::string_view name);
FusionKind parse_fusion_kind(std::string_view name);
std::string_view to_string(AttentionKind kind);
std::string_view to_string(FusionKind kind);

struct ModelConfig {
  std::size_t input_h = 28;
  std::size_t input_w = 28;
  std::size_t d = 1024;  // global feature width
  std::size_t d1 = 256;  // first GCN layer width
  std::size_t d2 = 64;   // second GCN layer width, also the fused width
  std::size_t num_classes = 5;
  std::size_t num_aus = 12;  // K; always taken from the graph
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t detector_hidden = 64;
  AttentionKind attention = AttentionKind::sigmoid;
  FusionKind fusion = FusionKind::sum;
  bool normalize_graph = false;

  void validate() const;
  /// Flattened feature count of one backbone path.
  std::size_t path_features() const;
  std::size_t fused_width() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Tiny configuration used by gradient checks: 8x8 input, d=16, d1=8, d2=4.
ModelConfig tiny_model_config(std::size_t num_aus = 3);

/// theta: backbone + attention + detectors; phi: GCN + fusion + classifier.
enum class Partition { theta, phi };

struct ParamSpec {
  std::string name;
  Shape shape;
  Partition partition;
  std::size_t fan_in = 0;
  bool is_bias = false;
};

/// Every parameter tensor the network owns, in a fixed order.
std::vector<ParamSpec> parameter_schedule(const ModelConfig& config);

class ModelParams {
public:
  struct Entry {
    std::string name;
    Partition partition;
    Tensor tensor;
  };

  void add(std::string name, Partition partition, Tensor tensor);
  const Tensor& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;
  void zero_grad();
  std::vector<ad::NamedTensor> named() const;

private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Fan-in scaled uniform weights U(-b, b) with b = sqrt(6/fan_in) in theta
/// and 1/sqrt(fan_in) in phi; zero biases. Each tensor draws from its own
/// stream keyed by (seed, name).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// K x K propagation matrix: the raw adjacency, or D^-1/2 G D^-1/2.
Tensor graph_operator(const AuGraph& graph, bool normalize);

struct AuFeatures {
  std::vector<Tensor> heads;  // K tensors of (M, d)
  Tensor stacked;             // (M, K, d)
};

struct ForwardOutput {
  Tensor z;            // (M, d)
  Tensor X;            // (M, K, d)
  Tensor au_probs;     // (M, K)
  Tensor gcn_out;      // (M, K, d2)
  Tensor z_r;          // (M, d2)
  Tensor z_o;          // (M, d2)
  Tensor fused;        // (M, d2) or (M, 2*d2)
  Tensor logits;       // (M, C)
  Tensor class_probs;  // (M, C)
};

/// flow (M, 2, H, W) is data: each channel feeds its own conv path; path
/// outputs are concatenated and projected to (M, d).
Tensor backbone_forward(const Tensor& flow, const ModelParams& params, const ModelConfig& config);

/// Row k of X is gate_k(z A_k + b_k) * z, gate = sigmoid, or softmax over the
/// d positions for the softmax-attention variant.
AuFeatures attention_au_features(const Tensor& z, const ModelParams& params,
                                 const ModelConfig& config);

/// Per-AU MLP d -> hidden -> 1 (relu, sigmoid). Returns (M, K).
Tensor au_detect(const AuFeatures& features, const ModelParams& params, const ModelConfig& config);

/// Two layers of Z' = relu(G Z W). X (M, K, d) -> (M, K, d2).
Tensor gcn_forward(const Tensor& X, const Tensor& graph_op, const ModelParams& params,
                   const ModelConfig& config);

struct FusedFeatures {
  Tensor z_r;
  Tensor z_o;
  Tensor fused;
};

FusedFeatures aggregate_and_fuse(const Tensor& X, const Tensor& gcn_out, const ModelParams& params,
                                 const ModelConfig& config);

struct Classification {
  Tensor logits;
  Tensor probs;
};

Classification classify(const Tensor& fused, const ModelParams& params, const ModelConfig& config);

ForwardOutput forward(const Tensor& flow, const Tensor& graph_op, const ModelParams& params,
                      const ModelConfig& config);

}  // namespace meraugcn
