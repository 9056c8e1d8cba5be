#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "meraugcn/augraph.hpp"
#include "meraugcn/label_matrix.hpp"
#include "meraugcn/losses.hpp"
#include "meraugcn/manifest.hpp"
#include "meraugcn/metrics.hpp"
#include "meraugcn/model.hpp"
#include "meraugcn/protocols.hpp"

namespace meraugcn {

struct TrainConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  double lambda = kDefaultLambda;
  std::uint64_t seed = 0;
  bool augment = false;
  AttentionKind attention = AttentionKind::sigmoid;
  LossKind loss = LossKind::balanced;
  GraphKind graph = GraphKind::pruned;
  FusionKind fusion = FusionKind::sum;
  bool checkpoint_every_epoch = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Base model config with the ablation switches of `train` applied and K
/// taken from the graph.
ModelConfig effective_model_config(ModelConfig base, const TrainConfig& train, const AuGraph& graph);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;  // steps taken

  static AdamState fresh(const ModelParams& params);
};

/// One ADAM update of a single tensor at step t >= 1 (bias-corrected).
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const TrainConfig& config, std::size_t t);

/// Updates every parameter from its accumulated gradient (missing gradient =
/// zero). All gradients are checked first; a non-finite one throws
/// NumericError and nothing is modified.
void adam_step(ModelParams& params, AdamState& state, const TrainConfig& config, std::size_t t);

/// Loaded, label-remapped training/evaluation examples.
struct Example {
  std::string sample_id;
  std::vector<double> flow;  // 2 * H * W
  std::vector<std::uint8_t> au;  // over the graph's nodes
  std::size_t class_label = 0;
};

/// AU labels follow the manifest's node order; they are mapped onto the
/// graph's nodes by AU id (nodes missing from the manifest are negative).
/// With `augment`, every record expands into its full variant plan.
std::vector<Example> load_examples(const Manifest& manifest, std::span<const std::size_t> indices,
                                   const AuGraph& graph, const ModelConfig& config, bool augment);

struct Batch {
  Tensor flow;  // (M, 2, H, W)
  LabelMatrix au;
  std::vector<std::size_t> classes;
};

Batch make_batch(const std::vector<Example>& examples, std::span<const std::size_t> order,
                 const ModelConfig& config);

/// Fisher-Yates permutation of 0..n-1 from the (seed, epoch) stream.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;      // 1-based
  double detection = 0.0;     // sample-weighted mean over batches
  double classification = 0.0;
  double total = 0.0;
  double classification_sum = 0.0;  // summed cross-entropy over the epoch's samples
  double train_war = 0.0;     // from the forward passes taken during the epoch
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::string to_csv() const;
};

struct TrainResult {
  ModelConfig config;
  ModelParams params;
  TrainHistory history;
};

/// Checkpoints go to `checkpoint_path` after the last epoch (and to
/// <path>.epochNNN after each epoch with checkpoint_every_epoch); an empty
/// path disables them.
TrainResult train(const Manifest& manifest, const Fold& fold, const AuGraph& graph,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::string& checkpoint_path = "");

struct Predictions {
  std::vector<std::string> sample_ids;
  std::vector<std::size_t> predicted;
  std::vector<std::size_t> truth;
  std::vector<double> au_probs;  // row-major M x K
  LabelMatrix au_predicted;
  LabelMatrix au_truth;
};

Predictions predict(const ModelParams& params, const ModelConfig& config, const AuGraph& graph,
                    const Manifest& manifest, std::span<const std::size_t> indices,
                    std::size_t batch_size = 64);

MetricsReport report_from_predictions(const Predictions& predictions, const AuGraph& graph,
                                      std::string label);

/// Scores the fold's test records. Empty test fold -> ProtocolError.
MetricsReport evaluate(const ModelParams& params, const ModelConfig& config, const AuGraph& graph,
                       const Manifest& manifest, const Fold& fold);

/// First `k` nodes of the pruned graph with their induced edges.
AuGraph small_graph(std::size_t k);

/// Tolerance of the end-to-end check: the primitive rule plus a relative-
/// error denominator floor of 1e-6 * max(1, |loss|).
ad::GradTolerance model_grad_tolerance();

/// End-to-end gradient check of the joint loss on the tiny configuration
/// (K=3, M=2, random flow, labels and weights drawn from `seed`), honouring
/// the attention/fusion/loss switches and lambda of `train`.
ad::GradCheckReport joint_loss_gradcheck(std::uint64_t seed, const TrainConfig& train = {},
                                         double h = 1e-5, ad::GradTolerance tol = model_grad_tolerance());

}  // namespace meraugcn
