#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "meraugcn/label_matrix.hpp"
#include "meraugcn/tensor.hpp"

namespace meraugcn {

using ad::Tensor;

enum class LossKind { balanced, focal };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);

/// Default weight on the detection term of the joint objective.
inline constexpr double kDefaultLambda = 0.75;
/// Fixed balance factor of the plain focal-loss variant.
inline constexpr double kPlainFocalAlpha = 0.25;
/// Offset inside both logarithms of the detection loss.
inline constexpr double kLogOffset = 0.05;
inline constexpr double kProbClamp = 1e-12;

/// alpha_i = (positives in column i) / M.
std::vector<double> batch_alpha(const LabelMatrix& au_labels);

/// Balanced focal detection loss over an (M, K) probability tensor:
///   -1/(K M) sum_j sum_i [ a_i (1-p)^2 y log((p+0.05)/1.05)
///                        + (1-a_i) p^2 (1-y) log((1.05-p)/1.05) ]
/// Probabilities are clamped to [1e-12, 1-1e-12] first.
Tensor detection_loss(const Tensor& probs, const LabelMatrix& au_labels,
                      std::span<const double> alphas);

/// detection_loss with every alpha fixed to 0.25.
Tensor focal_loss_plain(const Tensor& probs, const LabelMatrix& au_labels);

/// Batch mean of -log softmax(logits)[label] for (M, C) logits.
Tensor classification_loss(const Tensor& logits, std::span<const std::size_t> class_labels);

struct LossBreakdown {
  Tensor total;  // differentiable
  double detection = 0.0;
  double classification = 0.0;
  double total_value = 0.0;
  std::vector<double> alphas;
};

/// total = classification + lambda * detection.
LossBreakdown joint_loss(const Tensor& classification, const Tensor& detection, double lambda,
                         std::vector<double> alphas = {});

}  // namespace meraugcn
