#include "meraugcn/losses.hpp"

#include <cmath>

#include "meraugcn/errors.hpp"
#include "meraugcn/ops.hpp"

namespace meraugcn {

using namespace ad;

LossKind parse_loss_kind(std::string_view name) {
  if (name == "balanced") return LossKind::balanced;
  if (name == "focal") return LossKind::focal;
  throw ValidationError("unknown loss kind '" + std::string(name) + "' (expected balanced|focal)");
}

std::string_view to_string(LossKind kind) { return kind == LossKind::balanced ? "balanced" : "focal"; }

std::vector<double> batch_alpha(const LabelMatrix& au_labels) {
  if (au_labels.rows == 0) throw ContractError("batch_alpha: batch is empty (M = 0)");
  std::vector<double> alpha(au_labels.cols, 0.0);
  for (std::size_t i = 0; i < au_labels.cols; ++i) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < au_labels.rows; ++j) positives += au_labels(j, i);
    alpha[i] = static_cast<double>(positives) / static_cast<double>(au_labels.rows);
  }
  return alpha;
}

Tensor detection_loss(const Tensor& probs, const LabelMatrix& au_labels, std::span<const double> alphas) {
  if (probs.rank() != 2 || probs.dim(0) != au_labels.rows || probs.dim(1) != au_labels.cols) {
    throw ShapeError("detection_loss: probs " + to_string(probs.shape()) + " vs labels (" +
                     std::to_string(au_labels.rows) + "," + std::to_string(au_labels.cols) + ")");
  }
  if (alphas.size() != au_labels.cols) {
    throw ShapeError("detection_loss: " + std::to_string(alphas.size()) + " alphas for K=" +
                     std::to_string(au_labels.cols));
  }
  if (au_labels.rows == 0) throw ContractError("detection_loss: batch is empty");
  for (double p : probs.values()) {
    if (!std::isfinite(p)) throw NumericError("detection_loss: non-finite probability");
  }
  const std::size_t m = au_labels.rows, k = au_labels.cols;

  Tensor y = Tensor::constant({m, k}, {au_labels.data.begin(), au_labels.data.end()});
  Tensor not_y = Tensor::constant({m, k}, [&] {
    std::vector<double> v(m * k);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 - au_labels.data[i];
    return v;
  }());
  Tensor a = Tensor::constant({k}, {alphas.begin(), alphas.end()});
  Tensor not_a = Tensor::constant({k}, [&] {
    std::vector<double> v(k);
    for (std::size_t i = 0; i < k; ++i) v[i] = 1.0 - alphas[i];
    return v;
  }());

  Tensor p = clamp(probs, kProbClamp, 1.0 - kProbClamp);
  Tensor q = add_scalar(scale(p, -1.0), 1.0);  // 1 - p
  const double norm = 1.0 / (1.0 + kLogOffset);
  Tensor log_pos = log(scale(add_scalar(p, kLogOffset), norm));
  Tensor log_neg = log(scale(add_scalar(scale(p, -1.0), 1.0 + kLogOffset), norm));

  Tensor pos = mul(mul(mul(a, mul(q, q)), y), log_pos);
  Tensor neg = mul(mul(mul(not_a, mul(p, p)), not_y), log_neg);
  return scale(sum(add(pos, neg)), -1.0 / static_cast<double>(k * m));
}

Tensor focal_loss_plain(const Tensor& probs, const LabelMatrix& au_labels) {
  const std::vector<double> alphas(au_labels.cols, kPlainFocalAlpha);
  return detection_loss(probs, au_labels, alphas);
}

Tensor classification_loss(const Tensor& logits, std::span<const std::size_t> class_labels) {
  if (logits.rank() != 2 || logits.dim(0) != class_labels.size()) {
    throw ShapeError("classification_loss: logits " + to_string(logits.shape()) + " for " +
                     std::to_string(class_labels.size()) + " labels");
  }
  const std::size_t m = logits.dim(0), c = logits.dim(1);
  if (m == 0) throw ContractError("classification_loss: batch is empty");
  std::vector<double> onehot(m * c, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (class_labels[i] >= c) {
      throw ContractError("classification_loss: label " + std::to_string(class_labels[i]) +
                          " out of range for C=" + std::to_string(c));
    }
    onehot[i * c + class_labels[i]] = 1.0;
  }
  Tensor picked = mul(log_softmax(logits, -1), Tensor::constant({m, c}, std::move(onehot)));
  return scale(sum(picked), -1.0 / static_cast<double>(m));
}

LossBreakdown joint_loss(const Tensor& classification, const Tensor& detection, double lambda,
                         std::vector<double> alphas) {
  if (!(lambda >= 0.0)) throw ContractError("joint_loss: lambda must be non-negative");
  LossBreakdown out;
  out.total = add(classification, scale(detection, lambda));
  out.classification = classification.item();
  out.detection = detection.item();
  out.total_value = out.total.item();
  out.alphas = std::move(alphas);
  return out;
}

}  // namespace meraugcn
