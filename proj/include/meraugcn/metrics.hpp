#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "meraugcn/label_matrix.hpp"

namespace meraugcn {

/// C x C counts, rows = truth, columns = prediction.
class ConfusionMatrix {
public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::size_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  void add(std::size_t truth, std::size_t pred, std::size_t n = 1) { counts_[truth * classes_ + pred] += n; }

  std::size_t total() const;
  std::size_t support(std::size_t c) const;  // N_c: row sum
  std::size_t predicted(std::size_t c) const;  // column sum
  std::size_t tp(std::size_t c) const { return at(c, c); }
  std::size_t fp(std::size_t c) const { return predicted(c) - tp(c); }
  std::size_t fn(std::size_t c) const { return support(c) - tp(c); }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

private:
  std::size_t classes_ = 0;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion(std::span<const std::size_t> preds, std::span<const std::size_t> truth,
                          std::size_t classes);

/// sum_c TP_c / N. Throws ContractError when N = 0.
double war(const ConfusionMatrix& cm);
/// Mean recall over classes with N_c > 0.
double uar(const ConfusionMatrix& cm);
/// Number of classes with N_c > 0 (the divisor of uar).
std::size_t classes_present(const ConfusionMatrix& cm);

struct F1Scores {
  std::vector<double> per_class;
  double macro = 0.0;
  double weighted = 0.0;
};

/// F1_c = 2TP/(2TP+FP+FN), 0/0 -> 0; macro mean and support-weighted mean.
F1Scores f1_scores(const ConfusionMatrix& cm);

/// Per-column binary F1 of 0/1 label matrices (0/0 -> 0).
std::vector<double> au_f1(const LabelMatrix& predicted, const LabelMatrix& truth);

/// probs (row-major M x K) >= threshold -> 1.
LabelMatrix threshold_probs(std::span<const double> probs, std::size_t rows, std::size_t cols,
                            double threshold = 0.5);

struct MetricsReport {
  ConfusionMatrix confusion;
  double war = 0.0;
  double uar = 0.0;
  double f1_macro = 0.0;
  double wf1 = 0.0;
  std::vector<double> per_class_f1;
  std::size_t classes_present = 0;
  /// Classes absent from both truth and predictions (their F1 is 0 by rule).
  std::vector<std::size_t> empty_classes;
  std::vector<double> per_au_f1;  // empty when AU detection was not scored
  std::vector<int> au_nodes;
  std::string label;
};

MetricsReport make_report(const ConfusionMatrix& cm);
MetricsReport make_report(const ConfusionMatrix& cm, const LabelMatrix& au_pred,
                          const LabelMatrix& au_truth, std::vector<int> au_nodes);

/// Averages the scalar metrics and per-AU F1 of several fold reports; the
/// confusion matrix of the result is the sum over folds.
MetricsReport average_reports(const std::vector<MetricsReport>& reports, std::string label = "average");

/// key=value lines.
std::string report_to_text(const MetricsReport& report);
std::string report_to_json(const MetricsReport& report);

}  // namespace meraugcn
