#include "meraugcn/metrics.hpp"

#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "meraugcn/errors.hpp"

namespace meraugcn {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto v : counts_) n += v;
  return n;
}

std::size_t ConfusionMatrix::support(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t p = 0; p < classes_; ++p) n += at(c, p);
  return n;
}

std::size_t ConfusionMatrix::predicted(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < classes_; ++t) n += at(t, c);
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw ContractError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(std::span<const std::size_t> preds, std::span<const std::size_t> truth,
                          std::size_t classes) {
  if (preds.size() != truth.size()) {
    throw ContractError("confusion: " + std::to_string(preds.size()) + " predictions for " +
                        std::to_string(truth.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= classes || truth[i] >= classes) {
      throw ContractError("confusion: class id out of range at sample " + std::to_string(i));
    }
    cm.add(truth[i], preds[i]);
  }
  return cm;
}

double war(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw ContractError("war: no scored samples");
  std::size_t correct = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) correct += cm.tp(c);
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::size_t classes_present(const ConfusionMatrix& cm) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) n += cm.support(c) > 0;
  return n;
}

double uar(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ContractError("uar: no scored samples");
  double acc = 0.0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto nc = cm.support(c);
    if (nc > 0) acc += static_cast<double>(cm.tp(c)) / static_cast<double>(nc);
  }
  return acc / static_cast<double>(classes_present(cm));
}

namespace {

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

F1Scores f1_scores(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw ContractError("f1_scores: no scored samples");
  F1Scores out;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const double f1 = f1_from_counts(cm.tp(c), cm.fp(c), cm.fn(c));
    out.per_class.push_back(f1);
    out.macro += f1;
    out.weighted += static_cast<double>(cm.support(c)) / static_cast<double>(n) * f1;
  }
  out.macro /= static_cast<double>(cm.classes());
  return out;
}

std::vector<double> au_f1(const LabelMatrix& predicted, const LabelMatrix& truth) {
  if (predicted.rows != truth.rows || predicted.cols != truth.cols) {
    throw ContractError("au_f1: prediction and truth shapes differ");
  }
  std::vector<double> out(truth.cols);
  for (std::size_t k = 0; k < truth.cols; ++k) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.rows; ++i) {
      const bool p = predicted(i, k), t = truth(i, k);
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    out[k] = f1_from_counts(tp, fp, fn);
  }
  return out;
}

LabelMatrix threshold_probs(std::span<const double> probs, std::size_t rows, std::size_t cols,
                            double threshold) {
  if (probs.size() != rows * cols) throw ContractError("threshold_probs: size mismatch");
  LabelMatrix out(rows, cols);
  for (std::size_t i = 0; i < probs.size(); ++i) out.data[i] = probs[i] >= threshold ? 1 : 0;
  return out;
}

MetricsReport make_report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.confusion = cm;
  r.war = war(cm);
  r.uar = uar(cm);
  auto f1 = f1_scores(cm);
  r.f1_macro = f1.macro;
  r.wf1 = f1.weighted;
  r.per_class_f1 = std::move(f1.per_class);
  r.classes_present = classes_present(cm);
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    if (cm.support(c) == 0 && cm.predicted(c) == 0) r.empty_classes.push_back(c);
  }
  return r;
}

MetricsReport make_report(const ConfusionMatrix& cm, const LabelMatrix& au_pred,
                          const LabelMatrix& au_truth, std::vector<int> au_nodes) {
  MetricsReport r = make_report(cm);
  r.per_au_f1 = au_f1(au_pred, au_truth);
  if (au_nodes.size() != r.per_au_f1.size()) throw ContractError("make_report: AU node list length mismatch");
  r.au_nodes = std::move(au_nodes);
  return r;
}

MetricsReport average_reports(const std::vector<MetricsReport>& reports, std::string label) {
  if (reports.empty()) throw ContractError("average_reports: no reports");
  MetricsReport avg;
  avg.label = std::move(label);
  avg.confusion = ConfusionMatrix(reports.front().confusion.classes());
  avg.per_class_f1.assign(reports.front().per_class_f1.size(), 0.0);
  avg.per_au_f1.assign(reports.front().per_au_f1.size(), 0.0);
  avg.au_nodes = reports.front().au_nodes;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    avg.confusion += r.confusion;
    avg.war += r.war / n;
    avg.uar += r.uar / n;
    avg.f1_macro += r.f1_macro / n;
    avg.wf1 += r.wf1 / n;
    if (r.per_class_f1.size() != avg.per_class_f1.size() || r.per_au_f1.size() != avg.per_au_f1.size()) {
      throw ContractError("average_reports: fold reports have different shapes");
    }
    for (std::size_t c = 0; c < avg.per_class_f1.size(); ++c) avg.per_class_f1[c] += r.per_class_f1[c] / n;
    for (std::size_t k = 0; k < avg.per_au_f1.size(); ++k) avg.per_au_f1[k] += r.per_au_f1[k] / n;
  }
  avg.classes_present = classes_present(avg.confusion);
  for (std::size_t c = 0; c < avg.confusion.classes(); ++c) {
    if (avg.confusion.support(c) == 0 && avg.confusion.predicted(c) == 0) avg.empty_classes.push_back(c);
  }
  return avg;
}

namespace {

template <class T>
std::string join(const std::vector<T>& values, char sep) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? std::string(1, sep) : "") << values[i];
  return os.str();
}

}  // namespace

std::string report_to_text(const MetricsReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  if (!r.label.empty()) os << "label=" << r.label << '\n';
  os << "samples=" << r.confusion.total() << '\n';
  os << "war=" << r.war << '\n';
  os << "uar=" << r.uar << '\n';
  os << "f1=" << r.f1_macro << '\n';
  os << "wf1=" << r.wf1 << '\n';
  os << "classes_present=" << r.classes_present << '\n';
  os << "per_class_f1=" << join(r.per_class_f1, ',') << '\n';
  os << "empty_classes=" << join(r.empty_classes, ',') << '\n';
  if (!r.per_au_f1.empty()) {
    os << "au_nodes=" << join(r.au_nodes, ',') << '\n';
    os << "per_au_f1=" << join(r.per_au_f1, ',') << '\n';
  }
  os << "confusion=";
  for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
    if (t) os << ';';
    for (std::size_t p = 0; p < r.confusion.classes(); ++p) os << (p ? "," : "") << r.confusion.at(t, p);
  }
  os << '\n';
  return os.str();
}

std::string report_to_json(const MetricsReport& r) {
  nlohmann::json cm = nlohmann::json::array();
  for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < r.confusion.classes(); ++p) row.push_back(r.confusion.at(t, p));
    cm.push_back(row);
  }
  nlohmann::json j{{"label", r.label},
                   {"samples", r.confusion.total()},
                   {"war", r.war},
                   {"uar", r.uar},
                   {"f1", r.f1_macro},
                   {"wf1", r.wf1},
                   {"classes_present", r.classes_present},
                   {"per_class_f1", r.per_class_f1},
                   {"empty_classes", r.empty_classes},
                   {"au_nodes", r.au_nodes},
                   {"per_au_f1", r.per_au_f1},
                   {"confusion", cm}};
  return j.dump(2) + "\n";
}

}  // namespace meraugcn
