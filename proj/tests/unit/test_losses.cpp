#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "meraugcn/errors.hpp"
#include "meraugcn/gradcheck.hpp"
#include "meraugcn/losses.hpp"
#include "meraugcn/ops.hpp"
#include "meraugcn/rng.hpp"

using namespace meraugcn;
using ad::Shape;

namespace {

// Scalar evaluation of the balanced focal detection loss.
double detection_oracle(const std::vector<double>& p, const LabelMatrix& y,
                        const std::vector<double>& alpha) {
  double s = 0.0;
  for (std::size_t j = 0; j < y.rows; ++j)
    for (std::size_t i = 0; i < y.cols; ++i) {
      const double pi = p[j * y.cols + i];
      const double yi = y(j, i);
      s += alpha[i] * (1 - pi) * (1 - pi) * yi * std::log((pi + 0.05) / 1.05) +
           (1 - alpha[i]) * pi * pi * (1 - yi) * std::log((1.05 - pi) / 1.05);
    }
  return -s / static_cast<double>(y.rows * y.cols);
}

double ce_oracle(const std::vector<double>& logits, std::size_t c, const std::vector<std::size_t>& labels) {
  double s = 0.0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += std::exp(logits[j * c + k]);
    s += std::log(z) - logits[j * c + labels[j]];
  }
  return s / static_cast<double>(labels.size());
}

LabelMatrix random_labels(Rng& rng, std::size_t m, std::size_t k) {
  LabelMatrix y(m, k);
  for (auto& v : y.data) v = static_cast<std::uint8_t>(rng.below(2));
  return y;
}

std::vector<double> random_probs(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  for (auto& v : p) v = rng.uniform(0.02, 0.98);
  return p;
}

std::vector<double> count_alpha(const LabelMatrix& y) {
  std::vector<double> a(y.cols, 0.0);
  for (std::size_t i = 0; i < y.cols; ++i) {
    int n = 0;
    for (std::size_t j = 0; j < y.rows; ++j) n += y(j, i) == 1;
    a[i] = static_cast<double>(n) / static_cast<double>(y.rows);
  }
  return a;
}

}  // namespace

TEST(BatchAlpha, Examples) {
  EXPECT_EQ(batch_alpha(LabelMatrix(4, 1, {1, 1, 1, 1})), (std::vector<double>{1.0}));
  EXPECT_EQ(batch_alpha(LabelMatrix(4, 1, {0, 0, 0, 0})), (std::vector<double>{0.0}));
  EXPECT_EQ(batch_alpha(LabelMatrix(4, 1, {1, 0, 1, 0})), (std::vector<double>{0.5}));
  EXPECT_THROW(batch_alpha(LabelMatrix(0, 3)), ContractError);
}

TEST(BatchAlpha, MatchesCountingOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto y = random_labels(rng, 1 + rng.below(64), 1 + rng.below(17));
    EXPECT_EQ(batch_alpha(y), count_alpha(y));
  }
}

TEST(LabelMatrix, Validation) {
  EXPECT_THROW(LabelMatrix(2, 2, {1, 0, 1}), ShapeError);
  EXPECT_THROW(LabelMatrix(1, 2, {1, 2}), ValidationError);
}

TEST(DetectionLoss, HandCases) {
  const auto one = [](double p, std::uint8_t y, double a) {
    return detection_loss(Tensor::constant({1, 1}, {p}), LabelMatrix(1, 1, {y}), std::vector<double>{a})
        .item();
  };
  EXPECT_NEAR(one(1.0, 1, 1.0), 0.0, 1e-15);
  EXPECT_NEAR(one(0.0, 0, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(one(0.5, 1, 0.5), 0.0808, 1e-4);
  EXPECT_NEAR(one(0.5, 1, 0.5), -0.5 * 0.25 * std::log(0.55 / 1.05), 1e-15);
}

TEST(DetectionLoss, MatchesScalarOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(6);
    const auto y = random_labels(rng, m, k);
    const auto p = random_probs(rng, m * k);
    const auto a = batch_alpha(y);
    const double got = detection_loss(Tensor::constant({m, k}, p), y, a).item();
    EXPECT_NEAR(got, detection_oracle(p, y, a), 1e-14);
    EXPECT_GE(got, 0.0);
  }
}

TEST(DetectionLoss, PermutationInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.below(6), k = 2 + rng.below(4);
    const auto y = random_labels(rng, m, k);
    const auto p = random_probs(rng, m * k);
    const auto a = batch_alpha(y);
    const double base = detection_loss(Tensor::constant({m, k}, p), y, a).item();
    // Reverse batch order and rotate AU order.
    LabelMatrix y2(m, k);
    std::vector<double> p2(m * k), a2(k);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t jj = m - 1 - j, ii = (i + 1) % k;
        y2(jj, ii) = y(j, i);
        p2[jj * k + ii] = p[j * k + i];
        a2[ii] = a[i];
      }
    EXPECT_NEAR(detection_loss(Tensor::constant({m, k}, p2), y2, a2).item(), base, 1e-14);
  }
}

TEST(DetectionLoss, PositiveTermNonIncreasingInP) {
  for (double alpha : {0.1, 0.5, 1.0}) {
    double prev = 1e300;
    for (int i = 1; i < 1000; ++i) {
      const double p = i / 1000.0;
      const double v =
          detection_loss(Tensor::constant({1, 1}, {p}), LabelMatrix(1, 1, {1}), std::vector<double>{alpha}).item();
      EXPECT_LE(v, prev + 1e-15);
      prev = v;
    }
  }
}

TEST(DetectionLoss, ErrorsAndClamp) {
  const LabelMatrix y(1, 2, {1, 0});
  EXPECT_THROW(detection_loss(Tensor::constant({1, 2}, {0.5, NAN}), y, std::vector<double>{0.5, 0.5}),
               NumericError);
  EXPECT_THROW(detection_loss(Tensor::constant({1, 3}, {0.5, 0.5, 0.5}), y, std::vector<double>{0.5, 0.5}),
               ShapeError);
  EXPECT_THROW(detection_loss(Tensor::constant({1, 2}, {0.5, 0.5}), y, std::vector<double>{0.5}), ShapeError);
  const double v = detection_loss(Tensor::constant({1, 2}, {0.0, 1.0}), y, std::vector<double>{1.0, 0.0}).item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, detection_oracle({1e-12, 1 - 1e-12}, y, {1.0, 0.0}), 1e-12);
}

TEST(FocalPlain, Examples) {
  const auto p = Tensor::constant({1, 1}, {0.5});
  const LabelMatrix y(1, 1, {1});
  EXPECT_NEAR(focal_loss_plain(Tensor::constant({1, 1}, {1.0}), y).item(), 0.0, 1e-15);
  EXPECT_NEAR(focal_loss_plain(p, y).item(), 0.0404, 1e-4);
  EXPECT_NEAR(focal_loss_plain(p, y).item(), -0.25 * 0.25 * std::log(0.55 / 1.05), 1e-15);
  // Batch positive rate 0.5 differs from 0.25, so the two losses differ.
  const LabelMatrix y2(2, 1, {1, 0});
  const auto p2 = Tensor::constant({2, 1}, {0.3, 0.6});
  EXPECT_NE(focal_loss_plain(p2, y2).item(), detection_loss(p2, y2, batch_alpha(y2)).item());
  EXPECT_NEAR(focal_loss_plain(p2, y2).item(), detection_oracle({0.3, 0.6}, y2, {0.25}), 1e-15);
}

TEST(ClassificationLoss, Examples) {
  const std::vector<std::size_t> zero{0};
  EXPECT_NEAR(classification_loss(Tensor::constant({1, 5}, {0, 0, 0, 0, 0}), zero).item(), std::log(5.0), 1e-9);
  EXPECT_NEAR(classification_loss(Tensor::constant({1, 5}, {2, 0, 0, 0, 0}), zero).item(),
              std::log(1.0 + 4.0 * std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(classification_loss(Tensor::constant({1, 5}, {2, 0, 0, 0, 0}), zero).item(), 0.4327, 1e-4);
  EXPECT_NEAR(classification_loss(Tensor::constant({1, 3}, {2, 0, 0}), zero).item(), 0.2395, 1e-4);
  EXPECT_LT(classification_loss(Tensor::constant({1, 5}, {800, 0, 0, 0, 0}), zero).item(), 1e-300 + 1e-12);
  const std::vector<std::size_t> bad{5};
  EXPECT_THROW(classification_loss(Tensor::constant({1, 5}, {0, 0, 0, 0, 0}), bad), ContractError);
  EXPECT_THROW(classification_loss(Tensor::constant({2, 5}, std::vector<double>(10, 0.0)), zero), ShapeError);
}

TEST(ClassificationLoss, MatchesOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(8);
    std::vector<double> logits(m * 5);
    for (auto& v : logits) v = 3.0 * rng.normal();
    std::vector<std::size_t> labels(m);
    for (auto& l : labels) l = rng.below(5);
    const double got = classification_loss(Tensor::constant({m, 5}, logits), labels).item();
    EXPECT_NEAR(got, ce_oracle(logits, 5, labels), 1e-12);
    EXPECT_GE(got, 0.0);
  }
}

TEST(JointLoss, Examples) {
  const auto r = joint_loss(Tensor::scalar(1.0), Tensor::scalar(0.2), 0.75);
  EXPECT_NEAR(r.total_value, 1.15, 1e-12);
  EXPECT_NEAR(r.total.item(), 1.15, 1e-12);
  EXPECT_EQ(r.detection, 0.2);
  EXPECT_EQ(r.classification, 1.0);
  EXPECT_EQ(joint_loss(Tensor::scalar(1.3), Tensor::scalar(0.4), 0.0).total_value, 1.3);
  EXPECT_EQ(kDefaultLambda, 0.75);
  EXPECT_THROW(joint_loss(Tensor::scalar(1.0), Tensor::scalar(0.2), -0.1), ContractError);
}

TEST(JointLoss, Additivity) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(3);
    const auto y = random_labels(rng, m, k);
    std::vector<double> logits(m * 5);
    for (auto& v : logits) v = rng.normal();
    std::vector<std::size_t> labels(m);
    for (auto& l : labels) l = rng.below(5);
    const double lambda = rng.uniform(0.0, 2.0);
    const auto det = detection_loss(Tensor::constant({m, k}, random_probs(rng, m * k)), y, batch_alpha(y));
    const auto cls = classification_loss(Tensor::constant({m, 5}, logits), labels);
    const auto r = joint_loss(cls, det, lambda, batch_alpha(y));
    EXPECT_NEAR(r.total_value, r.classification + lambda * r.detection, 1e-12);
    EXPECT_EQ(r.alphas, batch_alpha(y));
    EXPECT_GE(r.detection, 0.0);
    EXPECT_GE(r.classification, 0.0);
  }
}

TEST(LossGradients, MatchFiniteDifferences) {
  Rng rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(4), k = 1 + rng.below(3);
    const auto y = random_labels(rng, m, k);
    const auto a = batch_alpha(y);
    auto p = Tensor::parameter({m, k}, random_probs(rng, m * k));
    std::vector<double> lv(m * 5);
    for (auto& v : lv) v = rng.normal();
    auto logits = Tensor::parameter({m, 5}, lv);
    std::vector<std::size_t> labels(m);
    for (auto& l : labels) l = rng.below(5);

    const auto check = [&](const Tensor& leaf, const std::function<Tensor(const Tensor&)>& f) {
      ad::backward(f(leaf));
      const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
      const auto numeric = ad::finite_difference([&](const Tensor& x) { return f(x).item(); }, leaf, 1e-5);
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        if (std::abs(analytic[i]) < 1e-8) {
          EXPECT_LT(std::abs(analytic[i] - numeric[i]), 1e-7);
        } else {
          worst = std::max(worst, ad::relative_error(analytic[i], numeric[i]));
        }
      }
    };
    check(p, [&](const Tensor& x) { return detection_loss(x, y, a); });
    p.zero_grad();
    check(p, [&](const Tensor& x) { return focal_loss_plain(x, y); });
    check(logits, [&](const Tensor& x) { return classification_loss(x, labels); });
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(LossKind, Names) {
  EXPECT_EQ(parse_loss_kind("balanced"), LossKind::balanced);
  EXPECT_EQ(parse_loss_kind("focal"), LossKind::focal);
  EXPECT_EQ(to_string(LossKind::focal), "focal");
  EXPECT_THROW(parse_loss_kind("l2"), ValidationError);
}
