#include "meraugcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "meraugcn/checkpoint.hpp"
#include "meraugcn/errors.hpp"
#include "meraugcn/flow_io.hpp"
#include "meraugcn/ops.hpp"
#include "meraugcn/rng.hpp"

namespace meraugcn {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("train: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("train: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("train: beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("train: epsilon must be positive");
  if (batch_size < 1) throw ValidationError("train: batch_size must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("train: lambda must be non-negative");
}

ModelConfig effective_model_config(ModelConfig base, const TrainConfig& train, const AuGraph& graph) {
  base.attention = train.attention;
  base.fusion = train.fusion;
  base.num_aus = graph.size();
  base.validate();
  return base;
}

AdamState AdamState::fresh(const ModelParams& params) {
  AdamState s;
  for (const auto& e : params.entries()) {
    s.m.emplace_back(e.tensor.numel(), 0.0);
    s.v.emplace_back(e.tensor.numel(), 0.0);
  }
  return s;
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const TrainConfig& config, std::size_t t) {
  if (t < 1) throw ContractError("adam: step index must be >= 1");
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ShapeError("adam: parameter, gradient and moment sizes differ");
  }
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    param[i] -= config.lr * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

void adam_step(ModelParams& params, AdamState& state, const TrainConfig& config, std::size_t t) {
  const auto& entries = params.entries();
  if (state.m.size() != entries.size() || state.v.size() != entries.size()) {
    throw ShapeError("adam: optimizer state does not match the parameter set");
  }
  for (const auto& e : entries) {
    for (double g : e.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in " + e.name);
    }
  }
  std::vector<double> zeros;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor p = entries[i].tensor;
    std::span<const double> g = p.grad();
    if (g.empty()) {
      zeros.assign(p.numel(), 0.0);
      g = zeros;
    }
    adam_update(p.mutable_values(), g, state.m[i], state.v[i], config, t);
  }
  state.t = t;
}

namespace {

std::vector<std::size_t> node_map(const Manifest& manifest, const AuGraph& graph) {
  // graph node k -> manifest column, or npos when the manifest lacks that AU
  std::vector<std::size_t> map(graph.size(), static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < graph.size(); ++k) {
    for (std::size_t j = 0; j < manifest.nodes.size(); ++j) {
      if (manifest.nodes[j] == graph.nodes()[k]) map[k] = j;
    }
  }
  return map;
}

std::vector<double> widen(const FlowField& f) { return {f.data.begin(), f.data.end()}; }

}  // namespace

std::vector<Example> load_examples(const Manifest& manifest, std::span<const std::size_t> indices,
                                   const AuGraph& graph, const ModelConfig& config, bool augment) {
  const auto map = node_map(manifest, graph);
  std::vector<Example> out;
  for (std::size_t idx : indices) {
    if (idx >= manifest.records.size()) throw ContractError("fold index out of range");
    const auto& r = manifest.records[idx];
    FlowField flow = read_flow(manifest.flow_file(r));
    if (flow.height != config.input_h || flow.width != config.input_w) {
      throw ShapeError("sample " + r.sample_id + ": flow is " + std::to_string(flow.height) + "x" +
                       std::to_string(flow.width) + ", model expects " + std::to_string(config.input_h) +
                       "x" + std::to_string(config.input_w));
    }
    Example base;
    base.sample_id = r.sample_id;
    base.class_label = r.class_label;
    base.au.assign(graph.size(), 0);
    for (std::size_t k = 0; k < graph.size(); ++k) {
      if (map[k] != static_cast<std::size_t>(-1)) base.au[k] = r.au_labels[map[k]];
    }
    if (!augment) {
      base.flow = widen(flow);
      out.push_back(std::move(base));
      continue;
    }
    for (const auto& variant : build_plan(r.positions).variants) {
      Example ex = base;
      ex.sample_id += "@" + std::to_string(variant.apex) + "/" + std::to_string(variant.angle);
      ex.flow = widen(materialize_variant(flow, r.positions, variant));
      out.push_back(std::move(ex));
    }
  }
  return out;
}

Batch make_batch(const std::vector<Example>& examples, std::span<const std::size_t> order,
                 const ModelConfig& config) {
  const std::size_t m = order.size();
  const std::size_t per = 2 * config.input_h * config.input_w;
  const std::size_t k = examples.empty() ? 0 : examples.front().au.size();
  std::vector<double> flow(m * per);
  Batch b;
  b.au = LabelMatrix(m, k);
  b.classes.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& ex = examples.at(order[i]);
    std::copy(ex.flow.begin(), ex.flow.end(), flow.begin() + static_cast<std::ptrdiff_t>(i * per));
    for (std::size_t j = 0; j < k; ++j) b.au(i, j) = ex.au[j];
    b.classes[i] = ex.class_label;
  }
  b.flow = Tensor::constant({m, 2, config.input_h, config.input_w}, std::move(flow));
  return b;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(derive_seed(seed, "shuffle"), epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,detection,classification,total,classification_sum,train_war\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.detection << ',' << e.classification << ',' << e.total << ','
       << e.classification_sum << ',' << e.train_war << '\n';
  }
  return os.str();
}

namespace {

std::size_t argmax_row(std::span<const double> v, std::size_t row, std::size_t cols) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < cols; ++c) {
    if (v[row * cols + c] > v[row * cols + best]) best = c;
  }
  return best;
}

[[noreturn]] void rethrow_at(const Error& e, const std::string& where) {
  const std::string what = where + e.what();
  if (dynamic_cast<const NumericError*>(&e)) throw NumericError(what);
  if (dynamic_cast<const ShapeError*>(&e)) throw ShapeError(what);
  if (dynamic_cast<const IoError*>(&e)) throw IoError(what);
  if (dynamic_cast<const ValidationError*>(&e)) throw ValidationError(what);
  throw Error(what, e.exit_code());
}

ModelParams detached(const ModelParams& params) {
  ModelParams out;
  for (const auto& e : params.entries()) out.add(e.name, e.partition, e.tensor.detach());
  return out;
}

}  // namespace

TrainResult train(const Manifest& manifest, const Fold& fold, const AuGraph& graph,
                  const ModelConfig& model_config, const TrainConfig& train_config,
                  const std::string& checkpoint_path) {
  train_config.validate();
  if (fold.train.empty()) throw ProtocolError("fold " + fold.name + ": empty training set");
  TrainResult result;
  result.config = effective_model_config(model_config, train_config, graph);
  const ModelConfig& cfg = result.config;

  const auto examples = load_examples(manifest, fold.train, graph, cfg, train_config.augment);
  result.params = init_params(cfg, train_config.seed);
  ModelParams& params = result.params;
  const Tensor graph_op = graph_operator(graph, cfg.normalize_graph);
  AdamState state = AdamState::fresh(params);
  std::size_t t = 0;

  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    const auto order = epoch_order(examples.size(), train_config.seed, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += train_config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + train_config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      try {
        Batch batch = make_batch(examples, idx, cfg);
        params.zero_grad();
        auto out = forward(batch.flow, graph_op, params, cfg);
        std::vector<double> alphas;
        Tensor det;
        if (train_config.loss == LossKind::balanced) {
          alphas = batch_alpha(batch.au);
          det = detection_loss(out.au_probs, batch.au, alphas);
        } else {
          det = focal_loss_plain(out.au_probs, batch.au);
        }
        Tensor cls = classification_loss(out.logits, batch.classes);
        auto loss = joint_loss(cls, det, train_config.lambda, std::move(alphas));
        if (!std::isfinite(loss.total_value)) throw NumericError("non-finite loss");
        ad::backward(loss.total);
        adam_step(params, state, train_config, ++t);

        const double m = static_cast<double>(idx.size());
        rec.detection += loss.detection * m;
        rec.classification += loss.classification * m;
        rec.total += loss.total_value * m;
        const auto probs = out.class_probs.values();
        for (std::size_t i = 0; i < idx.size(); ++i) {
          if (argmax_row(probs, i, cfg.num_classes) == batch.classes[i]) ++correct;
        }
      } catch (const Error& e) {
        rethrow_at(e, "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + ": ");
      }
    }
    const double n = static_cast<double>(examples.size());
    rec.classification_sum = rec.classification;
    rec.detection /= n;
    rec.classification /= n;
    rec.total /= n;
    rec.train_war = static_cast<double>(correct) / n;
    result.history.epochs.push_back(rec);

    if (!checkpoint_path.empty() && train_config.checkpoint_every_epoch) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, ".epoch%03zu", epoch);
      write_checkpoint(checkpoint_path + suffix, cfg, graph, params);
    }
  }
  if (!checkpoint_path.empty()) write_checkpoint(checkpoint_path, cfg, graph, params);
  return result;
}

Predictions predict(const ModelParams& params, const ModelConfig& config, const AuGraph& graph,
                    const Manifest& manifest, std::span<const std::size_t> indices,
                    std::size_t batch_size) {
  if (config.num_aus != graph.size()) throw ShapeError("predict: model K differs from graph size");
  if (batch_size == 0) throw ContractError("predict: batch_size must be positive");
  const auto examples = load_examples(manifest, indices, graph, config, false);
  const ModelParams frozen = detached(params);
  const Tensor graph_op = graph_operator(graph, config.normalize_graph);
  const std::size_t n = examples.size(), k = graph.size();
  Predictions p;
  p.au_predicted = LabelMatrix(n, k);
  p.au_truth = LabelMatrix(n, k);
  p.au_probs.resize(n * k);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    Batch batch = make_batch(examples, idx, config);
    auto out = forward(batch.flow, graph_op, frozen, config);
    const auto cp = out.class_probs.values();
    const auto ap = out.au_probs.values();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t row = start + i;
      p.sample_ids.push_back(examples[row].sample_id);
      p.predicted.push_back(argmax_row(cp, i, config.num_classes));
      p.truth.push_back(examples[row].class_label);
      for (std::size_t j = 0; j < k; ++j) {
        const double prob = ap[i * k + j];
        p.au_probs[row * k + j] = prob;
        p.au_predicted(row, j) = prob >= 0.5 ? 1 : 0;
        p.au_truth(row, j) = examples[row].au[j];
      }
    }
  }
  return p;
}

MetricsReport report_from_predictions(const Predictions& predictions, const AuGraph& graph,
                                      std::string label) {
  auto cm = confusion(predictions.predicted, predictions.truth, kNumClasses);
  auto r = make_report(cm, predictions.au_predicted, predictions.au_truth, graph.nodes());
  r.label = std::move(label);
  return r;
}

MetricsReport evaluate(const ModelParams& params, const ModelConfig& config, const AuGraph& graph,
                       const Manifest& manifest, const Fold& fold) {
  if (fold.test.empty()) throw ProtocolError("fold " + fold.name + ": empty test set");
  return report_from_predictions(predict(params, config, graph, manifest, fold.test), graph, fold.name);
}

AuGraph small_graph(std::size_t k) {
  const AuGraph full = make_graph(GraphKind::pruned);
  if (k == 0 || k > full.size()) throw ContractError("small_graph: k out of range");
  std::set<int> drop(full.nodes().begin() + static_cast<std::ptrdiff_t>(k), full.nodes().end());
  return prune_graph(full, drop);
}

ad::GradTolerance model_grad_tolerance() {
  ad::GradTolerance tol;
  tol.denominator_floor = 1e-6;
  return tol;
}

ad::GradCheckReport joint_loss_gradcheck(std::uint64_t seed, const TrainConfig& train, double h,
                                         ad::GradTolerance tol) {
  constexpr std::size_t kBatch = 2;
  const AuGraph graph = small_graph(3);
  const ModelConfig cfg = effective_model_config(tiny_model_config(3), train, graph);
  const ModelParams params = init_params(cfg, seed);
  Rng rng(derive_seed(seed, "gradcheck"));
  std::vector<double> flow(kBatch * 2 * cfg.input_h * cfg.input_w);
  for (auto& v : flow) v = rng.normal();
  const Tensor x = Tensor::constant({kBatch, 2, cfg.input_h, cfg.input_w}, std::move(flow));
  LabelMatrix au(kBatch, cfg.num_aus);
  for (auto& b : au.data) b = static_cast<std::uint8_t>(rng.below(2));
  std::vector<std::size_t> classes(kBatch);
  for (auto& c : classes) c = rng.below(cfg.num_classes);
  const Tensor graph_op = graph_operator(graph, cfg.normalize_graph);

  auto loss = [&]() {
    auto out = forward(x, graph_op, params, cfg);
    Tensor det = train.loss == LossKind::balanced ? detection_loss(out.au_probs, au, batch_alpha(au))
                                                  : focal_loss_plain(out.au_probs, au);
    return joint_loss(classification_loss(out.logits, classes), det, train.lambda).total;
  };
  return ad::check_gradients(loss, params.named(), h, tol);
}

}  // namespace meraugcn
