// Runs every acceptance criterion and prints one PASS/FAIL line for each.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "meraugcn/augment.hpp"
#include "meraugcn/augraph.hpp"
#include "meraugcn/losses.hpp"
#include "meraugcn/metrics.hpp"
#include "meraugcn/model.hpp"
#include "meraugcn/protocols.hpp"
#include "meraugcn/rng.hpp"
#include "meraugcn/synth.hpp"
#include "meraugcn/trainer.hpp"

using namespace meraugcn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MERAUGCN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t file_hash(const fs::path& p) { return fnv1a(slurp(p)); }

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "meraugcn_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---- criterion 1 --------------------------------------------------------

Verdict graph_criterion() {
  Verdict v;
  const auto start = Clock::now();
  const auto full = build_graph(objective_class_relations());
  const auto pruned = prune_graph(full, {23, 24, 26, 38, 40});
  const double elapsed = seconds_since(start);
  v.require(full.size() == 17, "17 nodes");
  v.require(pruned.size() == 12, "12 nodes after pruning");
  bool symmetric = true;
  for (std::size_t i = 0; i < pruned.size(); ++i)
    for (std::size_t j = 0; j < pruned.size(); ++j)
      symmetric = symmetric && pruned.at(i, j) == pruned.at(j, i) && (i != j || pruned.at(i, i) == 1);
  v.require(symmetric, "symmetric with unit diagonal");
  const std::vector<std::pair<int, int>> edges = {{6, 12}, {1, 2}, {4, 7},  {4, 5},  {5, 7},
                                                  {1, 4},  {6, 15}, {15, 17}, {4, 9}, {7, 10},
                                                  {1, 25}, {2, 25}, {6, 7},  {4, 6}};
  std::size_t present = 0;
  for (auto [a, b] : edges) present += pruned.has_edge(a, b);
  v.require(present == edges.size(), "listed edges present");
  v.require(elapsed < 1.0, "runtime < 1 s");
  v.detail << "nodes " << full.size() << " -> " << pruned.size() << ", edges " << present << "/"
           << edges.size() << ", " << elapsed << " s";
  return v;
}

// ---- criterion 2 --------------------------------------------------------

Verdict gradcheck_criterion() {
  Verdict v;
  const auto start = Clock::now();
  double worst = 0.0;
  std::size_t kinks = 0, failed = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = joint_loss_gradcheck(seed);
    worst = std::max(worst, r.max_relative_error);
    kinks += r.kinks_skipped;
    failed += !r.passed;
  }
  const double elapsed = seconds_since(start);
  v.require(failed == 0 && worst < 1e-4, "max relative error < 1e-4 on all 20 seeds");
  v.require(elapsed < 120.0, "runtime < 2 min");
  v.detail << "max relative error " << worst << " over 20 seeds, kink elements skipped " << kinks
           << ", " << elapsed << " s";
  return v;
}

// ---- criterion 3 --------------------------------------------------------

Verdict loss_criterion() {
  Verdict v;
  const auto det = [](double p, std::uint8_t y, double a) {
    return detection_loss(Tensor::constant({1, 1}, {p}), LabelMatrix(1, 1, {y}), std::vector<double>{a}).item();
  };
  const double zero_pos = det(1.0, 1, 1.0), zero_neg = det(0.0, 0, 0.0), half = det(0.5, 1, 0.5);
  v.require(std::abs(zero_pos) < 1e-12 && std::abs(zero_neg) < 1e-12, "vanishing cases");
  v.require(std::abs(half - 0.0808) < 1e-4, "0.0808 case");
  const std::vector<std::size_t> label{0};
  const double uniform = classification_loss(Tensor::constant({1, 5}, std::vector<double>(5, 0.0)), label).item();
  v.require(std::abs(uniform - std::log(5.0)) < 1e-9, "uniform logits give ln 5");
  Rng rng(3);
  double worst_additivity = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double c = rng.uniform(0, 3), d = rng.uniform(0, 1), lambda = rng.uniform(0, 2);
    const auto r = joint_loss(Tensor::scalar(c), Tensor::scalar(d), lambda);
    worst_additivity = std::max(worst_additivity, std::abs(r.total_value - (c + lambda * d)));
  }
  v.require(worst_additivity <= 1e-12, "joint additivity");
  v.detail << "L(1,1)=" << zero_pos << " L(0,0)=" << zero_neg << " L(0.5)=" << half
           << " uniform CE - ln5 = " << uniform - std::log(5.0) << " additivity " << worst_additivity;
  return v;
}

// ---- criterion 4 --------------------------------------------------------

Verdict alpha_criterion() {
  Verdict v;
  Rng rng(4);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng.below(64), k = 1 + rng.below(17);
    LabelMatrix y(m, k);
    for (auto& e : y.data) e = static_cast<std::uint8_t>(rng.below(2));
    const auto got = batch_alpha(y);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t pos = 0;
      for (std::size_t j = 0; j < m; ++j) pos += y(j, i);
      mismatches += got[i] != static_cast<double>(pos) / static_cast<double>(m);
    }
  }
  v.require(mismatches == 0, "alpha equals positive count / M");
  v.detail << "1000 batches, mismatches " << mismatches;
  return v;
}

// ---- criterion 5 --------------------------------------------------------

std::vector<double> naive_gcn_layer(const std::vector<double>& z, const std::vector<double>& g,
                                    const std::vector<double>& w, std::size_t k, std::size_t in,
                                    std::size_t out) {
  std::vector<double> r(k * out, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t t = 0; t < in; ++t) s += g[i * k + j] * z[j * in + t] * w[t * out + o];
      r[i * out + o] = s > 0.0 ? s : 0.0;
    }
  return r;
}

Verdict gcn_criterion() {
  Verdict v;
  Rng rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(6), d = 1 + rng.below(8);
    ModelConfig c = tiny_model_config(k);
    c.d = d;
    c.d1 = 1 + rng.below(8);
    c.d2 = 1 + rng.below(8);
    const auto params = init_params(c, static_cast<std::uint64_t>(trial));
    std::vector<double> g(k * k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i; j < k; ++j) g[i * k + j] = g[j * k + i] = i == j ? 1.0 : double(rng.below(2));
    std::vector<double> x(k * d);
    for (auto& e : x) e = rng.normal();
    const auto out = gcn_forward(Tensor::constant({1, k, d}, x), Tensor::constant({k, k}, g), params, c);
    const auto& w0 = params.at("gcn.0.weight");
    const auto& w1 = params.at("gcn.1.weight");
    const auto z1 = naive_gcn_layer(x, g, {w0.values().begin(), w0.values().end()}, k, d, c.d1);
    const auto z2 = naive_gcn_layer(z1, g, {w1.values().begin(), w1.values().end()}, k, c.d1, c.d2);
    for (std::size_t i = 0; i < z2.size(); ++i) worst = std::max(worst, std::abs(out[i] - z2[i]));
  }
  v.require(worst < 1e-10, "matches naive oracle within 1e-10");

  ModelConfig c = tiny_model_config(4);
  c.d = c.d1 = c.d2 = 6;
  auto params = init_params(c, 1);
  for (const char* name : {"gcn.0.weight", "gcn.1.weight"}) {
    auto t = params.at(name);
    auto vals = t.mutable_values();
    std::fill(vals.begin(), vals.end(), 0.0);
    for (std::size_t i = 0; i < 6; ++i) vals[i * 6 + i] = 1.0;
  }
  std::vector<double> x(4 * 6), eye(16, 0.0);
  for (auto& e : x) e = rng.uniform(0.0, 3.0);
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  const auto id_out = gcn_forward(Tensor::constant({1, 4, 6}, x), Tensor::constant({4, 4}, eye), params, c);
  const bool identity = std::equal(x.begin(), x.end(), id_out.values().begin());
  v.require(identity, "identity graph and weights return X");
  v.detail << "100 instances, max abs diff " << worst << ", identity case " << (identity ? "exact" : "differs");
  return v;
}

// ---- criterion 6 --------------------------------------------------------

Verdict augment_criterion() {
  Verdict v;
  const auto plan = build_plan({0, 10, 20});
  v.require(plan.variants.size() == 70, "70 variants for (0,10,20)");
  Rng rng(6);
  std::size_t outside = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int onset = static_cast<int>(rng.below(40));
    const int apex = onset + static_cast<int>(rng.below(40));
    const int offset = apex + static_cast<int>(rng.below(40));
    for (const auto& var : build_plan({onset, apex, offset}).variants)
      outside += var.apex < onset || var.apex > offset;
  }
  v.require(outside == 0, "every variant apex within [onset, offset]");
  FlowField f(28, 28);
  for (std::size_t y = 0; y < 28; ++y)
    for (std::size_t x = 0; x < 28; ++x) {
      const double dx = x - 13.5, dy = y - 13.5;
      const double g = std::exp(-(dx * dx + dy * dy) / 32.0);
      f.at(0, y, x) = static_cast<float>(g);
      f.at(1, y, x) = static_cast<float>(0.5 * g);
    }
  const auto back = rotate_flow(rotate_flow(f, 15.0), -15.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.data.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(back.data[i] - f.data[i])));
  v.require(worst < 0.05, "rotation round trip < 0.05");
  v.detail << plan.variants.size() << " variants, apex violations " << outside << ", round trip error " << worst;
  return v;
}

// ---- criterion 7 --------------------------------------------------------

Verdict metrics_criterion() {
  Verdict v;
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    std::vector<std::size_t> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng.below(5);
      p[i] = rng.below(3) ? t[i] : rng.below(5);
    }
    const auto r = make_report(confusion(p, t, 5));
    // Brute force over the raw prediction lists.
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += p[i] == t[i];
    double uar_sum = 0.0, f1_sum = 0.0, wf1 = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      double tp = 0, fp = 0, fn = 0, nc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        nc += t[i] == c;
        tp += t[i] == c && p[i] == c;
        fp += t[i] != c && p[i] == c;
        fn += t[i] == c && p[i] != c;
      }
      if (nc > 0) {
        uar_sum += tp / nc;
        ++present;
      }
      const double f1 = tp + fp + fn == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
      f1_sum += f1;
      wf1 += f1 * nc / static_cast<double>(n);
    }
    worst = std::max({worst, std::abs(r.war - double(correct) / double(n)),
                      std::abs(r.uar - uar_sum / double(present)), std::abs(r.f1_macro - f1_sum / 5.0),
                      std::abs(r.wf1 - wf1)});
  }
  v.require(worst <= 1e-12, "random sets match brute force within 1e-12");
  const auto hand = make_report(confusion(std::vector<std::size_t>{0, 1, 1, 1}, std::vector<std::size_t>{0, 0, 1, 1}, 2));
  const bool hand_ok = std::abs(hand.war - 0.75) < 1e-12 && std::abs(hand.uar - 0.75) < 1e-12 &&
                       std::abs(hand.f1_macro - 0.7333) < 1e-4 && std::abs(hand.wf1 - 0.7333) < 1e-4;
  v.require(hand_ok, "hand confusion matrix");
  v.detail << "1000 sets, max diff " << worst << "; hand case " << hand.war << " " << hand.uar << " "
           << hand.f1_macro << " " << hand.wf1;
  return v;
}

// ---- criterion 8 --------------------------------------------------------

Verdict overfit_criterion(const fs::path& dir) {
  Verdict v;
  const auto start = Clock::now();
  const auto graph = make_graph(GraphKind::pruned);
  const auto manifest = synth_dataset(simple_synth_spec({8, 8, 8, 8, 8}, 4, 1), graph, (dir / "overfit").string());
  TrainConfig t;
  t.epochs = 200;
  const auto fold = all_records_fold(manifest);
  const auto result = train(manifest, fold, graph, ModelConfig{}, t);
  const auto report = evaluate(result.params, result.config, graph, manifest, fold);
  const double elapsed = seconds_since(start);
  std::vector<bool> planted(graph.size(), false);
  for (const auto& r : manifest.records)
    for (std::size_t k = 0; k < graph.size(); ++k) planted[k] = planted[k] || r.au_labels[k];
  double f1_sum = 0.0;
  std::size_t n_planted = 0;
  for (std::size_t k = 0; k < graph.size(); ++k)
    if (planted[k]) {
      f1_sum += report.per_au_f1[k];
      ++n_planted;
    }
  const double mean_f1 = f1_sum / static_cast<double>(n_planted);
  v.require(manifest.records.size() == 40, "40 samples");
  v.require(report.war >= 0.95, "training WAR >= 0.95");
  v.require(mean_f1 >= 0.90, "planted-AU mean F1 >= 0.90");
  v.require(elapsed < 600.0, "runtime < 10 min");
  v.detail << "WAR " << report.war << ", planted-AU mean F1 " << mean_f1 << " over " << n_planted
           << " AUs, total loss " << result.history.epochs.front().total << " -> "
           << result.history.epochs.back().total << ", " << elapsed << " s";
  return v;
}

// ---- criterion 9 --------------------------------------------------------

const char* kReducedModel = "--d 64 --d1 32 --detector_hidden 16";

Verdict protocol_criterion(const fs::path& dir) {
  Verdict v;
  const auto graph = make_graph(GraphKind::pruned);
  const auto data = dir / "composite";
  const auto manifest = synth_dataset(composite_synth_spec(0), graph, data.string());
  std::set<std::string> subjects;
  for (const auto& r : manifest.records) subjects.insert(r.subject_id);
  const auto folds = loso_protocol(manifest);
  std::vector<int> tested(manifest.records.size(), 0);
  bool disjoint = true;
  for (const auto& f : folds) {
    std::set<std::size_t> train(f.train.begin(), f.train.end());
    for (auto i : f.test) {
      disjoint = disjoint && !train.count(i);
      ++tested[i];
    }
    disjoint = disjoint && train.size() + f.test.size() == manifest.records.size();
  }
  const bool exhaustive = std::all_of(tested.begin(), tested.end(), [](int c) { return c == 1; });
  v.require(subjects.size() == 47 && folds.size() == 47, "47 LOSO folds");
  v.require(disjoint && exhaustive, "LOSO folds disjoint and exhaustive");

  const auto run = dir / "hde_run";
  const int code = run_cli("train --manifest " + (data / "manifest.jsonl").string() + " --protocol hde --epochs 1 " +
                           kReducedModel + " --out_dir " + run.string());
  std::size_t fold_dirs = 0;
  if (fs::exists(run))
    for (const auto& e : fs::directory_iterator(run)) fold_dirs += e.is_directory();
  const bool average = slurp(run / "report.txt").find("label=average") != std::string::npos;
  v.require(code == 0 && hde_protocol(manifest).size() == 2 && fold_dirs == 2, "exactly 2 HDE folds");
  v.require(average, "averaged HDE report");
  v.detail << subjects.size() << " subjects, " << folds.size() << " LOSO folds; HDE exit " << code << ", "
           << fold_dirs << " fold reports, average " << (average ? "written" : "missing");
  return v;
}

// ---- criteria 10 and 11 -------------------------------------------------

std::string train_args(const fs::path& manifest, const fs::path& out, const std::string& extra) {
  return "train --manifest " + manifest.string() + " --epochs 20 --seed 3 " + kReducedModel + " " + extra +
         " --out_dir " + out.string();
}

Verdict ablation_criterion(const fs::path& dir, const fs::path& manifest) {
  Verdict v;
  const int base_code = run_cli(train_args(manifest, dir / "ablate_default", ""));
  v.require(base_code == 0, "default run completes");
  const auto base = file_hash(dir / "ablate_default/all/model.ckpt");
  v.detail << "default " << hex(base);
  const std::vector<std::pair<std::string, std::string>> variants = {
      {"softmax_attention", "--attention softmax"},
      {"plain_focal", "--loss focal"},
      {"dense_graph", "--graph dense"},
      {"original_graph", "--graph original"},
      {"concat_fusion", "--fusion concat"}};
  for (const auto& [name, flags] : variants) {
    const auto out = dir / ("ablate_" + name);
    const int code = run_cli(train_args(manifest, out, flags));
    const auto ckpt = out / "all/model.ckpt";
    const bool done = code == 0 && fs::exists(ckpt) && fs::exists(out / "report.json");
    const auto h = done ? file_hash(ckpt) : 0;
    v.require(done, name + " completes");
    v.require(done && h != base, name + " checkpoint differs from default");
    v.detail << ", " << name << " " << hex(h);
  }
  return v;
}

Verdict determinism_criterion(const fs::path& dir, const fs::path& manifest) {
  Verdict v;
  const std::vector<std::string> artifacts = {"all/model.ckpt", "all/history.csv", "all/report.json",
                                              "all/report.txt", "all/predictions.txt", "report.json",
                                              "report.txt", "config.txt"};
  const auto out = dir / "repeat";
  std::vector<std::string> first, last;
  for (int run = 0; run < 2; ++run) {
    fs::remove_all(out);
    const int code = run_cli(train_args(manifest, out, ""));
    v.require(code == 0, "run " + std::to_string(run + 1) + " completes");
    for (const auto& a : artifacts) {
      const auto p = out / a;
      const std::string bytes = fs::exists(p) ? slurp(p) : std::string();
      if (run == 0) first.push_back(bytes);
      else last.push_back(bytes);
    }
  }
  std::size_t identical = 0;
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    const bool same = !first[i].empty() && first[i] == last[i];
    identical += same;
    v.require(same, artifacts[i] + " identical");
  }
  v.detail << identical << "/" << artifacts.size() << " artifacts bit-identical, checkpoint "
           << hex(fnv1a(last[0]));
  return v;
}

}  // namespace

int main() {
  const auto dir = work_dir();
  const auto graph = make_graph(GraphKind::pruned);
  const auto small = dir / "small";
  synth_dataset(simple_synth_spec({8, 8, 8, 8, 8}, 4, 2), graph, small.string());
  const auto manifest = small / "manifest.jsonl";

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"graph construction and pruning", graph_criterion},
      {"end-to-end gradient check", gradcheck_criterion},
      {"loss hand cases", loss_criterion},
      {"balance factor oracle", alpha_criterion},
      {"GCN oracle and identity", gcn_criterion},
      {"augmentation plan and rotation", augment_criterion},
      {"metrics oracles", metrics_criterion},
      {"overfit sanity run", [&] { return overfit_criterion(dir); }},
      {"evaluation protocols", [&] { return protocol_criterion(dir); }},
      {"ablation variants", [&] { return ablation_criterion(dir, manifest); }},
      {"run determinism", [&] { return determinism_criterion(dir, manifest); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    failures += !v.pass;
    std::printf("%s criterion %zu (%s): %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  fs::remove_all(dir);
  return failures == 0 ? 0 : 1;
}
