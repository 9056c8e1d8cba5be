#include "meraugcn/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "meraugcn/checkpoint.hpp"
#include "meraugcn/errors.hpp"

namespace meraugcn {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ValidationError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) +
                        "' as " + std::string(want));
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

// Shortest round-trip text; plain decimals in [1e-4, 1e15).
std::string fmt(double x) {
  char buf[64];
  const double a = std::abs(x);
  const auto format = a == 0.0 || (a >= 1e-4 && a < 1e15) ? std::chars_format::fixed
                                                           : std::chars_format::scientific;
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x, format);
  return std::string(buf, p);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

struct KeyDef {
  const char* name;
  const char* help;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define COUNT_KEY(NAME, FIELD, HELP)                                                        \
  KeyDef{NAME, HELP, [](RunConfig& c, std::string_view v) { c.FIELD = parse_count(NAME, v); }, \
         [](const RunConfig& c) { return std::to_string(c.FIELD); }}
#define REAL_KEY(NAME, FIELD, HELP)                                                        \
  KeyDef{NAME, HELP, [](RunConfig& c, std::string_view v) { c.FIELD = parse_real(NAME, v); }, \
         [](const RunConfig& c) { return fmt(c.FIELD); }}
#define BOOL_KEY(NAME, FIELD, HELP)                                                        \
  KeyDef{NAME, HELP, [](RunConfig& c, std::string_view v) { c.FIELD = parse_bool(NAME, v); }, \
         [](const RunConfig& c) { return fmt(c.FIELD); }}
#define PATH_KEY(NAME, FIELD, HELP)                                                     \
  KeyDef{NAME, HELP, [](RunConfig& c, std::string_view v) { c.FIELD = std::string(v); }, \
         [](const RunConfig& c) { return c.FIELD; }}
#define ENUM_KEY(NAME, FIELD, PARSE, HELP)                                         \
  KeyDef{NAME, HELP, [](RunConfig& c, std::string_view v) { c.FIELD = PARSE(v); }, \
         [](const RunConfig& c) { return std::string(to_string(c.FIELD)); }}

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs{
      PATH_KEY("manifest", manifest, "dataset manifest (manifest.jsonl)"),
      PATH_KEY("graph_file", graph_file, "AUGRAPH file; overrides graph when set"),
      PATH_KEY("checkpoint", checkpoint, "checkpoint to score (eval)"),
      PATH_KEY("out_dir", out_dir, "output directory"),
      ENUM_KEY("protocol", protocol, parse_protocol, "none | hde | loso"),
      ENUM_KEY("graph", train.graph, parse_graph_kind, "pruned | original | dense"),
      ENUM_KEY("attention", train.attention, parse_attention_kind, "sigmoid | softmax"),
      ENUM_KEY("loss", train.loss, parse_loss_kind, "balanced | focal"),
      ENUM_KEY("fusion", train.fusion, parse_fusion_kind, "sum | concat"),
      REAL_KEY("lr", train.lr, "ADAM learning rate"),
      REAL_KEY("beta1", train.beta1, "ADAM first-moment decay"),
      REAL_KEY("beta2", train.beta2, "ADAM second-moment decay"),
      REAL_KEY("epsilon", train.epsilon, "ADAM epsilon"),
      COUNT_KEY("batch_size", train.batch_size, "mini-batch size"),
      COUNT_KEY("epochs", train.epochs, "training epochs"),
      REAL_KEY("lambda", train.lambda, "weight of the detection loss"),
      KeyDef{"seed", "run seed",
             [](RunConfig& c, std::string_view v) { c.train.seed = parse_u64("seed", v); },
             [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      BOOL_KEY("augment", train.augment, "expand training samples with apex/rotation variants"),
      BOOL_KEY("checkpoint_every_epoch", train.checkpoint_every_epoch, "also checkpoint after every epoch"),
      COUNT_KEY("eval_batch_size", eval_batch_size, "batch size for scoring"),
      COUNT_KEY("input_h", model.input_h, "flow height"),
      COUNT_KEY("input_w", model.input_w, "flow width"),
      COUNT_KEY("d", model.d, "global feature width"),
      COUNT_KEY("d1", model.d1, "first GCN layer width"),
      COUNT_KEY("d2", model.d2, "second GCN layer width"),
      COUNT_KEY("conv1_channels", model.conv1_channels, "channels of the first conv per path"),
      COUNT_KEY("conv2_channels", model.conv2_channels, "channels of the second conv per path"),
      COUNT_KEY("detector_hidden", model.detector_hidden, "hidden width of each AU detector"),
      BOOL_KEY("normalize_graph", model.normalize_graph, "use D^-1/2 G D^-1/2 instead of raw G"),
  };
  return defs;
}

#undef COUNT_KEY
#undef REAL_KEY
#undef BOOL_KEY
#undef PATH_KEY
#undef ENUM_KEY

const KeyDef& find_key(std::string_view key) {
  for (const auto& d : key_defs()) {
    if (key == d.name) return d;
  }
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_report(const fs::path& dir, const MetricsReport& report) {
  write_text(dir / "report.txt", report_to_text(report));
  write_text(dir / "report.json", report_to_json(report));
}

void write_predictions(const fs::path& path, const Predictions& p) {
  std::ostringstream os;
  for (std::size_t i = 0; i < p.sample_ids.size(); ++i) {
    os << p.sample_ids[i] << ' ' << p.predicted[i] << ' ';
    for (std::size_t j = 0; j < p.au_predicted.cols; ++j) os << int(p.au_predicted(i, j));
    os << '\n';
  }
  write_text(path, os.str());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

void RunConfig::validate(bool need_manifest, bool need_checkpoint) const {
  model.validate();
  train.validate();
  if (eval_batch_size == 0) throw ValidationError("eval_batch_size must be positive");
  if (out_dir.empty()) throw ValidationError("out_dir must not be empty");
  if (need_manifest) {
    if (manifest.empty()) throw ValidationError("manifest path is required");
    if (!fs::exists(manifest)) throw IoError("manifest not found: " + manifest);
  }
  if (need_checkpoint) {
    if (checkpoint.empty()) throw ValidationError("checkpoint path is required");
    if (!fs::exists(checkpoint)) throw IoError("checkpoint not found: " + checkpoint);
  }
  if (!graph_file.empty() && !fs::exists(graph_file)) throw IoError("graph file not found: " + graph_file);
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    const RunConfig defaults;
    std::vector<ConfigKey> out;
    for (const auto& d : key_defs()) out.push_back({d.name, d.get(defaults), d.help});
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  find_key(key).set(config, value);
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  return find_key(key).get(config);
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    try {
      set_config_value(config, key, value);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

void apply_environment(RunConfig& config) {
  if (const char* v = std::getenv(kOutDirEnv); v && *v) config.out_dir = v;
}

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const auto& d : key_defs()) out += std::string(d.name) + " = " + d.get(config) + "\n";
  return out;
}

AuGraph resolve_graph(const RunConfig& config) {
  if (!config.graph_file.empty()) return read_graph_file(config.graph_file);
  return make_graph(config.train.graph);
}

RunSummary run_train(const RunConfig& config) {
  config.validate(true, false);
  const Manifest manifest = parse_manifest(config.manifest);
  const AuGraph graph = resolve_graph(config);
  const auto folds = make_folds(manifest, config.protocol);
  const fs::path out(config.out_dir);
  make_dir(out);
  write_text(out / "config.txt", config_to_text(config));

  RunSummary summary;
  Predictions pooled;
  for (const auto& fold : folds) {
    const fs::path dir = out / fold.name;
    make_dir(dir);
    auto result = train(manifest, fold, graph, config.model, config.train, (dir / "model.ckpt").string());
    write_text(dir / "history.csv", result.history.to_csv());
    if (fold.test.empty()) throw ProtocolError("fold " + fold.name + ": empty test set");
    auto preds = predict(result.params, result.config, graph, manifest, fold.test, config.eval_batch_size);
    auto report = report_from_predictions(preds, graph, fold.name);
    write_report(dir, report);
    write_predictions(dir / "predictions.txt", preds);
    summary.fold_reports.push_back(std::move(report));

    if (config.protocol == Protocol::loso) {
      const std::size_t k = graph.size();
      const std::size_t before = pooled.sample_ids.size();
      const std::size_t n = before + preds.sample_ids.size();
      LabelMatrix ap(n, k), at(n, k);
      for (std::size_t i = 0; i < before; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          ap(i, j) = pooled.au_predicted(i, j);
          at(i, j) = pooled.au_truth(i, j);
        }
      }
      for (std::size_t i = 0; i < preds.sample_ids.size(); ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          ap(before + i, j) = preds.au_predicted(i, j);
          at(before + i, j) = preds.au_truth(i, j);
        }
      }
      pooled.au_predicted = std::move(ap);
      pooled.au_truth = std::move(at);
      pooled.sample_ids.insert(pooled.sample_ids.end(), preds.sample_ids.begin(), preds.sample_ids.end());
      pooled.predicted.insert(pooled.predicted.end(), preds.predicted.begin(), preds.predicted.end());
      pooled.truth.insert(pooled.truth.end(), preds.truth.begin(), preds.truth.end());
      pooled.au_probs.insert(pooled.au_probs.end(), preds.au_probs.begin(), preds.au_probs.end());
    }
  }

  switch (config.protocol) {
    case Protocol::none: summary.summary = summary.fold_reports.front(); break;
    case Protocol::hde: summary.summary = average_reports(summary.fold_reports, "average"); break;
    case Protocol::loso: summary.summary = report_from_predictions(pooled, graph, "pooled"); break;
  }
  write_report(out, summary.summary);
  return summary;
}

MetricsReport run_eval(const RunConfig& config) {
  config.validate(true, true);
  const Manifest manifest = parse_manifest(config.manifest);
  const Checkpoint ckpt = read_checkpoint(config.checkpoint);
  std::vector<std::size_t> all(manifest.records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  if (all.empty()) throw ProtocolError("eval: manifest has no records");
  auto preds = predict(ckpt.params, ckpt.config, ckpt.graph, manifest, all, config.eval_batch_size);
  auto report = report_from_predictions(preds, ckpt.graph, "eval");
  const fs::path out(config.out_dir);
  make_dir(out);
  write_report(out, report);
  write_predictions(out / "predictions.txt", preds);
  return report;
}

}  // namespace meraugcn
