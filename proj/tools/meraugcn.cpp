#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "meraugcn/augment.hpp"
#include "meraugcn/augraph.hpp"
#include "meraugcn/errors.hpp"
#include "meraugcn/manifest.hpp"
#include "meraugcn/metrics.hpp"
#include "meraugcn/run_config.hpp"
#include "meraugcn/synth.hpp"
#include "meraugcn/trainer.hpp"

using namespace meraugcn;

namespace {

std::string key_listing() {
  std::ostringstream os;
  os << "Config keys (file: key = value, flag: --key value):\n";
  for (const auto& k : config_keys()) {
    os << "  " << k.name << " (default: " << (k.default_value.empty() ? "\"\"" : k.default_value) << ")  "
       << k.help << "\n";
  }
  return os.str();
}

struct RunOptions {
  std::string config_file;
  std::map<std::string, std::string> flags;
};

void add_run_options(CLI::App* cmd, RunOptions& opts) {
  cmd->add_option("--config", opts.config_file, "key = value configuration file");
  for (const auto& k : config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + k.name, [&opts, name = k.name](const std::string& v) { opts.flags[name] = v; },
        k.help + " (default: " + (k.default_value.empty() ? "\"\"" : k.default_value) + ")");
  }
  cmd->footer(key_listing());
}

RunConfig resolve(const RunOptions& opts) {
  RunConfig cfg;
  if (!opts.config_file.empty()) apply_config_file(cfg, opts.config_file);
  apply_environment(cfg);
  for (const auto& [k, v] : opts.flags) set_config_value(cfg, k, v);
  return cfg;
}

void print_report(const MetricsReport& r) { std::cout << report_to_text(r); }

std::vector<std::size_t> parse_counts(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw ValidationError("--counts: bad entry '" + item + "'");
    }
  }
  if (out.size() != kNumClasses) throw ValidationError("--counts: expected 5 comma-separated values");
  return out;
}

MetricsReport score_prediction_file(const Manifest& manifest, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions " + path);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) index[manifest.records[i].sample_id] = i;
  const std::size_t k = manifest.num_aus();
  std::vector<std::size_t> preds, truth;
  std::vector<std::uint8_t> au_pred, au_truth;
  std::set<std::string> seen;
  bool any_bits = false, all_bits = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string id, bits;
    long long cls = -1;
    if (!(ls >> id)) continue;
    if (!(ls >> cls) || cls < 0 || cls >= static_cast<long long>(kNumClasses)) {
      throw ParseError("expected '<sample_id> <class 0-4> [au bits]'", line_no);
    }
    auto it = index.find(id);
    if (it == index.end()) throw ParseError("unknown sample id " + id, line_no);
    if (!seen.insert(id).second) throw ParseError("duplicate sample id " + id, line_no);
    const auto& rec = manifest.records[it->second];
    preds.push_back(static_cast<std::size_t>(cls));
    truth.push_back(rec.class_label);
    if (ls >> bits) {
      if (bits.size() != k || bits.find_first_not_of("01") != std::string::npos) {
        throw ParseError("AU bits must be " + std::to_string(k) + " characters of 0/1", line_no);
      }
      any_bits = true;
      for (char c : bits) au_pred.push_back(c == '1');
      au_truth.insert(au_truth.end(), rec.au_labels.begin(), rec.au_labels.end());
    } else {
      all_bits = false;
    }
  }
  if (preds.empty()) throw ValidationError("predictions file has no entries");
  const auto cm = confusion(preds, truth, kNumClasses);
  if (any_bits && !all_bits) throw ValidationError("AU bits must be given on every line or none");
  MetricsReport r = any_bits ? make_report(cm, LabelMatrix(preds.size(), k, au_pred),
                                           LabelMatrix(preds.size(), k, au_truth), manifest.nodes)
                             : make_report(cm);
  r.label = "predictions";
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Micro-expression recognition with AU relation graphs"};
  app.require_subcommand(1);
  app.footer(key_listing());

  auto* bg = app.add_subcommand("build-graph", "write an AUGRAPH file");
  std::string bg_kind = "pruned", bg_prune, bg_table, bg_out;
  bg->add_option("--kind", bg_kind, "original | pruned | dense (default: pruned)");
  bg->add_option("--prune", bg_prune, "'default' removes AU23/24/26/38/40, 'none' keeps all 17");
  bg->add_option("--table", bg_table, "relation table file (default: built-in)");
  bg->add_option("--out", bg_out, "output file (default: stdout)");

  auto* sd = app.add_subcommand("synth-data", "generate a synthetic dataset");
  std::string sd_counts = "8,8,8,8,8", sd_out, sd_preset, sd_graph = "pruned";
  std::size_t sd_subjects = 4;
  std::uint64_t sd_seed = 0;
  double sd_noise = 0.05;
  sd->add_option("--counts", sd_counts, "samples per class I..V (default: 8,8,8,8,8)");
  sd->add_option("--subjects", sd_subjects, "number of subjects (default: 4)");
  sd->add_option("--seed", sd_seed, "generator seed (default: 0)");
  sd->add_option("--noise", sd_noise, "noise standard deviation (default: 0.05)");
  sd->add_option("--graph", sd_graph, "label node set: original | pruned | dense (default: pruned)");
  sd->add_option("--preset", sd_preset, "'composite': two databases, 253 samples, 47 subjects");
  sd->add_option("--out", sd_out, "output directory")->required();

  auto* ap = app.add_subcommand("augment-plan", "print augmentation variant tables");
  std::string ap_manifest;
  std::optional<int> ap_onset, ap_apex, ap_offset;
  ap->add_option("--manifest", ap_manifest, "manifest whose records are expanded");
  ap->add_option("--onset", ap_onset, "onset frame");
  ap->add_option("--apex", ap_apex, "apex frame");
  ap->add_option("--offset", ap_offset, "offset frame");

  RunOptions train_opts, eval_opts;
  auto* tr = app.add_subcommand("train", "train and evaluate over protocol folds");
  add_run_options(tr, train_opts);
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a manifest");
  add_run_options(ev, eval_opts);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full model");
  std::uint64_t gc_seed = 7;
  std::size_t gc_count = 1;
  double gc_h = 1e-5;
  std::string gc_attention = "sigmoid", gc_fusion = "sum", gc_loss = "balanced";
  gc->add_option("--seed", gc_seed, "first seed (default: 7)");
  gc->add_option("--seeds", gc_count, "number of consecutive seeds (default: 1)");
  gc->add_option("--step", gc_h, "finite-difference step (default: 1e-05)");
  gc->add_option("--attention", gc_attention, "sigmoid | softmax (default: sigmoid)");
  gc->add_option("--fusion", gc_fusion, "sum | concat (default: sum)");
  gc->add_option("--loss", gc_loss, "balanced | focal (default: balanced)");

  auto* mt = app.add_subcommand("metrics", "score a prediction file against a manifest");
  std::string mt_manifest, mt_preds, mt_json;
  mt->add_option("--manifest", mt_manifest, "manifest with ground truth")->required();
  mt->add_option("--predictions", mt_preds, "lines '<sample_id> <class 0-4> [au bits]'")->required();
  mt->add_option("--json", mt_json, "also write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (bg->parsed()) {
      GraphKind kind = parse_graph_kind(bg_kind);
      if (bg_prune == "default") {
        kind = GraphKind::pruned;
      } else if (bg_prune == "none") {
        kind = GraphKind::original;
      } else if (!bg_prune.empty()) {
        throw ValidationError("--prune: expected 'default' or 'none'");
      }
      AuGraph graph = make_graph(kind);
      if (!bg_table.empty()) {
        std::ifstream in(bg_table);
        if (!in) throw IoError("cannot open relation table " + bg_table);
        std::stringstream ss;
        ss << in.rdbuf();
        AuGraph full = build_graph(parse_relation_table(ss.str()));
        graph = kind == GraphKind::original ? full
              : kind == GraphKind::pruned   ? prune_graph(full, default_absent_aus())
                                            : dense_graph(prune_graph(full, default_absent_aus()).nodes());
      }
      if (bg_out.empty()) {
        std::cout << serialize_graph(graph);
      } else {
        write_graph_file(bg_out, graph);
        std::cout << "wrote " << bg_out << " (" << graph.size() << " nodes)\n";
      }
    } else if (sd->parsed()) {
      SynthSpec spec = sd_preset.empty() ? simple_synth_spec(parse_counts(sd_counts), sd_subjects, sd_seed)
                                         : sd_preset == "composite"
                                               ? composite_synth_spec(sd_seed)
                                               : throw ValidationError("--preset: expected 'composite'");
      spec.noise_sigma = sd_noise;
      const Manifest m = synth_dataset(spec, make_graph(parse_graph_kind(sd_graph)), sd_out);
      std::cout << "wrote " << m.records.size() << " samples to " << sd_out << "\n";
    } else if (ap->parsed()) {
      std::vector<std::pair<std::string, FramePositions>> items;
      if (!ap_manifest.empty()) {
        for (const auto& r : parse_manifest(ap_manifest).records) items.emplace_back(r.sample_id, r.positions);
      } else if (ap_onset && ap_apex && ap_offset) {
        items.emplace_back("-", FramePositions{*ap_onset, *ap_apex, *ap_offset});
      } else {
        throw ValidationError("augment-plan: give --manifest or all of --onset/--apex/--offset");
      }
      std::cout << "sample\tonset\tapex\toffset\tvariant_apex\tangle\tintensity\n";
      for (const auto& [id, pos] : items) {
        pos.validate();
        for (const auto& v : build_plan(pos).variants) {
          std::cout << id << '\t' << pos.onset << '\t' << pos.apex << '\t' << pos.offset << '\t' << v.apex
                    << '\t' << v.angle << '\t' << temporal_intensity(pos, v.apex) << '\n';
        }
      }
    } else if (tr->parsed()) {
      const RunConfig cfg = resolve(train_opts);
      const auto summary = run_train(cfg);
      print_report(summary.summary);
    } else if (ev->parsed()) {
      const RunConfig cfg = resolve(eval_opts);
      print_report(run_eval(cfg));
    } else if (gc->parsed()) {
      TrainConfig tc;
      tc.attention = parse_attention_kind(gc_attention);
      tc.fusion = parse_fusion_kind(gc_fusion);
      tc.loss = parse_loss_kind(gc_loss);
      bool ok = true;
      double worst = 0.0;
      for (std::size_t i = 0; i < gc_count; ++i) {
        const std::uint64_t seed = gc_seed + i;
        const auto r = joint_loss_gradcheck(seed, tc, gc_h);
        worst = std::max(worst, r.max_relative_error);
        ok = ok && r.passed;
        std::printf("seed %llu max_relative_error %.3e elements %zu kinks_skipped %zu worst %s[%zu] %s\n",
                    static_cast<unsigned long long>(seed), r.max_relative_error, r.elements_checked,
                    r.kinks_skipped, r.worst_tensor.c_str(), r.worst_index, r.passed ? "PASS" : "FAIL");
      }
      std::printf("max_relative_error %.3e\n", worst);
      if (!ok) return 2;
    } else if (mt->parsed()) {
      const MetricsReport r = score_prediction_file(parse_manifest(mt_manifest), mt_preds);
      print_report(r);
      if (!mt_json.empty()) {
        std::ofstream out(mt_json);
        if (!out) throw IoError("cannot write " + mt_json);
        out << report_to_json(r);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
