#include "meraugcn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <set>

#include "meraugcn/errors.hpp"
#include "meraugcn/rng.hpp"

namespace meraugcn {

namespace fs = std::filesystem;

const std::vector<AuTemplate>& au_templates() {
  constexpr double r = 0.70710678118654752;
  // au, cx, cy, sigma_u, sigma_v, axis, dir_x, dir_y, amplitude
  static const std::vector<AuTemplate> table{
      {1, 0.40, 0.20, 0.128, 0.08, 0.0, 0.0, -1.0, 3.0},  // inner brow raiser
      {2, 0.20, 0.18, 0.144, 0.08, -20.0, 0.0, -1.0, 3.0}, // outer brow raiser
      {4, 0.50, 0.27, 0.16, 0.08, 0.0, 0.0, 1.0, 3.0},    // brow lowerer
      {5, 0.32, 0.35, 0.112, 0.064, 0.0, 0.0, -1.0, 3.0}, // upper lid raiser
      {6, 0.26, 0.52, 0.128, 0.096, 30.0, r, -r, 3.0},    // cheek raiser
      {7, 0.70, 0.40, 0.128, 0.064, 0.0, 0.0, -1.0, 3.0}, // lid tightener
      {9, 0.50, 0.48, 0.08, 0.128, 0.0, 0.0, -1.0, 3.0},  // nose wrinkler
      {10, 0.50, 0.64, 0.144, 0.064, 0.0, 0.0, -1.0, 3.0}, // upper lip raiser
      {12, 0.28, 0.74, 0.128, 0.08, -35.0, -r, -r, 3.0},  // lip corner puller
      {15, 0.72, 0.78, 0.128, 0.08, 35.0, 0.0, 1.0, 3.0}, // lip corner depressor
      {17, 0.50, 0.90, 0.16, 0.08, 0.0, 0.0, -1.0, 3.0},  // chin raiser
      {23, 0.50, 0.76, 0.144, 0.048, 0.0, 1.0, 0.0, 3.0}, // lip tightener
      {24, 0.50, 0.80, 0.16, 0.048, 0.0, 0.0, -1.0, 3.0}, // lip pressor
      {25, 0.50, 0.82, 0.112, 0.064, 0.0, 0.0, 1.0, 3.0}, // lips part
      {26, 0.50, 0.94, 0.192, 0.064, 0.0, 0.0, 1.0, 3.0}, // jaw drop
      {38, 0.42, 0.58, 0.064, 0.064, 0.0, -1.0, 0.0, 3.0}, // nostril dilator
      {40, 0.58, 0.58, 0.064, 0.064, 0.0, 0.0, -1.0, 3.0}, // sniff
  };
  return table;
}

const AuTemplate& au_template(int au) {
  for (const auto& t : au_templates()) {
    if (t.au == au) return t;
  }
  throw ValidationError("no motion template for AU" + std::to_string(au));
}

FlowField au_template_field(int au, std::size_t height, std::size_t width) {
  const auto& t = au_template(au);
  const double a = t.axis_degrees * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  FlowField f(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(width) - t.cx;
      const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(height) - t.cy;
      const double u = ca * px + sa * py;
      const double v = -sa * px + ca * py;
      const double g = t.amplitude *
                       std::exp(-0.5 * (u * u / (t.sigma_u * t.sigma_u) + v * v / (t.sigma_v * t.sigma_v)));
      f.at(0, y, x) = static_cast<float>(g * t.dir_x);
      f.at(1, y, x) = static_cast<float>(g * t.dir_y);
    }
  }
  return f;
}

std::vector<std::vector<int>> class_combinations(const AuGraph& graph, int class_id) {
  std::map<int, std::vector<std::vector<int>>> per_class;
  for (const auto& e : objective_class_relations().entries) {
    std::vector<int> kept;
    for (int au : e.aus) {
      if (graph.index_of(au)) kept.push_back(au);
    }
    if (kept.empty()) continue;
    std::sort(kept.begin(), kept.end());
    auto& list = per_class[e.class_id];
    if (std::find(list.begin(), list.end(), kept) == list.end()) list.push_back(std::move(kept));
  }
  std::vector<std::vector<int>> out;
  for (const auto& combo : per_class[class_id]) {
    bool shared = false;
    for (const auto& [other, list] : per_class) {
      if (other != class_id && std::find(list.begin(), list.end(), combo) != list.end()) shared = true;
    }
    if (!shared) out.push_back(combo);
  }
  return out;
}

SynthSpec simple_synth_spec(std::vector<std::size_t> class_counts, std::size_t subjects,
                            std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.databases.push_back({Database::synth, std::move(class_counts), subjects});
  return spec;
}

SynthSpec composite_synth_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.databases.push_back({Database::casme2, {25, 15, 99, 26, 20}, 26});
  spec.databases.push_back({Database::samm, {24, 13, 20, 8, 3}, 21});
  return spec;
}

std::vector<SynthSample> synth_samples(const SynthSpec& spec, const AuGraph& graph) {
  if (spec.databases.empty()) throw ValidationError("synth: no databases requested");
  if (!(spec.noise_sigma >= 0.0)) throw ValidationError("synth: noise sigma must be non-negative");

  std::map<std::size_t, std::vector<std::vector<int>>> combos;
  std::map<int, FlowField> templates;
  for (const auto& db : spec.databases) {
    if (db.class_counts.size() != kNumClasses) {
      throw ValidationError("synth: expected " + std::to_string(kNumClasses) + " class counts");
    }
    if (db.subjects == 0) throw ValidationError("synth: subject count must be positive");
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (db.class_counts[c] == 0 || combos.contains(c)) continue;
      auto list = class_combinations(graph, static_cast<int>(c) + 1);
      if (list.empty()) {
        throw ValidationError("synth: class " + std::to_string(c + 1) +
                              " has no AU combination left on this graph");
      }
      for (const auto& combo : list) {
        for (int au : combo) {
          if (!templates.contains(au)) templates.emplace(au, au_template_field(au, spec.height, spec.width));
        }
      }
      combos.emplace(c, std::move(list));
    }
  }

  std::vector<SynthSample> out;
  for (const auto& db : spec.databases) {
    const std::string tag(to_string(db.database));
    std::size_t serial = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (std::size_t n = 0; n < db.class_counts[c]; ++n, ++serial) {
        SynthSample s;
        auto& r = s.record;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s_%04zu", tag.c_str(), serial);
        r.sample_id = buf;
        std::snprintf(buf, sizeof buf, "%s_s%02zu", tag.c_str(), serial % db.subjects);
        r.subject_id = buf;
        r.database = db.database;
        r.flow_path = "flows/" + r.sample_id + ".oflw";
        r.class_label = c;

        Rng rng(derive_seed(spec.seed, r.sample_id));
        const auto& choices = combos.at(c);
        const auto& combo = choices[rng.below(choices.size())];
        r.au_labels.assign(graph.size(), 0);
        for (int au : combo) r.au_labels[*graph.index_of(au)] = 1;
        const int apex = 4 + static_cast<int>(rng.below(12));
        const int offset = apex + 6 + static_cast<int>(rng.below(14));
        r.positions = {0, apex, offset};

        s.flow = FlowField(spec.height, spec.width);
        std::vector<double> acc(s.flow.data.size(), 0.0);
        for (int au : combo) {
          const auto& t = templates.at(au);
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += t.data[i];
        }
        for (std::size_t i = 0; i < acc.size(); ++i) {
          const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
          s.flow.data[i] = static_cast<float>(acc[i] + noise);
        }
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

Manifest synth_dataset(const SynthSpec& spec, const AuGraph& graph, const std::string& out_dir) {
  auto samples = synth_samples(spec, graph);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "flows", ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  Manifest m;
  m.nodes = graph.nodes();
  m.base_dir = out_dir;
  for (auto& s : samples) {
    write_flow((fs::path(out_dir) / s.record.flow_path).string(), s.flow);
    m.records.push_back(std::move(s.record));
  }
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), m);
  return m;
}

}  // namespace meraugcn
