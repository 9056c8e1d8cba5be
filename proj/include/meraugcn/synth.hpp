#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meraugcn/augraph.hpp"
#include "meraugcn/flow_io.hpp"
#include "meraugcn/manifest.hpp"

namespace meraugcn {

/// Gaussian motion blob planted for one AU. Geometry is in normalized image
/// coordinates (x right, y down, both in [0,1]).
struct AuTemplate {
  int au = 0;
  double cx = 0.5, cy = 0.5;        // center
  double sigma_u = 0.12;            // std-dev along the blob's major axis
  double sigma_v = 0.12;            // std-dev across it
  double axis_degrees = 0.0;        // major-axis orientation
  double dir_x = 0.0, dir_y = -1.0; // unit motion direction (sign included)
  double amplitude = 3.0;
};

/// The frozen per-AU table (covers every AU of the objective-class table).
const std::vector<AuTemplate>& au_templates();
const AuTemplate& au_template(int au);

/// Noise-free flow field of a single AU blob.
FlowField au_template_field(int au, std::size_t height, std::size_t width);

/// Objective-class table combinations for one class (1..5) restricted to the
/// graph's nodes. Combinations that become empty are dropped, duplicates
/// within the class are merged, and restricted combinations identical to
/// one of another class are dropped so that no two classes share a signature.
std::vector<std::vector<int>> class_combinations(const AuGraph& graph, int class_id);

struct DatabaseSpec {
  Database database = Database::synth;
  std::vector<std::size_t> class_counts;  // samples per class I..V
  std::size_t subjects = 1;
};

struct SynthSpec {
  std::vector<DatabaseSpec> databases;
  std::uint64_t seed = 0;
  double noise_sigma = 0.05;
  std::size_t height = 28;
  std::size_t width = 28;
};

/// One database of `subjects` subjects with the given per-class counts.
SynthSpec simple_synth_spec(std::vector<std::size_t> class_counts, std::size_t subjects,
                            std::uint64_t seed);

/// Two databases mirroring the composite MEGC layout: casme2 with
/// (25,15,99,26,20) samples over 26 subjects, samm with (24,13,20,8,3) over 21.
SynthSpec composite_synth_spec(std::uint64_t seed);

struct SynthSample {
  SampleRecord record;
  FlowField flow;
};

/// Generates the samples in memory. Each sample draws its combination,
/// frame positions and noise from a stream keyed by (seed, sample id).
std::vector<SynthSample> synth_samples(const SynthSpec& spec, const AuGraph& graph);

/// Writes flows/<id>.oflw files and manifest.jsonl under out_dir.
Manifest synth_dataset(const SynthSpec& spec, const AuGraph& graph, const std::string& out_dir);

}  // namespace meraugcn
