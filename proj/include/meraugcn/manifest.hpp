#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "meraugcn/augment.hpp"

namespace meraugcn {

enum class Database { casme2, samm, synth };

Database parse_database(std::string_view name);
std::string_view to_string(Database db);

struct SampleRecord {
  std::string sample_id;
  std::string subject_id;
  Database database = Database::synth;
  std::string flow_path;  // relative to the manifest directory unless absolute
  std::vector<std::uint8_t> au_labels;  // multi-hot over Manifest::nodes
  std::size_t class_label = 0;          // 0..4 for objective classes I..V
  FramePositions positions;

  bool operator==(const SampleRecord&) const = default;
};

/// Line-delimited JSON: a header object on the first line
///   {"format":"meraugcn-manifest","version":1,"K":12,"nodes":[1,2,...]}
/// then one record object per line
///   {"id":..,"subject":..,"database":..,"flow":..,"au":[0,1,..],"class":0,
///    "onset":0,"apex":10,"offset":20}
struct Manifest {
  int version = 1;
  std::vector<int> nodes;  // ascending AU ids, same order as AuGraph
  std::vector<SampleRecord> records;
  std::string base_dir;  // where relative flow paths resolve; not serialized

  std::size_t num_aus() const { return nodes.size(); }
  std::string flow_file(const SampleRecord& record) const;

  bool operator==(const Manifest& other) const {
    return version == other.version && nodes == other.nodes && records == other.records;
  }
};

inline constexpr std::size_t kNumClasses = 5;

/// Structural validation of header and records; errors name the record id.
void validate_manifest(const Manifest& manifest);

Manifest parse_manifest_text(std::string_view text, std::string base_dir = ".");
std::string serialize_manifest(const Manifest& manifest);

/// Reads, validates and checks that every flow file exists (IoError if not).
Manifest parse_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& manifest);

}  // namespace meraugcn
