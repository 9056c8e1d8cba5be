#include "meraugcn/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "meraugcn/errors.hpp"

namespace meraugcn {

namespace fs = std::filesystem;
using nlohmann::json;

Database parse_database(std::string_view name) {
  if (name == "casme2") return Database::casme2;
  if (name == "samm") return Database::samm;
  if (name == "synth") return Database::synth;
  throw ValidationError("unknown database tag '" + std::string(name) + "' (expected casme2|samm|synth)");
}

std::string_view to_string(Database db) {
  switch (db) {
    case Database::casme2: return "casme2";
    case Database::samm: return "samm";
    case Database::synth: return "synth";
  }
  return "?";
}

std::string Manifest::flow_file(const SampleRecord& record) const {
  fs::path p(record.flow_path);
  if (p.is_absolute()) return p.string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

void validate_manifest(const Manifest& m) {
  if (m.version != 1) throw ValidationError("manifest: unsupported version " + std::to_string(m.version));
  if (m.nodes.empty()) throw ValidationError("manifest: node list is empty");
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    if (m.nodes[i] <= 0 || (i > 0 && m.nodes[i] <= m.nodes[i - 1])) {
      throw ValidationError("manifest: node ids must be positive and strictly ascending");
    }
  }
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    auto fail = [&](const std::string& what) {
      throw ValidationError("manifest record '" + r.sample_id + "': " + what);
    };
    if (r.sample_id.empty()) throw ValidationError("manifest: record with empty sample id");
    if (!seen.insert(r.sample_id).second) fail("duplicate sample id");
    if (r.subject_id.empty()) fail("empty subject id");
    if (r.flow_path.empty()) fail("empty flow path");
    if (r.au_labels.size() != m.nodes.size()) {
      fail("au label length " + std::to_string(r.au_labels.size()) + " != K=" + std::to_string(m.nodes.size()));
    }
    for (auto v : r.au_labels) {
      if (v > 1) fail("au labels must be 0 or 1");
    }
    if (r.class_label >= kNumClasses) fail("class label " + std::to_string(r.class_label) + " out of range");
    if (!(r.positions.onset <= r.positions.apex && r.positions.apex <= r.positions.offset)) {
      fail("frame positions not ordered");
    }
  }
}

Manifest parse_manifest_text(std::string_view text, std::string base_dir) {
  Manifest m;
  m.base_dir = std::move(base_dir);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t declared_k = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw ParseError("manifest: not a JSON object", line_no);
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != "meraugcn-manifest") throw ParseError("manifest: missing header", line_no);
        m.version = j.at("version").get<int>();
        if (m.version != 1) throw ValidationError("manifest: unsupported version " + std::to_string(m.version));
        m.nodes = j.at("nodes").get<std::vector<int>>();
        declared_k = j.at("K").get<std::size_t>();
        if (declared_k != m.nodes.size()) throw ParseError("manifest: K does not match node list", line_no);
        have_header = true;
        continue;
      }
      SampleRecord r;
      r.sample_id = j.at("id").get<std::string>();
      r.subject_id = j.at("subject").get<std::string>();
      r.database = parse_database(j.at("database").get<std::string>());
      r.flow_path = j.at("flow").get<std::string>();
      for (int v : j.at("au").get<std::vector<int>>()) {
        if (v != 0 && v != 1) {
          throw ValidationError("manifest record '" + r.sample_id + "': au labels must be 0 or 1");
        }
        r.au_labels.push_back(static_cast<std::uint8_t>(v));
      }
      const int cls = j.at("class").get<int>();
      if (cls < 0) throw ValidationError("manifest record '" + r.sample_id + "': negative class label");
      r.class_label = static_cast<std::size_t>(cls);
      r.positions = {j.at("onset").get<int>(), j.at("apex").get<int>(), j.at("offset").get<int>()};
      m.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(std::string("manifest: ") + e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("manifest: missing header", line_no == 0 ? 1 : line_no);
  validate_manifest(m);
  return m;
}

std::string serialize_manifest(const Manifest& m) {
  validate_manifest(m);
  std::string out = json{{"format", "meraugcn-manifest"},
                         {"version", m.version},
                         {"K", m.nodes.size()},
                         {"nodes", m.nodes}}
                        .dump() +
                    "\n";
  for (const auto& r : m.records) {
    std::vector<int> au(r.au_labels.begin(), r.au_labels.end());
    out += json{{"id", r.sample_id},
                {"subject", r.subject_id},
                {"database", std::string(to_string(r.database))},
                {"flow", r.flow_path},
                {"au", au},
                {"class", r.class_label},
                {"onset", r.positions.onset},
                {"apex", r.positions.apex},
                {"offset", r.positions.offset}}
               .dump() +
           "\n";
  }
  return out;
}

Manifest parse_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto dir = fs::path(path).parent_path();
  Manifest m = parse_manifest_text(ss.str(), dir.empty() ? "." : dir.string());
  for (const auto& r : m.records) {
    if (!fs::exists(m.flow_file(r))) {
      throw IoError("manifest record '" + r.sample_id + "': missing flow file " + m.flow_file(r));
    }
  }
  return m;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path);
  out << serialize_manifest(manifest);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace meraugcn
