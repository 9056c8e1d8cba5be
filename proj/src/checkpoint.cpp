#include "meraugcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "meraugcn/errors.hpp"

namespace meraugcn {

namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "MERAUGCN-CKPT v1 header_bytes=";

json config_to_json(const ModelConfig& c) {
  return json{{"input_h", c.input_h},
              {"input_w", c.input_w},
              {"d", c.d},
              {"d1", c.d1},
              {"d2", c.d2},
              {"num_classes", c.num_classes},
              {"num_aus", c.num_aus},
              {"conv1_channels", c.conv1_channels},
              {"conv2_channels", c.conv2_channels},
              {"detector_hidden", c.detector_hidden},
              {"attention", std::string(to_string(c.attention))},
              {"fusion", std::string(to_string(c.fusion))},
              {"normalize_graph", c.normalize_graph}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.input_h = j.at("input_h").get<std::size_t>();
  c.input_w = j.at("input_w").get<std::size_t>();
  c.d = j.at("d").get<std::size_t>();
  c.d1 = j.at("d1").get<std::size_t>();
  c.d2 = j.at("d2").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.num_aus = j.at("num_aus").get<std::size_t>();
  c.conv1_channels = j.at("conv1_channels").get<std::size_t>();
  c.conv2_channels = j.at("conv2_channels").get<std::size_t>();
  c.detector_hidden = j.at("detector_hidden").get<std::size_t>();
  c.attention = parse_attention_kind(j.at("attention").get<std::string>());
  c.fusion = parse_fusion_kind(j.at("fusion").get<std::string>());
  c.normalize_graph = j.at("normalize_graph").get<bool>();
  c.validate();
  return c;
}

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.append(buf, 8);
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string encode_checkpoint(const ModelConfig& config, const AuGraph& graph,
                              const ModelParams& params) {
  json tensors = json::array();
  for (const auto& e : params.entries()) {
    tensors.push_back({{"name", e.name},
                       {"partition", e.partition == Partition::theta ? "theta" : "phi"},
                       {"shape", e.tensor.shape()}});
  }
  json header{{"format", "meraugcn-checkpoint"},
              {"version", 1},
              {"config", config_to_json(config)},
              {"graph", serialize_graph(graph)},
              {"tensors", tensors}};
  const std::string text = header.dump(2) + "\n";
  std::string out = std::string(kMagic) + std::to_string(text.size()) + "\n" + text;
  out.reserve(out.size() + params.total_elements() * 8);
  for (const auto& e : params.entries()) {
    for (double v : e.tensor.values()) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) throw FormatError("checkpoint: bad magic");
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("checkpoint: truncated header line");
  std::size_t header_bytes = 0;
  try {
    header_bytes = std::stoull(bytes.substr(kMagic.size(), nl - kMagic.size()));
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad header length");
  }
  if (bytes.size() < nl + 1 + header_bytes) throw IoError("checkpoint: truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(nl + 1, header_bytes));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: header is not valid JSON: ") + e.what());
  }
  if (header.value("format", "") != "meraugcn-checkpoint" || header.value("version", 0) != 1) {
    throw FormatError("checkpoint: unsupported format or version");
  }
  try {
    ModelConfig config = config_from_json(header.at("config"));
    AuGraph graph = parse_graph(header.at("graph").get<std::string>());
    const auto expected = parameter_schedule(config);
    const auto& tensors = header.at("tensors");
    if (tensors.size() != expected.size()) {
      throw FormatError("checkpoint: tensor table does not match config");
    }
    ModelParams params;
    std::size_t offset = nl + 1 + header_bytes;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto name = tensors[i].at("name").get<std::string>();
      const auto shape = tensors[i].at("shape").get<Shape>();
      if (name != expected[i].name || shape != expected[i].shape) {
        throw FormatError("checkpoint: tensor " + name + " does not match the config's schedule");
      }
      const std::size_t n = ad::numel(shape);
      if (bytes.size() < offset + n * 8) throw IoError("checkpoint: truncated payload at " + name);
      std::vector<double> values(n);
      for (std::size_t j = 0; j < n; ++j) values[j] = get_f64(bytes.data() + offset + 8 * j);
      offset += n * 8;
      params.add(name, expected[i].partition, Tensor::parameter(shape, std::move(values)));
    }
    if (offset != bytes.size()) throw FormatError("checkpoint: trailing bytes after payload");
    return Checkpoint{config, std::move(graph), std::move(params)};
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
}

void write_checkpoint(const std::string& path, const ModelConfig& config, const AuGraph& graph,
                      const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  const auto bytes = encode_checkpoint(config, graph, params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace meraugcn
