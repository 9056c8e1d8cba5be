#pragma once

#include <string>

#include "meraugcn/augraph.hpp"
#include "meraugcn/model.hpp"

namespace meraugcn {

// Layout:
//   MERAUGCN-CKPT v1 header_bytes=<n>\n
//   <n bytes of JSON: format version, config echo, graph, tensor name->shape table>
//   <float64 little-endian blobs, one per tensor, in header order>

struct Checkpoint {
  ModelConfig config;
  AuGraph graph;
  ModelParams params;
};

std::string encode_checkpoint(const ModelConfig& config, const AuGraph& graph,
                              const ModelParams& params);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const ModelConfig& config, const AuGraph& graph,
                      const ModelParams& params);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace meraugcn
