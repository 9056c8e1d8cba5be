#include "meraugcn/flow_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "meraugcn/errors.hpp"

namespace meraugcn {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

void check_extents(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0 || h > kMaxFlowExtent || w > kMaxFlowExtent) {
    throw ValidationError("flow: extents " + std::to_string(h) + "x" + std::to_string(w) +
                          " outside 1.." + std::to_string(kMaxFlowExtent));
  }
}

}  // namespace

std::string encode_flow(const FlowField& field) {
  check_extents(field.height, field.width);
  if (field.data.size() != 2 * field.height * field.width) {
    throw ShapeError("flow: data size does not match 2xHxW");
  }
  std::string out = "OFLW";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(field.height));
  put_u32(out, static_cast<std::uint32_t>(field.width));
  put_u32(out, 2);
  out.reserve(kFlowHeaderBytes + 4 * field.data.size());
  for (float v : field.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FlowField decode_flow(const std::string& bytes) {
  if (bytes.size() < kFlowHeaderBytes) {
    if (bytes.size() >= 4 && bytes.compare(0, 4, "OFLW") != 0) throw FormatError("flow: bad magic");
    throw IoError("flow: truncated header");
  }
  if (bytes.compare(0, 4, "OFLW") != 0) throw FormatError("flow: bad magic");
  if (get_u32(bytes, 4) != 1) throw FormatError("flow: unsupported version " + std::to_string(get_u32(bytes, 4)));
  const std::size_t h = get_u32(bytes, 8), w = get_u32(bytes, 12);
  if (get_u32(bytes, 16) != 2) throw FormatError("flow: channel count must be 2");
  if (h == 0 || w == 0 || h > kMaxFlowExtent || w > kMaxFlowExtent) {
    throw FormatError("flow: extents out of range");
  }
  const std::size_t n = 2 * h * w;
  if (bytes.size() < kFlowHeaderBytes + 4 * n) throw IoError("flow: truncated payload");
  if (bytes.size() > kFlowHeaderBytes + 4 * n) throw FormatError("flow: trailing bytes");
  FlowField field(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    field.data[i] = std::bit_cast<float>(get_u32(bytes, kFlowHeaderBytes + 4 * i));
  }
  return field;
}

void write_flow(const std::string& path, const FlowField& field) {
  const auto bytes = encode_flow(field);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write flow file " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

FlowField read_flow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open flow file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_flow(ss.str());
}

}  // namespace meraugcn
