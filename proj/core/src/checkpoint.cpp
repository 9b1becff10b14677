#include "paraseq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace paraseq {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'Q', 'C', 'K', 'P', 'T', '\n'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw CheckpointError("truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, ckpt.version);
  put_string(out, ckpt.model_kind);
  put_string(out, ckpt.config_json);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.first.size()));
    for (int d : t.first) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.second) put_f32(out, v);
  }
  if (!out) throw CheckpointError("failed writing checkpoint to '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("'" + path + "' is not a checkpoint (bad magic)");
  Checkpoint c;
  c.version = get_u32(in);
  if (c.version != Checkpoint::kFormatVersion)
    throw CheckpointError("checkpoint format version " + std::to_string(c.version) +
                          ", expected " + std::to_string(Checkpoint::kFormatVersion));
  c.model_kind = get_string(in);
  c.config_json = get_string(in);
  const std::uint32_t count = get_u32(in);
  c.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(in);
    const std::uint32_t ndim = get_u32(in);
    Shape shape(ndim);
    for (auto& d : shape) d = static_cast<int>(get_u32(in));
    std::vector<float> vals(numel(shape));
    for (auto& v : vals) v = get_f32(in);
    c.tensors.emplace_back(std::move(name), std::make_pair(std::move(shape), std::move(vals)));
  }
  return c;
}

}  // namespace paraseq
