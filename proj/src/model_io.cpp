#include <cstring>
#include <fstream>

#include "model_internal.hpp"

// Weight archive layout (all integers little-endian):
//   "PODE" magic, u32 version (currently 1)
//   config: u16 preset-name length + bytes, u32 embed_dim, u32 stage_dims[4],
//           u32 bottleneck_ratio, u32 group_size, u32 ode_iterations,
//           f64 t_end, u8 norm_mode, u8 block_kind, u8 reordered,
//           u32 num_classes
//   tensors, in the fixed order of tensor_table: u16 name length, name,
//           u8 dtype (0 = f32), u8 rank, u32 dims[rank], f32 payload
// No padding, no trailing bytes.

namespace pointode::model {

namespace {

constexpr char kMagic[4] = {'P', 'O', 'D', 'E'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(bits >> 32));
}

void need(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    fail(errc::format, std::string("weight file truncated while reading ") + what);
}

std::uint16_t get_u16(std::istream& in, const char* what) {
  unsigned char b[2];
  need(in, reinterpret_cast<char*>(b), 2, what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  need(in, reinterpret_cast<char*>(b), 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& in, const char* what) {
  std::uint32_t bits = get_u32(in, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double get_f64(std::istream& in, const char* what) {
  std::uint64_t lo = get_u32(in, what);
  std::uint64_t hi = get_u32(in, what);
  std::uint64_t bits = lo | (hi << 32);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string get_name(std::istream& in) {
  std::uint16_t len = get_u16(in, "a tensor name");
  std::string s(len, '\0');
  need(in, s.data(), len, "a tensor name");
  return s;
}

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

}  // namespace

void save_weights(const ModelParams& params, const std::string& path) {
  params.config.validate();
  // the table wants a mutable reference; the copy also shields the caller
  // from the size fixups we refuse to do silently
  ModelParams copy = params;
  std::vector<detail::TensorRef> table = detail::tensor_table(copy);
  for (const auto& ref : table)
    if (ref.data->size() != element_count(ref.dims))
      fail(errc::shape, "tensor " + ref.name + " size disagrees with the configuration");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io, "cannot open for writing: " + path);

  const ModelConfig& cfg = params.config;
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  if (cfg.preset.size() > 0xffff) fail(errc::invalid_argument, "preset name too long");
  put_u16(out, static_cast<std::uint16_t>(cfg.preset.size()));
  out.write(cfg.preset.data(), static_cast<std::streamsize>(cfg.preset.size()));
  put_u32(out, static_cast<std::uint32_t>(cfg.embed_dim));
  for (std::size_t d : cfg.stage_dims) put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, static_cast<std::uint32_t>(cfg.bottleneck_ratio));
  put_u32(out, static_cast<std::uint32_t>(cfg.group_size));
  put_u32(out, static_cast<std::uint32_t>(cfg.ode_iterations));
  put_f64(out, cfg.t_end);
  out.put(cfg.norm_mode == NormMode::pointwise ? '\0' : '\1');
  out.put(cfg.block_kind == BlockKind::residual ? '\0' : '\1');
  out.put(cfg.reordered ? '\1' : '\0');
  put_u32(out, static_cast<std::uint32_t>(cfg.num_classes));

  for (const auto& ref : table) {
    put_u16(out, static_cast<std::uint16_t>(ref.name.size()));
    out.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
    out.put('\0');  // dtype f32
    out.put(static_cast<char>(ref.dims.size()));
    for (std::uint32_t d : ref.dims) put_u32(out, d);
    for (double v : *ref.data) put_f32(out, static_cast<float>(v));
  }
  out.flush();
  if (!out) fail(errc::io, "write failed: " + path);
}

ModelParams load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open weight file: " + path);

  char magic[4];
  need(in, magic, 4, "the magic");
  if (std::memcmp(magic, kMagic, 4) != 0) fail(errc::format, "bad magic in weight file");
  std::uint32_t version = get_u32(in, "the version");
  if (version != kVersion)
    fail(errc::format, "unsupported weight file version " + std::to_string(version));

  ModelConfig cfg;
  cfg.preset = get_name(in);
  cfg.embed_dim = get_u32(in, "the embedding width");
  for (std::size_t s = 0; s < 4; ++s) cfg.stage_dims[s] = get_u32(in, "a stage width");
  cfg.bottleneck_ratio = get_u32(in, "the bottleneck ratio");
  cfg.group_size = get_u32(in, "the group size");
  std::uint32_t iters = get_u32(in, "the iteration budget");
  if (iters > 1'000'000) fail(errc::format, "implausible iteration budget in weight file");
  cfg.ode_iterations = static_cast<int>(iters);
  cfg.t_end = get_f64(in, "the integration interval");
  char flags[3];
  need(in, flags, 3, "the layout flags");
  if ((flags[0] | flags[1] | flags[2]) & ~1) fail(errc::format, "unknown layout flag values");
  cfg.norm_mode = flags[0] ? NormMode::geometric_affine : NormMode::pointwise;
  cfg.block_kind = flags[1] ? BlockKind::ode : BlockKind::residual;
  cfg.reordered = flags[2] != 0;
  cfg.num_classes = get_u32(in, "the class count");
  cfg.validate();

  ModelParams params = detail::allocate_params(cfg);
  for (const auto& ref : detail::tensor_table(params)) {
    std::string name = get_name(in);
    if (name != ref.name)
      fail(errc::format, "unexpected tensor '" + name + "', wanted '" + ref.name + "'");
    char dtype;
    need(in, &dtype, 1, name.c_str());
    if (dtype != 0) fail(errc::format, "tensor " + name + " has an unsupported dtype");
    char rank;
    need(in, &rank, 1, name.c_str());
    if (static_cast<std::size_t>(rank) != ref.dims.size())
      fail(errc::shape, "tensor " + name + " has mismatched rank");
    for (std::uint32_t want : ref.dims) {
      std::uint32_t got = get_u32(in, name.c_str());
      if (got != want)
        fail(errc::shape, "tensor " + name + " has mismatched shape (got " + std::to_string(got) +
                              ", wanted " + std::to_string(want) + ")");
    }
    for (double& v : *ref.data) v = static_cast<double>(get_f32(in, name.c_str()));
  }

  if (in.peek() != std::char_traits<char>::eof())
    fail(errc::format, "trailing bytes after the last tensor");
  return params;
}

}  // namespace pointode::model
