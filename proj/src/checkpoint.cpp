#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "c2f/error.hpp"
#include "c2f/model.hpp"

namespace c2f {
namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& in, const std::string& source) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw Error("checkpoint", source + ": truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& source) {
  const std::uint64_t lo = get_u32(in, source);
  const std::uint64_t hi = get_u32(in, source);
  return lo | (hi << 32);
}

void put_tensor(std::ostream& out, std::span<const double> values, std::uint32_t rows, std::uint32_t cols) {
  put_u32(out, rows);
  put_u32(out, cols);
  for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void get_tensor(std::istream& in, const std::string& source, std::uint32_t rows, std::uint32_t cols,
                std::vector<float>& out) {
  const std::uint32_t r = get_u32(in, source);
  const std::uint32_t c = get_u32(in, source);
  if (r != rows || c != cols) throw Error("checkpoint", source + ": tensor shape does not match header");
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(r) * c; ++i) {
    const float v = std::bit_cast<float>(get_u32(in, source));
    if (!std::isfinite(v)) throw Error("checkpoint", source + ": non-finite parameter");
    out.push_back(v);
  }
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ModelState& state, const std::string& config_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("checkpoint", "cannot create checkpoint " + path.string());
  const HeadShape& s = state.head.shape();
  const auto params = state.head.params();
  const auto in_dim = static_cast<std::uint32_t>(s.in_dim);
  const auto hidden = static_cast<std::uint32_t>(s.hidden_dim);
  const auto out_dim = static_cast<std::uint32_t>(s.out_dim);

  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointFormatVersion);
  put_u32(out, in_dim);
  put_u32(out, hidden);
  put_u32(out, out_dim);
  put_u64(out, state.optimizer.step);

  std::size_t offset = 0;
  const auto take = [&](std::size_t n) {
    const auto view = params.subspan(offset, n);
    offset += n;
    return view;
  };
  put_tensor(out, take(s.hidden_dim * s.in_dim), hidden, in_dim);
  put_tensor(out, take(s.hidden_dim), hidden, 1);
  put_tensor(out, take(s.out_dim * s.hidden_dim), out_dim, hidden);
  put_tensor(out, take(s.out_dim), out_dim, 1);

  put_u32(out, static_cast<std::uint32_t>(config_json.size()));
  out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));
  if (!out) throw Error("checkpoint", "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint", "cannot open checkpoint " + path.string());
  const std::string source = path.string();
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw Error("checkpoint", source + ": magic mismatch (expected \"C2FM\")");
  }
  const std::uint32_t version = get_u32(in, source);
  if (version != kCheckpointFormatVersion) {
    throw Error("checkpoint", source + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.shape.in_dim = get_u32(in, source);
  ck.shape.hidden_dim = get_u32(in, source);
  ck.shape.out_dim = get_u32(in, source);
  ck.step = get_u64(in, source);
  const auto in_dim = static_cast<std::uint32_t>(ck.shape.in_dim);
  const auto hidden = static_cast<std::uint32_t>(ck.shape.hidden_dim);
  const auto out_dim = static_cast<std::uint32_t>(ck.shape.out_dim);
  get_tensor(in, source, hidden, in_dim, ck.params);
  get_tensor(in, source, hidden, 1, ck.params);
  get_tensor(in, source, out_dim, hidden, ck.params);
  get_tensor(in, source, out_dim, 1, ck.params);
  const std::uint32_t len = get_u32(in, source);
  ck.config_json.resize(len);
  in.read(ck.config_json.data(), len);
  if (static_cast<std::uint32_t>(in.gcount()) != len) throw Error("checkpoint", source + ": truncated run config");
  return ck;
}

}  // namespace c2f
