#include "c2f/embedding_store.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "c2f/error.hpp"

namespace c2f {
namespace {

std::uint32_t load_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

constexpr std::size_t kHeaderBytes = 16;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

EmbeddingMatrix read_embeddings(std::istream& in, const std::string& source, EmbeddingKind kind) {
  unsigned char header[kHeaderBytes];
  in.read(reinterpret_cast<char*>(header), kHeaderBytes);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes)) {
    throw Error("embedding_store", source + ": truncated header (" + std::to_string(in.gcount()) + " of " +
                                       std::to_string(kHeaderBytes) + " bytes)");
  }
  if (std::memcmp(header, kEmbeddingMagic, 4) != 0) {
    throw Error("embedding_store", source + ": magic mismatch (expected \"C2FE\")");
  }
  const std::uint32_t version = load_u32(header + 4);
  if (version != kEmbeddingFormatVersion) {
    throw Error("embedding_store", source + ": unsupported format version " + std::to_string(version));
  }

  EmbeddingMatrix m;
  m.kind = kind;
  m.n_rows = load_u32(header + 8);
  m.dim = load_u32(header + 12);
  if (m.dim == 0 && m.n_rows != 0) throw Error("embedding_store", source + ": zero dim with nonzero rows");

  const std::uint64_t count = static_cast<std::uint64_t>(m.n_rows) * m.dim;
  const std::uint64_t bytes = count * 4;
  std::vector<unsigned char> payload(bytes);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes));
  const auto got = static_cast<std::uint64_t>(in.gcount());
  if (got != bytes) {
    throw Error("embedding_store", source + ": truncated payload: header claims " + std::to_string(m.n_rows) +
                                       " rows x " + std::to_string(m.dim) + " (" + std::to_string(bytes) +
                                       " bytes), found " + std::to_string(got) + " bytes");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error("embedding_store", source + ": trailing bytes after payload");
  }

  m.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    m.data[i] = std::bit_cast<float>(load_u32(payload.data() + 4 * i));
    if (!std::isfinite(m.data[i])) {
      throw Error("embedding_store", source + ": non-finite value at row " + std::to_string(i / m.dim) +
                                         ", column " + std::to_string(i % m.dim));
    }
  }
  return m;
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path, EmbeddingKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("embedding_store", "cannot open embedding file " + path.string());
  return read_embeddings(in, path.string(), kind);
}

void write_embeddings(std::ostream& out, const EmbeddingMatrix& m) {
  if (m.data.size() != static_cast<std::size_t>(m.n_rows) * m.dim) {
    throw Error("embedding_store", "n_rows * dim does not match data length");
  }
  unsigned char header[kHeaderBytes];
  std::memcpy(header, kEmbeddingMagic, 4);
  store_u32(header + 4, kEmbeddingFormatVersion);
  store_u32(header + 8, m.n_rows);
  store_u32(header + 12, m.dim);
  out.write(reinterpret_cast<const char*>(header), kHeaderBytes);

  std::vector<unsigned char> payload(m.data.size() * 4);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i])) {
      throw Error("embedding_store", "refusing to write non-finite value at row " + std::to_string(i / m.dim));
    }
    store_u32(payload.data() + 4 * i, std::bit_cast<std::uint32_t>(m.data[i]));
  }
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("embedding_store", "write failed");
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("embedding_store", "cannot create embedding file " + path.string());
  write_embeddings(out, m);
}

EmbeddingMatrix l2_normalize(EmbeddingMatrix m) {
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    auto row = m.row(r);
    double sq = 0.0;
    for (float v : row) sq += static_cast<double>(v) * static_cast<double>(v);
    if (sq == 0.0) throw Error("embedding_store", "zero-norm row " + std::to_string(r) + " cannot be normalized");
    const double inv = 1.0 / std::sqrt(sq);
    for (float& v : row) v = static_cast<float>(static_cast<double>(v) * inv);
  }
  return m;
}

Matrix to_matrix(const EmbeddingMatrix& m) {
  std::vector<double> data(m.data.begin(), m.data.end());
  return Matrix(m.n_rows, m.dim, std::move(data));
}

std::optional<std::string> EmbeddingManifest::get(const std::string& key) const {
  const auto it = fields.find(key);
  if (it == fields.end()) return std::nullopt;
  return it->second;
}

std::filesystem::path manifest_path(const std::filesystem::path& embedding_path) {
  return std::filesystem::path(embedding_path.string() + ".manifest");
}

std::optional<EmbeddingManifest> read_manifest(const std::filesystem::path& embedding_path) {
  const auto path = manifest_path(embedding_path);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  EmbeddingManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error("embedding_store", path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    manifest.fields[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return manifest;
}

void write_manifest(const std::filesystem::path& embedding_path, const EmbeddingManifest& manifest) {
  std::ofstream out(manifest_path(embedding_path), std::ios::trunc);
  if (!out) throw Error("embedding_store", "cannot write manifest for " + embedding_path.string());
  for (const auto& [k, v] : manifest.fields) out << k << '=' << v << '\n';
}

std::string id_hash(std::span<const std::string> row_keys) {
  std::uint64_t h = 14695981039346656037ull;
  const auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (const std::string& key : row_keys) {
    for (unsigned char ch : key) mix(ch);
    mix('\n');
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + buf;
}

}  // namespace c2f
