#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "c2f/embedding_store.hpp"
#include "c2f/error.hpp"
#include "support.hpp"

using namespace c2f;

namespace {

EmbeddingMatrix sample(std::uint32_t rows, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  EmbeddingMatrix m;
  m.n_rows = rows;
  m.dim = dim;
  m.data.resize(std::size_t{rows} * dim);
  for (float& x : m.data) x = g(rng);
  return m;
}

std::string serialize(const EmbeddingMatrix& m) {
  std::ostringstream out(std::ios::binary);
  write_embeddings(out, m);
  return out.str();
}

std::string error_of(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  try {
    read_embeddings(in, "buf");
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

void put_u32(std::string& bytes, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

}  // namespace

TEST_CASE("header layout is magic, version, rows, dim, little-endian") {
  const std::string bytes = serialize(sample(3, 5, 1));
  REQUIRE(bytes.size() == 16 + 3 * 5 * 4);
  CHECK(bytes.substr(0, 4) == "C2FE");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[8]) == 3);
  CHECK(static_cast<unsigned char>(bytes[12]) == 5);
}

TEST_CASE("write then read is bit-identical, including signed zero and subnormals") {
  EmbeddingMatrix m = sample(7, 13, 2);
  m.data[0] = -0.0f;
  m.data[1] = std::numeric_limits<float>::denorm_min();
  m.data[2] = std::numeric_limits<float>::max();
  const std::string bytes = serialize(m);
  std::istringstream in(bytes, std::ios::binary);
  const EmbeddingMatrix back = read_embeddings(in);
  CHECK(back.n_rows == m.n_rows);
  CHECK(back.dim == m.dim);
  REQUIRE(back.data.size() == m.data.size());
  CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)) == 0);
  CHECK(serialize(back) == bytes);
}

TEST_CASE("empty matrix round-trips") {
  EmbeddingMatrix m;
  m.dim = 4;
  std::istringstream in(serialize(m), std::ios::binary);
  const EmbeddingMatrix back = read_embeddings(in);
  CHECK(back.n_rows == 0);
  CHECK(back.dim == 4);
}

TEST_CASE("malformed inputs are rejected with a diagnostic") {
  const std::string good = serialize(sample(2, 3, 3));

  SUBCASE("bad magic") {
    std::string b = good;
    b[0] = 'X';
    CHECK(error_of(b).find("magic") != std::string::npos);
  }
  SUBCASE("unsupported version") {
    std::string b = good;
    put_u32(b, 4, 7);
    CHECK(error_of(b).find("version") != std::string::npos);
  }
  SUBCASE("short header") { CHECK_FALSE(error_of(good.substr(0, 10)).empty()); }
  SUBCASE("truncated payload") { CHECK(error_of(good.substr(0, good.size() - 1)).find("truncated") != std::string::npos); }
  SUBCASE("trailing bytes") { CHECK(error_of(good + "x").find("trailing") != std::string::npos); }
  SUBCASE("zero dimension with rows") {
    std::string b = good.substr(0, 16);
    put_u32(b, 12, 0);
    CHECK(error_of(b).find("zero dim") != std::string::npos);
  }
  SUBCASE("NaN payload names the row") {
    // The writer refuses non-finite values, so patch the bytes directly.
    std::string b = serialize(sample(4, 3, 4));
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(b.data() + 16 + (2 * 3 + 1) * 4, &nan, 4);
    const std::string msg = error_of(b);
    CHECK(msg.find("row 2") != std::string::npos);
    CHECK(msg.find("column 1") != std::string::npos);
  }
  SUBCASE("infinite payload") {
    std::string b = good;
    const float inf = std::numeric_limits<float>::infinity();
    std::memcpy(b.data() + 16, &inf, 4);
    CHECK(error_of(b).find("non-finite") != std::string::npos);
  }
  SUBCASE("writer refuses non-finite values") {
    EmbeddingMatrix m = sample(2, 3, 5);
    m.data[0] = std::numeric_limits<float>::infinity();
    std::ostringstream out(std::ios::binary);
    CHECK_THROWS_AS(write_embeddings(out, m), Error);
  }
}

TEST_CASE("l2_normalize yields unit rows and rejects zero rows") {
  EmbeddingMatrix m = sample(5, 8, 6);
  const EmbeddingMatrix n = l2_normalize(m);
  for (std::size_t r = 0; r < n.n_rows; ++r) {
    double s = 0.0;
    for (float x : n.row(r)) s += static_cast<double>(x) * x;
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (float& x : m.row(3)) x = 0.0f;
  try {
    l2_normalize(m);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("file round-trip with manifest and id hash") {
  const auto dir = testing::scratch_dir("store");
  const auto path = dir / "x.c2fe";
  const EmbeddingMatrix m = sample(3, 4, 7);
  write_embeddings(path, m);
  CHECK_FALSE(read_manifest(path).has_value());

  EmbeddingManifest manifest;
  const std::vector<std::string> keys = {"0", "1", "2"};
  manifest.fields = {{"encoder", "test"}, {"kind", "passage"}, {"id_hash", id_hash(keys)}};
  write_manifest(path, manifest);
  CHECK(manifest_path(path).filename() == "x.c2fe.manifest");
  const auto back = read_manifest(path);
  REQUIRE(back.has_value());
  CHECK(back->fields == manifest.fields);
  CHECK(back->get("encoder") == std::optional<std::string>("test"));
  CHECK_FALSE(back->get("missing").has_value());

  const EmbeddingMatrix r = read_embeddings(path);
  CHECK(r.data == m.data);
  CHECK_THROWS_AS(read_embeddings(dir / "absent.c2fe"), Error);
}

TEST_CASE("id hash is FNV-1a over newline-terminated keys") {
  // FNV-1a 64 of the empty string is the offset basis.
  CHECK(id_hash({}) == "fnv1a64:cbf29ce484222325");
  // "a\n": ((basis ^ 'a') * prime ^ '\n') * prime, computed independently.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : std::string("a\n")) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  const std::vector<std::string> keys = {"a"};
  CHECK(id_hash(keys) == buf);
  const std::vector<std::string> ab = {"a", "b"};
  const std::vector<std::string> ba = {"b", "a"};
  CHECK(id_hash(ab) != id_hash(ba));
}
