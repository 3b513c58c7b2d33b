#pragma once

// Dense vector kernels used by the similarity and projection hot loops.
//
// Every kernel has a scalar reference implementation; AVX2 (x86-64) and NEON
// (aarch64) variants are compiled when the target supports them and chosen at
// runtime. The active backend can be pinned with the C2F_SIMD environment
// variable ("scalar", "avx2", "neon", "auto") or with set_backend().

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace c2f::simd {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*l1_distance)(const double* a, const double* b, std::size_t n);
  double (*l2_squared)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double l1_distance(const double* a, const double* b, std::size_t n);
double l2_squared(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

#if defined(C2F_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double l1_distance(const double* a, const double* b, std::size_t n);
double l2_squared(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2
#endif

#if defined(C2F_HAVE_NEON)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
double l1_distance(const double* a, const double* b, std::size_t n);
double l2_squared(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace neon
#endif

/// Backends compiled into this binary and usable on the running CPU.
std::vector<Backend> available_backends();

/// Kernel table for a specific backend; throws if it is not available.
const KernelTable& table_for(Backend backend);

/// The table used by the library. Resolved once from C2F_SIMD / CPU features.
const KernelTable& active();
Backend active_backend();

/// Pins the library to one backend; throws if it is not available.
void set_backend(Backend backend);

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  return active().l1_distance(a.data(), b.data(), a.size());
}
inline double l2_squared(std::span<const double> a, std::span<const double> b) {
  return active().l2_squared(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace c2f::simd
